// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays

#include "mfcal/network.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <map>
#include <sstream>

#include <sys/socket.h>
#include <unistd.h>

namespace mfcal {

std::size_t Topology::num_edges() const {
    std::size_t twice = 0;
    for (const auto &n : neighbors)
        twice += n.size();
    return twice / 2;
}

void Topology::validate() const {
    if (neighbors.size() != num_agents)
        throw std::invalid_argument("topology: adjacency size != agent count");
    for (std::size_t z = 0; z < num_agents; ++z) {
        for (std::size_t y : neighbors[z]) {
            if (y >= num_agents || y == z)
                throw std::invalid_argument("topology: bad neighbor index");
            const auto &back = neighbors[y];
            if (std::find(back.begin(), back.end(), z) == back.end())
                throw std::invalid_argument("topology: adjacency not symmetric");
        }
        if (!std::is_sorted(neighbors[z].begin(), neighbors[z].end()))
            throw std::invalid_argument("topology: neighbor sets must be sorted");
    }
    if (num_edges() == 0)
        return; // isolated agents are allowed
    // connectivity over agents that have edges: require one component overall
    std::vector<char> seen(num_agents, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        const std::size_t z = stack.back();
        stack.pop_back();
        for (std::size_t y : neighbors[z])
            if (!seen[y]) {
                seen[y] = 1;
                stack.push_back(y);
            }
    }
    for (std::size_t z = 0; z < num_agents; ++z)
        if (!seen[z] && !neighbors[z].empty())
            throw std::invalid_argument("topology: graph is not connected");
        else if (!seen[z])
            throw std::invalid_argument("topology: isolated agent in a graph with edges");
}

Topology make_ring(std::size_t num_agents) {
    if (num_agents < 2)
        throw std::invalid_argument("make_ring: need at least two agents");
    Topology t;
    t.num_agents = num_agents;
    t.neighbors.resize(num_agents);
    for (std::size_t z = 0; z < num_agents; ++z) {
        const std::size_t prev = (z + num_agents - 1) % num_agents;
        const std::size_t next = (z + 1) % num_agents;
        t.neighbors[z] = {prev, next};
        std::sort(t.neighbors[z].begin(), t.neighbors[z].end());
        t.neighbors[z].erase(std::unique(t.neighbors[z].begin(), t.neighbors[z].end()),
                             t.neighbors[z].end());
    }
    t.validate();
    return t;
}

Topology make_isolated(std::size_t num_agents) {
    if (num_agents < 1)
        throw std::invalid_argument("make_isolated: need at least one agent");
    Topology t;
    t.num_agents = num_agents;
    t.neighbors.resize(num_agents);
    return t;
}

std::vector<std::vector<std::size_t>> partition_wavelengths(std::size_t num_wavelengths,
                                                            std::size_t num_agents) {
    if (num_agents < 1 || num_wavelengths < num_agents)
        throw std::invalid_argument("partition_wavelengths: need F >= Z >= 1");
    const std::size_t base = num_wavelengths / num_agents;
    const std::size_t rem = num_wavelengths % num_agents;
    std::vector<std::vector<std::size_t>> blocks(num_agents);
    std::size_t next = 0;
    for (std::size_t z = 0; z < num_agents; ++z) {
        const std::size_t count = base + (z < rem ? 1 : 0);
        for (std::size_t j = 0; j < count; ++j)
            blocks[z].push_back(next++);
    }
    return blocks;
}

namespace {

void put_u16(std::vector<std::uint8_t> &out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_f64(std::vector<std::uint8_t> &out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int shift = 56; shift >= 0; shift -= 8)
        out.push_back(static_cast<std::uint8_t>(bits >> shift));
}

std::uint16_t get_u16(const std::uint8_t *p) {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint32_t get_u32(const std::uint8_t *p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

double get_f64(const std::uint8_t *p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits = (bits << 8) | p[i];
    return std::bit_cast<double>(bits);
}

constexpr std::size_t kHeaderBytes = 4 + 2 + 2 + 1 + 4;

} // namespace

std::vector<std::uint8_t> encode_envelope(const Envelope &e) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + kHeaderBytes + 16 * e.payload.size());
    put_u32(out, static_cast<std::uint32_t>(kHeaderBytes + 16 * e.payload.size()));
    put_u32(out, e.round);
    put_u16(out, e.from);
    put_u16(out, e.to);
    out.push_back(static_cast<std::uint8_t>(e.kind));
    put_u32(out, static_cast<std::uint32_t>(e.payload.size()));
    for (const cplx &v : e.payload) {
        put_f64(out, v.real());
        put_f64(out, v.imag());
    }
    return out;
}

Envelope decode_envelope(std::span<const std::uint8_t> record) {
    if (record.size() < kHeaderBytes)
        throw ProtocolError("decode_envelope: record shorter than header");
    Envelope e;
    e.round = get_u32(record.data());
    e.from = get_u16(record.data() + 4);
    e.to = get_u16(record.data() + 6);
    const std::uint8_t kind = record[8];
    if (kind > static_cast<std::uint8_t>(PayloadKind::GammaDirectional))
        throw ProtocolError("decode_envelope: unknown payload kind");
    e.kind = static_cast<PayloadKind>(kind);
    const std::uint32_t count = get_u32(record.data() + 9);
    if (record.size() != kHeaderBytes + 16ull * count)
        throw ProtocolError("decode_envelope: length disagrees with count");
    e.payload.resize(count);
    const std::uint8_t *p = record.data() + kHeaderBytes;
    for (std::uint32_t i = 0; i < count; ++i, p += 16)
        e.payload[i] = {get_f64(p), get_f64(p + 8)};
    return e;
}

namespace {

std::string edge_name(std::size_t from, std::size_t to) {
    std::ostringstream os;
    os << from << "->" << to;
    return os.str();
}

// Shared barrier bookkeeping: verify one envelope per directed edge per kind
// and a uniform round number, then hand back a deterministic inbox order.
void check_and_sort(const Topology &topology, std::vector<Envelope> &msgs) {
    std::map<std::tuple<std::uint8_t, std::size_t, std::size_t>, std::size_t> seen;
    std::uint32_t round = msgs.empty() ? 0 : msgs.front().round;
    for (const Envelope &e : msgs) {
        if (e.from >= topology.num_agents || e.to >= topology.num_agents)
            throw ProtocolError("exchange_round: agent index out of range on edge " +
                                edge_name(e.from, e.to));
        const auto &nbrs = topology.neighbors[e.from];
        if (std::find(nbrs.begin(), nbrs.end(), static_cast<std::size_t>(e.to)) == nbrs.end())
            throw ProtocolError("exchange_round: message on non-edge " + edge_name(e.from, e.to));
        if (e.round != round)
            throw ProtocolError("exchange_round: mixed round numbers in one barrier");
        seen[{static_cast<std::uint8_t>(e.kind), e.from, e.to}]++;
    }
    for (const auto &[key, count] : seen)
        if (count > 1)
            throw ProtocolError("exchange_round: duplicate message on edge " +
                                edge_name(std::get<1>(key), std::get<2>(key)));
    // every kind present must cover all directed edges
    std::vector<std::uint8_t> kinds;
    for (const auto &[key, count] : seen)
        if (kinds.empty() || kinds.back() != std::get<0>(key))
            kinds.push_back(std::get<0>(key));
    for (std::uint8_t kind : kinds) {
        for (std::size_t z = 0; z < topology.num_agents; ++z)
            for (std::size_t y : topology.neighbors[z])
                if (!seen.count({kind, z, y}))
                    throw ProtocolError("exchange_round: missing message on edge " +
                                        edge_name(z, y) + " at barrier");
    }
    std::stable_sort(msgs.begin(), msgs.end(), [](const Envelope &a, const Envelope &b) {
        return std::tuple(a.to, a.from, static_cast<std::uint8_t>(a.kind)) <
               std::tuple(b.to, b.from, static_cast<std::uint8_t>(b.kind));
    });
}

class MemoryTransport final : public Transport {
  public:
    std::vector<Envelope> exchange_round(const Topology &topology,
                                         std::vector<Envelope> outgoing) override {
        check_and_sort(topology, outgoing);
        return outgoing;
    }

    const char *name() const override { return "memory"; }
};

class SocketTransport final : public Transport {
  public:
    explicit SocketTransport(const Topology &topology) : num_agents_(topology.num_agents) {
        topology.validate();
        for (std::size_t z = 0; z < topology.num_agents; ++z) {
            for (std::size_t y : topology.neighbors[z]) {
                if (y < z)
                    continue;
                int fds[2];
                if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0)
                    throw std::runtime_error("socket transport: socketpair failed");
                fd_[{z, y}] = fds[0]; // z's end
                fd_[{y, z}] = fds[1]; // y's end
            }
        }
    }

    ~SocketTransport() override {
        for (auto &[key, fd] : fd_)
            ::close(fd);
    }

    SocketTransport(const SocketTransport &) = delete;
    SocketTransport &operator=(const SocketTransport &) = delete;

    std::vector<Envelope> exchange_round(const Topology &topology,
                                         std::vector<Envelope> outgoing) override {
        if (topology.num_agents != num_agents_)
            throw std::invalid_argument("socket transport: topology does not match");
        // send phase: every envelope goes through its sender's end of the edge
        for (const Envelope &e : outgoing) {
            const auto it = fd_.find({e.from, e.to});
            if (it == fd_.end())
                throw ProtocolError("exchange_round: message on non-edge " +
                                    edge_name(e.from, e.to));
            write_all(it->second, encode_envelope(e));
        }
        // receive phase: read exactly as many envelopes as were sent toward
        // each receiver (payload sizes are far below socket buffer limits,
        // so the write-all-then-read-all order cannot deadlock)
        std::vector<Envelope> incoming;
        incoming.reserve(outgoing.size());
        std::map<std::pair<std::size_t, std::size_t>, std::size_t> expected;
        for (const Envelope &e : outgoing)
            expected[{static_cast<std::size_t>(e.to), static_cast<std::size_t>(e.from)}]++;
        for (const auto &[key, count] : expected) {
            const auto [to, from] = key;
            const int fd = fd_.at({to, from}); // receiver's end of the edge
            for (std::size_t i = 0; i < count; ++i)
                incoming.push_back(read_one(fd, from, to));
        }
        check_and_sort(topology, incoming);
        return incoming;
    }

    const char *name() const override { return "socket"; }

  private:
    static void write_all(int fd, const std::vector<std::uint8_t> &bytes) {
        std::size_t off = 0;
        while (off < bytes.size()) {
            const ssize_t n = ::write(fd, bytes.data() + off, bytes.size() - off);
            if (n <= 0)
                throw std::runtime_error("socket transport: write failed");
            off += static_cast<std::size_t>(n);
        }
    }

    static void read_exact(int fd, std::uint8_t *buf, std::size_t len, std::size_t from,
                           std::size_t to) {
        std::size_t off = 0;
        while (off < len) {
            const ssize_t n = ::read(fd, buf + off, len - off);
            if (n <= 0)
                throw ProtocolError("exchange_round: missing message on edge " +
                                    edge_name(from, to) + " at barrier");
            off += static_cast<std::size_t>(n);
        }
    }

    static Envelope read_one(int fd, std::size_t from, std::size_t to) {
        std::uint8_t len_buf[4];
        read_exact(fd, len_buf, 4, from, to);
        const std::uint32_t len = get_u32(len_buf);
        std::vector<std::uint8_t> record(len);
        read_exact(fd, record.data(), len, from, to);
        return decode_envelope(record);
    }

    std::size_t num_agents_;
    std::map<std::pair<std::size_t, std::size_t>, int> fd_; // (owner, peer) -> fd
};

} // namespace

std::unique_ptr<Transport> make_memory_transport() { return std::make_unique<MemoryTransport>(); }

std::unique_ptr<Transport> make_socket_transport(const Topology &topology) {
    return std::make_unique<SocketTransport>(topology);
}

} // namespace mfcal
