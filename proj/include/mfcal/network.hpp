// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays
//
// Simulated peer-to-peer agent network. Agents exchange consensus messages
// along undirected edges in synchronous rounds: every agent posts one
// envelope per out-edge, a barrier completes, and every agent receives one
// envelope per in-edge. Two transports implement the same contract: an
// in-memory mailbox and a byte-stream over local sockets using the
// length-prefixed wire format below.

#pragma once

#include "mfcal/types.hpp"

#include <cstdint>
#include <memory>

namespace mfcal {

struct Topology {
    std::size_t num_agents = 0;
    std::vector<std::vector<std::size_t>> neighbors; // sorted adjacency sets

    std::size_t degree(std::size_t z) const { return neighbors[z].size(); }
    std::size_t num_edges() const;
    void validate() const; // symmetric, connected (when edges exist), no self-loops
};

// Ring of Z agents (Z = 2 degenerates to a single edge).
Topology make_ring(std::size_t num_agents);

// Z isolated agents, no edges (single-agent and mono-calibration runs).
Topology make_isolated(std::size_t num_agents);

// Contiguous blocks of wavelength indices, sizes differing by at most one;
// the first (F mod Z) agents take the larger blocks.
std::vector<std::vector<std::size_t>> partition_wavelengths(std::size_t num_wavelengths,
                                                            std::size_t num_agents);

enum class PayloadKind : std::uint8_t {
    GammaGain = 0,        // undirectional-gain consensus messages
    GammaDirectional = 1, // directional-gain consensus messages
};

struct Envelope {
    std::uint32_t round = 0;
    std::uint16_t from = 0;
    std::uint16_t to = 0;
    PayloadKind kind = PayloadKind::GammaGain;
    cvec payload;
};

// Wire format (bit-exact): a 4-byte big-endian length, then the record
//   round u32 | from u16 | to u16 | kind u8 | count u32 | count x (re f64, im f64)
// with every field big-endian (IEEE-754 binary64 for the floats).
std::vector<std::uint8_t> encode_envelope(const Envelope &e);
Envelope decode_envelope(std::span<const std::uint8_t> record);

class ProtocolError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class Transport {
  public:
    virtual ~Transport() = default;

    // Posts one envelope per directed edge and returns the full inbox for
    // all agents, sorted by (to, from, kind). Throws ProtocolError when an
    // edge message is missing, duplicated, or addressed off-topology.
    virtual std::vector<Envelope> exchange_round(const Topology &topology,
                                                 std::vector<Envelope> outgoing) = 0;

    virtual const char *name() const = 0;
};

std::unique_ptr<Transport> make_memory_transport();

// AF_UNIX stream pair per edge; every envelope crosses a real socket in the
// wire format above.
std::unique_ptr<Transport> make_socket_transport(const Topology &topology);

} // namespace mfcal
