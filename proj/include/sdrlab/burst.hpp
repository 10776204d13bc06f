#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sdrlab/modem.hpp"

namespace sdrlab::modem {

/// Bits of one detected burst, starting with its sync pattern.
/// bits.start_offsets index the frequency series the burst was cut from.
struct Burst {
    BitStream bits;
    int sync_errors = 0;
    /// Fractional frequency-series index of the first sync symbol centre.
    double sync_start = 0.0;
};

/// Re-times a burst around a scan_for_sync hit with recover_bits and
/// re-checks the sync word on the recovered bits.  Returns at most
/// sync.size() + bits_after_sync bits (fewer if the series ends early).
std::optional<Burst> recover_burst(std::span<const float> freq, const ModemParams& params, const SyncHit& hit,
                                   std::span<const std::uint8_t> sync, int max_bit_errors,
                                   std::size_t bits_after_sync);

/// scan_for_sync + recover_burst over a whole series.
std::vector<Burst> find_bursts(std::span<const float> freq, const ModemParams& params,
                               std::span<const std::uint8_t> sync, int max_bit_errors, std::size_t bits_after_sync);

}  // namespace sdrlab::modem
