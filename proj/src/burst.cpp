#include "sdrlab/burst.hpp"

#include <algorithm>
#include <cmath>

namespace sdrlab::modem {

std::optional<Burst> recover_burst(std::span<const float> freq, const ModemParams& params, const SyncHit& hit,
                                   std::span<const std::uint8_t> sync, int max_bit_errors,
                                   std::size_t bits_after_sync) {
    const double sps = params.samples_per_symbol;
    const double n = static_cast<double>(freq.size());
    const double first_center = hit.last_symbol_center - static_cast<double>(sync.size() - 1) * sps;
    if (first_center < 0.0) return std::nullopt;

    // Start one symbol early so a half-symbol timing slip cannot eat the
    // first sync bit; the sync re-check below finds the real start.
    const double hint = first_center >= sps ? first_center - sps : first_center;
    const auto lo = static_cast<std::size_t>(std::max(0.0, std::floor(hint - sps)));
    const double end = hit.last_symbol_center + (static_cast<double>(bits_after_sync) + 1.5) * sps;
    const auto hi = static_cast<std::size_t>(std::min(n, std::ceil(end)));
    if (hi <= lo + static_cast<std::size_t>(sps)) return std::nullopt;

    auto rec = recover_bits(freq.subspan(lo, hi - lo), params, hint - static_cast<double>(lo));
    const std::size_t probe = std::min(rec.bits.size(), sync.size() + 3);
    const auto matches = correlate_pattern(std::span(rec.bits).first(probe), sync, max_bit_errors);
    if (matches.empty()) return std::nullopt;

    std::size_t best = matches.front();
    int best_errors = static_cast<int>(sync.size()) + 1;
    for (auto m : matches) {
        int errors = 0;
        for (std::size_t j = 0; j < sync.size(); ++j) errors += (rec.bits[m + j] != 0) != (sync[j] != 0);
        if (errors < best_errors) {
            best_errors = errors;
            best = m;
        }
    }

    Burst burst;
    burst.sync_errors = best_errors;
    const std::size_t count = std::min(rec.bits.size() - best, sync.size() + bits_after_sync);
    burst.bits.bits.assign(rec.bits.begin() + static_cast<std::ptrdiff_t>(best),
                           rec.bits.begin() + static_cast<std::ptrdiff_t>(best + count));
    burst.bits.start_offsets.reserve(count);
    for (std::size_t k = best; k < best + count; ++k) burst.bits.start_offsets.push_back(rec.start_offsets[k] + lo);
    burst.sync_start = static_cast<double>(burst.bits.start_offsets.front());
    return burst;
}

std::vector<Burst> find_bursts(std::span<const float> freq, const ModemParams& params,
                               std::span<const std::uint8_t> sync, int max_bit_errors, std::size_t bits_after_sync) {
    std::vector<Burst> out;
    for (const auto& hit : scan_for_sync(freq, params.samples_per_symbol, sync, max_bit_errors)) {
        if (auto burst = recover_burst(freq, params, hit, sync, max_bit_errors, bits_after_sync)) {
            out.push_back(std::move(*burst));
        }
    }
    return out;
}

}  // namespace sdrlab::modem
