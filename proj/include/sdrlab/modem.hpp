#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdrlab/iqio.hpp"

namespace sdrlab::modem {

/// Binary FSK / GFSK waveform parameters.  Peak deviation is
/// modulation_index * symbol_rate / 2; no gaussian_bt means hard 2-FSK.
struct ModemParams {
    double symbol_rate = 1e6;
    double modulation_index = 0.5;
    int samples_per_symbol = 4;
    std::optional<double> gaussian_bt = 0.5;

    double deviation() const noexcept { return modulation_index * symbol_rate / 2.0; }
    double sample_rate() const noexcept { return symbol_rate * samples_per_symbol; }

    /// Throws BadParams when a field is outside its domain.
    void validate() const;
    std::string describe() const;

    /// BLE 1M PHY: GFSK, BT 0.5, h 0.5, 4 samples/symbol.
    static ModemParams ble();
    /// Wixel (CC2511) style 2-FSK with 127 kHz deviation.  bit_rate may go up
    /// to 350 kb/s.
    static ModemParams wixel(double bit_rate = 250e3);

    bool operator==(const ModemParams&) const = default;
};

/// Hard bits in over-the-air order.  start_offsets, when filled by the
/// receiver, index the frequency series at each symbol centre.
struct BitStream {
    std::vector<std::uint8_t> bits;
    std::vector<std::size_t> start_offsets;

    std::size_t size() const noexcept { return bits.size(); }
    bool empty() const noexcept { return bits.empty(); }
};

// LSB-first bit order within each byte, as BLE and 802.15.4 transmit.
std::vector<std::uint8_t> bytes_to_bits(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> bits_to_bytes(std::span<const std::uint8_t> bits);

/// Continuous-phase FSK.  Output has bits * samples_per_symbol samples at
/// params.sample_rate(); the Gaussian filter holds the edge symbols.
iq::IqBuffer modulate(const BitStream& bits, const ModemParams& params);

/// Quadrature discriminator: out[n] = arg(s[n+1] * conj(s[n])) * fs / 2pi.
/// A zero-magnitude sample on either side yields 0 Hz.
std::vector<float> demodulate_fm(const iq::IqBuffer& buf);
/// Span form of demodulate_fm; appends samples.size() - 1 values to out.
void demodulate_fm(std::span<const iq::Sample> samples, double sample_rate, std::vector<float>& out);

/// Clock recovery and slicing.
///
/// Each symbol is estimated as the mean frequency over a one-symbol window
/// (an integrate-and-dump matched to the rectangular frequency pulse).  The
/// initial window centre is either start_hint (fractional index into freq)
/// or the half-sample phase with the largest mean energy over the first
/// symbols; it is then tracked with an early/late gate driving a first-order
/// loop.  Residual carrier offset is removed by subtracting the sliding
/// median, over 64 symbols, of each symbol's distance from its nearest
/// nominal level (+/- deviation) before slicing at zero.
BitStream recover_bits(std::span<const float> freq, const ModemParams& params,
                       std::optional<double> start_hint = std::nullopt);

inline constexpr double kTimingLoopGain = 0.05;
inline constexpr std::size_t kOffsetWindowSymbols = 64;

/// Every index i where the Hamming distance between bits[i, i+len) and the
/// pattern is <= max_bit_errors, ascending.
std::vector<std::size_t> correlate_pattern(std::span<const std::uint8_t> bits,
                                           std::span<const std::uint8_t> pattern, int max_bit_errors);

/// A candidate sync-word position found by scan_for_sync.
struct SyncHit {
    /// Fractional index into the frequency series of the centre of the
    /// pattern's last symbol.
    double last_symbol_center = 0.0;
    int bit_errors = 0;
};

/// Fast front-end detector for long captures: hard-slices a one-symbol
/// moving sum at every sample phase and matches the (<= 64 bit) pattern in
/// a shift register per phase.  Adjacent phase hits of the same burst are
/// merged.
std::vector<SyncHit> scan_for_sync(std::span<const float> freq, int samples_per_symbol,
                                   std::span<const std::uint8_t> pattern, int max_bit_errors);

}  // namespace sdrlab::modem
