#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdrlab/ble_link.hpp"
#include "sdrlab/iqio.hpp"
#include "sdrlab/modem.hpp"

namespace sdrlab::ble {

struct SnifferConfig {
    int channel = 37;
    modem::ModemParams modem = modem::ModemParams::ble();
    /// Bit errors tolerated in preamble + access address.
    int max_sync_errors = 0;
};

/// One burst that carried the advertising sync word.
struct DecodedAdv {
    std::uint64_t packet_number = 0;
    /// Absolute sample indices of the packet's first and one-past-last
    /// symbol in the stream fed to the sniffer.
    std::uint64_t first_sample = 0;
    std::uint64_t end_sample = 0;
    std::uint64_t time_us = 0;
    int sync_errors = 0;
    /// Recovered on-air bits from the preamble through the CRC.
    std::vector<std::uint8_t> air_bits;
    /// Absent when the header was unusable (bad length or truncated burst).
    std::optional<ParsedAdv> parsed;
    std::string error;

    bool crc_ok() const noexcept { return parsed && parsed->crc_ok; }
};

/// Streaming advertising-channel receiver.  Feed consecutive chunks at
/// config.modem.sample_rate(); each call returns the packets completed so
/// far.  State is per stream; no sharing between instances.
class AdvSniffer {
public:
    explicit AdvSniffer(SnifferConfig config);

    std::vector<DecodedAdv> push(std::span<const iq::Sample> chunk);
    /// Flushes packets that straddle the end of the stream.
    std::vector<DecodedAdv> finish();

    const SnifferConfig& config() const noexcept { return config_; }
    std::uint64_t samples_consumed() const noexcept { return consumed_; }

private:
    std::vector<DecodedAdv> process(bool final);
    std::optional<DecodedAdv> decode(std::span<const float> freq, const modem::SyncHit& hit);

    SnifferConfig config_;
    std::vector<std::uint8_t> sync_;
    std::vector<iq::Sample> window_;
    std::uint64_t window_base_ = 0;
    double scanned_until_ = 0.0;
    std::uint64_t next_packet_ = 0;
    std::uint64_t consumed_ = 0;
};

/// Bits after the sync word for the longest legal advertising packet.
inline constexpr std::size_t kMaxBitsAfterSync = (2 + kMaxPayloadBytes + 3) * 8;

/// One-shot decode of a whole buffer, resampling to the modem rate first
/// when needed.
std::vector<DecodedAdv> decode_advertising(const iq::IqBuffer& buf, const SnifferConfig& config);

}  // namespace sdrlab::ble
