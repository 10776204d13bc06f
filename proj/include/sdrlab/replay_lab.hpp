#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sdrlab/iqio.hpp"
#include "sdrlab/modem.hpp"

namespace sdrlab::lab {

enum class Protocol { BleAdv, Mpdu };
std::string protocol_name(Protocol p);
Protocol parse_protocol(const std::string& name);

/// Metadata only; processing is at baseband whatever the preset.
enum class CenterPreset { None, Ble37, Wixel, Remote433 };
double preset_frequency(CenterPreset preset) noexcept;
std::string preset_name(CenterPreset preset);
CenterPreset parse_preset(const std::string& name);

/// AWGN, carrier offset and transmitter clock skew.
struct ChannelModel {
    /// Signal-to-noise ratio per sample; no noise when absent.
    std::optional<double> snr_db;
    double carrier_offset = 0.0;  // Hz
    double timing_skew_ppm = 0.0;
    std::uint64_t seed = 1;
    CenterPreset center = CenterPreset::None;

    bool is_identity() const noexcept { return !snr_db && carrier_offset == 0.0 && timing_skew_ppm == 0.0; }
    bool operator==(const ChannelModel&) const = default;
};

/// Noise for stream `stream` is drawn from a generator seeded by
/// (ch.seed, stream), so packets can be processed in any order.  Noise
/// power is set from the mean power of the whole input buffer.  Throws
/// EmptyBuffer.
iq::IqBuffer apply_channel(const iq::IqBuffer& buf, const ChannelModel& ch, std::uint64_t stream = 0);

struct LinkStats {
    std::uint64_t sent = 0;
    /// CRC/FCS-valid frames.
    std::uint64_t received_ok = 0;
    /// Frames whose sync word was found but which failed the check.
    std::uint64_t received_bad = 0;

    double per() const noexcept { return sent == 0 ? 0.0 : 1.0 - static_cast<double>(received_ok) / sent; }
    bool operator==(const LinkStats&) const = default;
};

enum class ReplayMode {
    IqReplay,       // retransmit the captured samples, noise and all
    BitRegenerate,  // re-modulate the recovered bits cleanly
};
std::string replay_mode_name(ReplayMode m);
ReplayMode parse_replay_mode(const std::string& name);

struct ExperimentConfig {
    Protocol protocol = Protocol::Mpdu;
    std::size_t n_packets = 1000;
    double interval_ms = 1000.0;
    modem::ModemParams modem = modem::ModemParams::wixel();
    /// BLE advertising channel index.
    int channel = 37;
    /// MPDU payload, or BLE AdvData.  Empty selects the protocol default.
    std::vector<std::uint8_t> payload;
    ChannelModel stage1;
    std::optional<ChannelModel> stage2;
    ReplayMode replay_mode = ReplayMode::IqReplay;
    int max_sync_errors = 0;
    /// Worker threads; results do not depend on this.  0 = hardware threads.
    unsigned threads = 1;
    /// When set, resolve_calibration replaces stage1.snr_db (stage2.snr_db)
    /// with the SNR that reaches this stage-1 PER (end-to-end delivery).
    std::optional<double> calibrate_stage1_per;
    std::optional<double> calibrate_delivery;

    /// Throws ConfigInvalid.
    void validate() const;
    /// Ordered key/value echo, the same keys parse_config accepts.
    std::vector<std::pair<std::string, std::string>> to_kv() const;
    /// Defaults per protocol (Wixel modem for MPDU, BLE modem for BleAdv).
    static ExperimentConfig defaults(Protocol protocol);
};

/// "key = value" lines; '#' starts a comment.  Unknown keys throw
/// ConfigInvalid.  Keys: protocol, n_packets, interval_ms, symbol_rate,
/// modulation_index, samples_per_symbol, gaussian_bt, channel, payload,
/// stage1.snr_db, stage1.carrier_offset, stage1.timing_skew_ppm,
/// stage1.seed, stage1.center (and the same under stage2.), replay_mode,
/// max_sync_errors, threads, calibrate.stage1_per, calibrate.delivery.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// The frame payload actually sent (protocol default when config.payload
/// is empty).
std::vector<std::uint8_t> effective_payload(const ExperimentConfig& config);
/// Over-the-air bits of packet `index`.
modem::BitStream packet_bits(const ExperimentConfig& config, std::size_t index);
/// Modulated packet with silence guards on both sides.
iq::IqBuffer packet_waveform(const modem::BitStream& bits, const modem::ModemParams& params);
inline constexpr std::size_t kGuardSymbols = 8;

/// A frame that passed its CRC/FCS at the receiver.
struct RecordedPacket {
    std::uint64_t time_us = 0;
    std::vector<std::uint8_t> bits;
    std::vector<iq::Sample> iq;

    bool operator==(const RecordedPacket&) const = default;
};

struct Recording {
    Protocol protocol = Protocol::Mpdu;
    modem::ModemParams modem = modem::ModemParams::wixel();
    int channel = 37;
    std::vector<RecordedPacket> packets;

    bool operator==(const Recording&) const = default;
};

/// Writes the text index at `path` and the samples to path + ".cf32".
void write_recording(const std::filesystem::path& path, const Recording& rec);
Recording read_recording(const std::filesystem::path& path);

/// One received frame as seen by either protocol's receiver.
struct Capture {
    std::size_t first_sample = 0;
    std::size_t end_sample = 0;
    std::vector<std::uint8_t> bits;
    bool valid = false;
};
std::vector<Capture> receive(Protocol protocol, const iq::IqBuffer& buf, const modem::ModemParams& params,
                             int channel, int max_sync_errors);

struct LinkResult {
    LinkStats stats;
    Recording recording;
};

/// Stage 1: synthesize, impair with config.stage1, receive, record.
LinkResult run_link(const ExperimentConfig& config);

/// Stage 2: retransmit each recorded frame through `stage2` to a victim
/// using victim_modem.  Throws EmptyRecording.
LinkStats replay_from_recording(const Recording& rec, const modem::ModemParams& victim_modem,
                                const ChannelModel& stage2, ReplayMode mode = ReplayMode::IqReplay,
                                unsigned threads = 1, int max_sync_errors = 0);

struct Report {
    bool no_data = false;
    LinkStats stage1;
    std::optional<LinkStats> stage2;
    // Losses as counts of originally sent frames; the fractions below are
    // these over stage1.sent, so stage1 + additional = end_to_end holds on
    // the counts exactly.
    std::uint64_t lost_stage1 = 0;
    std::uint64_t lost_additional = 0;
    std::uint64_t lost_end_to_end = 0;
    double stage1_loss = 0.0;
    double additional_loss = 0.0;
    double end_to_end_loss = 0.0;
    double end_to_end_delivery = 0.0;
    /// Conditional failure rate of the replay leg.
    double stage2_per = 0.0;
    std::vector<std::pair<std::string, std::string>> config;

    std::string to_text() const;
    std::string to_kv() const;
};

Report summarize(const LinkStats& stage1, const std::optional<LinkStats>& stage2,
                 std::vector<std::pair<std::string, std::string>> config = {});

struct ExperimentResult {
    LinkResult stage1;
    std::optional<LinkStats> stage2;
    Report report;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Bisection on an SNR (dB) until `measure(snr)` lands within `tolerance`
/// of `target`, assuming measure decreases with SNR.  Returns the last
/// midpoint if the bracket collapses first.
template <class Measure>
double bisect_snr(Measure&& measure, double target, double lo_db, double hi_db, double tolerance = 0.005,
                  int max_iterations = 20) {
    double mid = 0.5 * (lo_db + hi_db);
    for (int i = 0; i < max_iterations; ++i) {
        mid = 0.5 * (lo_db + hi_db);
        const double value = measure(mid);
        if (value > target + tolerance) {
            lo_db = mid;
        } else if (value < target - tolerance) {
            hi_db = mid;
        } else {
            break;
        }
    }
    return mid;
}

/// Runs the requested calibrations and returns the config with the found
/// SNRs filled in and the calibration targets cleared.
ExperimentConfig resolve_calibration(const ExperimentConfig& config);

/// Stage-1 SNR giving a packet error rate near target_per.
double calibrate_stage1(const ExperimentConfig& config, double target_per, double lo_db = -5.0,
                        double hi_db = 30.0);
/// Stage-2 SNR giving end-to-end delivery near target_delivery, with
/// stage 1 as configured.
double calibrate_stage2(const ExperimentConfig& config, double target_delivery, double lo_db = -5.0,
                        double hi_db = 40.0);

}  // namespace sdrlab::lab
