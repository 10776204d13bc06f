#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "sdrlab/iqio.hpp"
#include "sdrlab/replay_lab.hpp"

namespace sdrlab::cli {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNoPackets = 2;

struct DecodeOptions {
    std::filesystem::path input;
    /// Taken from the extension, then the sidecar, when absent.
    std::optional<iq::IqFormat> format;
    /// Taken from the sidecar, then 4 Msps, when absent.
    std::optional<double> rate;
    int channel = 37;
    /// Echoed in the header only.
    int gain = 0;
    int max_sync_errors = 0;
    std::size_t chunk_samples = 1 << 18;
};

/// One log line per packet plus beacon details.  Returns 0 if at least one
/// packet passed its CRC, 2 if none did, 1 on error (message on `err`).
int decode_command(const DecodeOptions& opt, std::ostream& out, std::ostream& err);

struct IBeaconSpec {
    std::string uuid;
    std::uint16_t major = 0;
    std::uint16_t minor = 0;
};

struct BeaconOptions {
    std::optional<std::string> url;
    std::optional<IBeaconSpec> ibeacon;
    std::optional<std::string> raw_hex;
    std::filesystem::path output;
    std::optional<iq::IqFormat> format;
    int channel = 37;
    /// Eddystone tx power / iBeacon measured power, dBm.
    int power_dbm = -69;
    std::string adv_address = "41e0302e6669";
    double rate = iq::kDefaultSampleRate;
};

/// Synthesizes one ADV_NONCONN_IND packet as an IQ file.
int beacon_command(const BeaconOptions& opt, std::ostream& out, std::ostream& err);

/// Bytes of AdvData described by exactly one of url / ibeacon / raw_hex.
std::vector<std::uint8_t> beacon_adv_data(const BeaconOptions& opt);

struct ExperimentOptions {
    std::filesystem::path config;
    /// Writes the stage-1 recording here when set.
    std::optional<std::filesystem::path> recording;
};

int experiment_command(const ExperimentOptions& opt, std::ostream& out, std::ostream& err);

struct ReplayOptions {
    std::filesystem::path recording;
    /// Clean replay channel when absent.
    std::optional<double> snr_db;
    std::uint64_t seed = 1;
    double carrier_offset = 0.0;
    double timing_skew_ppm = 0.0;
    lab::ReplayMode mode = lab::ReplayMode::IqReplay;
};

int replay_command(const ReplayOptions& opt, std::ostream& out, std::ostream& err);

/// Full command line, subcommand first.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sdrlab::cli
