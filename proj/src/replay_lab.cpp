#include "sdrlab/replay_lab.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "sdrlab/ble_link.hpp"
#include "sdrlab/ble_sniffer.hpp"
#include "sdrlab/error.hpp"
#include "sdrlab/mpdu.hpp"

namespace sdrlab::lab {

namespace {

const std::vector<std::uint8_t> kDefaultMpduPayload = {0xFF, 0xEE, 0xFF, 0xEE};
// Advertiser address and Eddystone-URL data of a reference beacon.
const std::array<std::uint8_t, 6> kDefaultAdvA = {0x41, 0xe0, 0x30, 0x2e, 0x66, 0x69};
const std::vector<std::uint8_t> kDefaultAdvData = {0x03, 0x03, 0xaa, 0xfe, 0x0e, 0x16, 0xaa, 0xfe, 0x10, 0xbb,
                                                   0x00, 0x74, 0x61, 0x6a, 0x64, 0x69, 0x6e, 0x69, 0x0a};

constexpr std::uint16_t kLabPan = 0x1234;
constexpr std::uint16_t kLabDest = 0xFFFF;
constexpr std::uint16_t kLabSrc = 0x0001;

std::string fmt(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmt_fraction(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

double to_double(const std::string& key, const std::string& value) {
    double v = 0.0;
    const auto* end = value.data() + value.size();
    const auto r = std::from_chars(value.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end) throw Error(Errc::ConfigInvalid, key + ": '" + value + "' is not a number");
    return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const auto* end = value.data() + value.size();
    const auto r = std::from_chars(value.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end) {
        throw Error(Errc::ConfigInvalid, key + ": '" + value + "' is not a non-negative integer");
    }
    return v;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

/// Runs fn(i) for i in [0, n).  Each index writes only its own slot, so the
/// outcome is the same for any thread count.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += threads) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

void put_channel(std::vector<std::pair<std::string, std::string>>& kv, const std::string& prefix,
                 const ChannelModel& ch) {
    kv.emplace_back(prefix + "snr_db", ch.snr_db ? fmt(*ch.snr_db) : "none");
    kv.emplace_back(prefix + "carrier_offset", fmt(ch.carrier_offset));
    kv.emplace_back(prefix + "timing_skew_ppm", fmt(ch.timing_skew_ppm));
    kv.emplace_back(prefix + "seed", std::to_string(ch.seed));
    kv.emplace_back(prefix + "center", preset_name(ch.center));
}

bool set_channel_key(ChannelModel& ch, const std::string& key, const std::string& name, const std::string& value) {
    if (key == "snr_db") {
        if (value == "none") {
            ch.snr_db.reset();
        } else {
            ch.snr_db = to_double(name, value);
        }
    } else if (key == "carrier_offset") {
        ch.carrier_offset = to_double(name, value);
    } else if (key == "timing_skew_ppm") {
        ch.timing_skew_ppm = to_double(name, value);
    } else if (key == "seed") {
        ch.seed = to_u64(name, value);
    } else if (key == "center") {
        ch.center = parse_preset(value);
    } else {
        return false;
    }
    return true;
}

// Replay leg: fresh noise stream, same band.
ChannelModel replay_channel_defaults(const ChannelModel& stage1) {
    ChannelModel ch;
    ch.seed = stage1.seed + 1;
    ch.center = stage1.center;
    return ch;
}

struct PacketOutcome {
    bool ok = false;
    bool bad = false;
    std::optional<RecordedPacket> record;
};

LinkStats tally(const std::vector<PacketOutcome>& outcomes) {
    LinkStats s;
    s.sent = outcomes.size();
    for (const auto& o : outcomes) {
        s.received_ok += o.ok ? 1 : 0;
        s.received_bad += o.bad ? 1 : 0;
    }
    return s;
}

PacketOutcome judge(const std::vector<Capture>& captures) {
    PacketOutcome o;
    for (const auto& c : captures) {
        if (c.valid) {
            o.ok = true;
            return o;
        }
    }
    o.bad = !captures.empty();
    return o;
}

}  // namespace

std::string protocol_name(Protocol p) {
    return p == Protocol::BleAdv ? "ble" : "mpdu";
}

Protocol parse_protocol(const std::string& name) {
    if (name == "ble" || name == "ble_adv") return Protocol::BleAdv;
    if (name == "mpdu") return Protocol::Mpdu;
    throw Error(Errc::ConfigInvalid, "unknown protocol '" + name + "' (ble or mpdu)");
}

double preset_frequency(CenterPreset preset) noexcept {
    switch (preset) {
        case CenterPreset::Ble37: return 2.402e9;
        case CenterPreset::Wixel: return 2.4499e9;
        case CenterPreset::Remote433: return 433e6;
        case CenterPreset::None: break;
    }
    return 0.0;
}

std::string preset_name(CenterPreset preset) {
    switch (preset) {
        case CenterPreset::Ble37: return "ble37";
        case CenterPreset::Wixel: return "wixel";
        case CenterPreset::Remote433: return "remote433";
        case CenterPreset::None: break;
    }
    return "none";
}

CenterPreset parse_preset(const std::string& name) {
    if (name == "none") return CenterPreset::None;
    if (name == "ble37") return CenterPreset::Ble37;
    if (name == "wixel") return CenterPreset::Wixel;
    if (name == "remote433") return CenterPreset::Remote433;
    throw Error(Errc::ConfigInvalid, "unknown center preset '" + name + "'");
}

iq::IqBuffer apply_channel(const iq::IqBuffer& buf, const ChannelModel& ch, std::uint64_t stream) {
    if (buf.empty()) throw Error(Errc::EmptyBuffer, "channel input has no samples");
    iq::IqBuffer out;
    out.sample_rate = buf.sample_rate;
    out.center_freq = ch.center == CenterPreset::None ? buf.center_freq : preset_frequency(ch.center);
    out.origin = buf.origin;
    if (ch.is_identity()) {
        out.samples = buf.samples;
        return out;
    }

    if (ch.timing_skew_ppm != 0.0) {
        // The transmitter clock runs fast by ratio r: output sample m sits at
        // input time m * r.
        const double r = 1.0 + ch.timing_skew_ppm * 1e-6;
        const auto n_out = static_cast<std::size_t>(
            std::max<long long>(1, std::llround(static_cast<double>(buf.size()) / r)));
        out.samples.resize(n_out);
        const std::size_t last = buf.size() - 1;
        for (std::size_t m = 0; m < n_out; ++m) {
            const double t = static_cast<double>(m) * r;
            const auto i = static_cast<std::size_t>(t);
            if (i >= last) {
                out.samples[m] = buf.samples[last];
                continue;
            }
            const auto frac = static_cast<float>(t - static_cast<double>(i));
            out.samples[m] = buf.samples[i] + frac * (buf.samples[i + 1] - buf.samples[i]);
        }
    } else {
        out.samples = buf.samples;
    }

    if (ch.carrier_offset != 0.0) {
        const double w = 2.0 * std::numbers::pi * ch.carrier_offset / buf.sample_rate;
        for (std::size_t n = 0; n < out.size(); ++n) {
            const double ph = std::fmod(w * static_cast<double>(n), 2.0 * std::numbers::pi);
            out.samples[n] *= iq::Sample(static_cast<float>(std::cos(ph)), static_cast<float>(std::sin(ph)));
        }
    }

    if (ch.snr_db) {
        double power = 0.0;
        for (const auto& s : buf.samples) power += std::norm(s);
        power /= static_cast<double>(buf.size());
        const double sigma = std::sqrt(power / std::pow(10.0, *ch.snr_db / 10.0) / 2.0);
        auto rng = stream_rng(ch.seed, stream);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (auto& s : out.samples) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            s += iq::Sample(static_cast<float>(sigma * re), static_cast<float>(sigma * im));
        }
    }
    return out;
}

std::string replay_mode_name(ReplayMode m) {
    return m == ReplayMode::IqReplay ? "iq" : "regenerate";
}

ReplayMode parse_replay_mode(const std::string& name) {
    if (name == "iq") return ReplayMode::IqReplay;
    if (name == "regenerate") return ReplayMode::BitRegenerate;
    throw Error(Errc::ConfigInvalid, "unknown replay mode '" + name + "' (iq or regenerate)");
}

void ExperimentConfig::validate() const {
    if (n_packets == 0) throw Error(Errc::ConfigInvalid, "n_packets must be at least 1");
    if (protocol == Protocol::BleAdv) {
        if (!(interval_ms >= 20.0 && interval_ms <= 10000.0)) {
            throw Error(Errc::ConfigInvalid, "advertising interval " + fmt(interval_ms) + " ms outside 20..10000");
        }
        if (channel < 37 || channel > 39) {
            throw Error(Errc::ConfigInvalid, "channel " + std::to_string(channel) + " is not an advertising channel");
        }
        if (payload.size() > ble::kMaxAdvDataBytes) throw Error(Errc::ConfigInvalid, "AdvData longer than 31 bytes");
    } else {
        if (!(interval_ms > 0.0)) throw Error(Errc::ConfigInvalid, "interval_ms must be positive");
        if (payload.size() > mac::kMaxPayloadBytes) throw Error(Errc::ConfigInvalid, "payload longer than 104 bytes");
    }
    try {
        modem.validate();
    } catch (const Error& e) {
        throw Error(Errc::ConfigInvalid, e.what());
    }
    if (max_sync_errors < 0 || max_sync_errors > 8) throw Error(Errc::ConfigInvalid, "max_sync_errors outside 0..8");
    for (const auto& target : {calibrate_stage1_per, calibrate_delivery}) {
        if (target && !(*target > 0.0 && *target < 1.0)) {
            throw Error(Errc::ConfigInvalid, "calibration targets must lie strictly between 0 and 1");
        }
    }
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::to_kv() const {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("protocol", protocol_name(protocol));
    kv.emplace_back("n_packets", std::to_string(n_packets));
    kv.emplace_back("interval_ms", fmt(interval_ms));
    kv.emplace_back("symbol_rate", fmt(modem.symbol_rate));
    kv.emplace_back("modulation_index", fmt(modem.modulation_index));
    kv.emplace_back("samples_per_symbol", std::to_string(modem.samples_per_symbol));
    kv.emplace_back("gaussian_bt", modem.gaussian_bt ? fmt(*modem.gaussian_bt) : "none");
    kv.emplace_back("channel", std::to_string(channel));
    kv.emplace_back("payload", ble::to_hex(effective_payload(*this)));
    put_channel(kv, "stage1.", stage1);
    if (stage2) put_channel(kv, "stage2.", *stage2);
    kv.emplace_back("replay_mode", replay_mode_name(replay_mode));
    kv.emplace_back("max_sync_errors", std::to_string(max_sync_errors));
    kv.emplace_back("threads", std::to_string(threads));
    if (calibrate_stage1_per) kv.emplace_back("calibrate.stage1_per", fmt(*calibrate_stage1_per));
    if (calibrate_delivery) kv.emplace_back("calibrate.delivery", fmt(*calibrate_delivery));
    return kv;
}

ExperimentConfig ExperimentConfig::defaults(Protocol protocol) {
    ExperimentConfig c;
    c.protocol = protocol;
    c.modem = protocol == Protocol::BleAdv ? modem::ModemParams::ble() : modem::ModemParams::wixel();
    c.stage1.center = protocol == Protocol::BleAdv ? CenterPreset::Ble37 : CenterPreset::Wixel;
    return c;
}

ExperimentConfig parse_config(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(Errc::ConfigInvalid, "line " + std::to_string(line_no) + ": expected key = value");
        }
        entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }

    // The protocol picks the defaults every other key overrides.
    Protocol protocol = Protocol::Mpdu;
    for (const auto& [k, v] : entries) {
        if (k == "protocol") protocol = parse_protocol(v);
    }
    auto c = ExperimentConfig::defaults(protocol);
    for (const auto& [k, v] : entries) {
        if (k == "protocol") continue;
        if (k == "n_packets") {
            c.n_packets = static_cast<std::size_t>(to_u64(k, v));
        } else if (k == "interval_ms") {
            c.interval_ms = to_double(k, v);
        } else if (k == "symbol_rate") {
            c.modem.symbol_rate = to_double(k, v);
        } else if (k == "modulation_index") {
            c.modem.modulation_index = to_double(k, v);
        } else if (k == "samples_per_symbol") {
            c.modem.samples_per_symbol = static_cast<int>(to_u64(k, v));
        } else if (k == "gaussian_bt") {
            if (v == "none") {
                c.modem.gaussian_bt.reset();
            } else {
                c.modem.gaussian_bt = to_double(k, v);
            }
        } else if (k == "channel") {
            c.channel = static_cast<int>(to_u64(k, v));
        } else if (k == "payload") {
            try {
                c.payload = ble::from_hex(v);
            } catch (const Error& e) {
                throw Error(Errc::ConfigInvalid, std::string("payload: ") + e.what());
            }
        } else if (k.rfind("stage1.", 0) == 0 && set_channel_key(c.stage1, k.substr(7), k, v)) {
        } else if (k.rfind("stage2.", 0) == 0) {
            if (!c.stage2) c.stage2 = replay_channel_defaults(c.stage1);
            if (!set_channel_key(*c.stage2, k.substr(7), k, v)) throw Error(Errc::ConfigInvalid, "unknown key " + k);
        } else if (k == "replay_mode") {
            c.replay_mode = parse_replay_mode(v);
        } else if (k == "max_sync_errors") {
            c.max_sync_errors = static_cast<int>(to_u64(k, v));
        } else if (k == "threads") {
            c.threads = static_cast<unsigned>(to_u64(k, v));
        } else if (k == "calibrate.stage1_per") {
            c.calibrate_stage1_per = to_double(k, v);
        } else if (k == "calibrate.delivery") {
            c.calibrate_delivery = to_double(k, v);
        } else {
            throw Error(Errc::ConfigInvalid, "unknown key " + k);
        }
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::vector<std::uint8_t> effective_payload(const ExperimentConfig& config) {
    if (!config.payload.empty()) return config.payload;
    return config.protocol == Protocol::BleAdv ? kDefaultAdvData : kDefaultMpduPayload;
}

modem::BitStream packet_bits(const ExperimentConfig& config, std::size_t index) {
    if (config.protocol == Protocol::BleAdv) {
        ble::AdvPdu pdu;
        pdu.pdu_type = ble::ADV_NONCONN_IND;
        pdu.tx_add = true;
        pdu.adv_a = kDefaultAdvA;
        pdu.adv_data = effective_payload(config);
        return ble::build_adv_packet(pdu, ble::AdvChannel::from_index(config.channel));
    }
    mac::Mpdu m;
    m.seq = static_cast<std::uint8_t>(index & 0xFF);
    m.dest_pan = kLabPan;
    m.dest_addr = kLabDest;
    m.src_addr = kLabSrc;
    m.payload = effective_payload(config);
    return mac::build_phy_frame(mac::build_mpdu(m));
}

iq::IqBuffer packet_waveform(const modem::BitStream& bits, const modem::ModemParams& params) {
    auto wave = modem::modulate(bits, params);
    const auto guard = kGuardSymbols * static_cast<std::size_t>(params.samples_per_symbol);
    std::vector<iq::Sample> padded(guard, iq::Sample{});
    padded.insert(padded.end(), wave.samples.begin(), wave.samples.end());
    padded.resize(padded.size() + guard, iq::Sample{});
    wave.samples = std::move(padded);
    return wave;
}

std::vector<Capture> receive(Protocol protocol, const iq::IqBuffer& buf, const modem::ModemParams& params,
                             int channel, int max_sync_errors) {
    std::vector<Capture> out;
    if (protocol == Protocol::BleAdv) {
        ble::SnifferConfig cfg{channel, params, max_sync_errors};
        for (auto& d : ble::decode_advertising(buf, cfg)) {
            out.push_back({static_cast<std::size_t>(d.first_sample), static_cast<std::size_t>(d.end_sample),
                           std::move(d.air_bits), d.crc_ok()});
        }
    } else {
        for (auto& f : mac::receive_frames(buf, params, max_sync_errors)) {
            out.push_back({f.first_sample, f.end_sample, std::move(f.air_bits), f.fcs_ok()});
        }
    }
    return out;
}

LinkResult run_link(const ExperimentConfig& config) {
    config.validate();
    const auto& params = config.modem;
    const double fs = params.sample_rate();
    const auto guard = kGuardSymbols * static_cast<std::size_t>(params.samples_per_symbol);

    std::vector<PacketOutcome> outcomes(config.n_packets);
    parallel_for(config.n_packets, config.threads, [&](std::size_t i) {
        const auto tx = packet_waveform(packet_bits(config, i), params);
        const auto rx = apply_channel(tx, config.stage1, i);
        const auto captures = receive(config.protocol, rx, params, config.channel, config.max_sync_errors);
        auto o = judge(captures);
        if (o.ok) {
            const auto& c = *std::find_if(captures.begin(), captures.end(), [](const Capture& x) { return x.valid; });
            const std::size_t lo = c.first_sample > guard ? c.first_sample - guard : 0;
            const std::size_t hi = std::min(rx.size(), c.end_sample + guard);
            RecordedPacket rec;
            rec.time_us = static_cast<std::uint64_t>(std::llround(static_cast<double>(i) * config.interval_ms * 1000.0 +
                                                                  static_cast<double>(c.first_sample) * 1e6 / fs));
            rec.bits = c.bits;
            rec.iq.assign(rx.samples.begin() + static_cast<std::ptrdiff_t>(lo),
                          rx.samples.begin() + static_cast<std::ptrdiff_t>(hi));
            o.record = std::move(rec);
        }
        outcomes[i] = std::move(o);
    });

    LinkResult result;
    result.stats = tally(outcomes);
    result.recording.protocol = config.protocol;
    result.recording.modem = params;
    result.recording.channel = config.channel;
    for (auto& o : outcomes) {
        if (o.record) result.recording.packets.push_back(std::move(*o.record));
    }
    return result;
}

LinkStats replay_from_recording(const Recording& rec, const modem::ModemParams& victim_modem,
                                const ChannelModel& stage2, ReplayMode mode, unsigned threads, int max_sync_errors) {
    if (rec.packets.empty()) throw Error(Errc::EmptyRecording, "recording holds no packets");
    victim_modem.validate();
    const double rec_rate = rec.modem.sample_rate();
    const double victim_rate = victim_modem.sample_rate();

    std::vector<PacketOutcome> outcomes(rec.packets.size());
    parallel_for(rec.packets.size(), threads, [&](std::size_t k) {
        const auto& pkt = rec.packets[k];
        iq::IqBuffer tx;
        if (mode == ReplayMode::IqReplay) {
            tx.samples = pkt.iq;
            tx.sample_rate = rec_rate;
            if (std::abs(rec_rate - victim_rate) > 1e-6 * victim_rate) tx = iq::resample(tx, victim_rate);
        } else {
            modem::BitStream bits;
            bits.bits = pkt.bits;
            tx = packet_waveform(bits, victim_modem);
        }
        const auto rx = apply_channel(tx, stage2, k);
        outcomes[k] = judge(receive(rec.protocol, rx, victim_modem, rec.channel, max_sync_errors));
    });
    return tally(outcomes);
}

void write_recording(const std::filesystem::path& path, const Recording& rec) {
    auto blob_path = path;
    blob_path += ".cf32";
    iq::IqBuffer blob;
    blob.sample_rate = rec.modem.sample_rate();

    std::ostringstream index;
    index << "sdrlab-recording v1 protocol=" << protocol_name(rec.protocol) << " symbol_rate=" << fmt(rec.modem.symbol_rate)
          << " modulation_index=" << fmt(rec.modem.modulation_index)
          << " samples_per_symbol=" << rec.modem.samples_per_symbol
          << " gaussian_bt=" << (rec.modem.gaussian_bt ? fmt(*rec.modem.gaussian_bt) : "none")
          << " channel=" << rec.channel << " packets=" << rec.packets.size()
          << " blob=" << blob_path.filename().string() << '\n';
    for (const auto& p : rec.packets) {
        index << p.time_us << ' ' << p.bits.size() << ' ' << ble::to_hex(modem::bits_to_bytes(p.bits)) << ' '
              << blob.size() << ' ' << p.iq.size() << '\n';
        blob.samples.insert(blob.samples.end(), p.iq.begin(), p.iq.end());
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    out << index.str();
    if (!out) throw Error(Errc::Io, "short write to " + path.string());
    const auto bytes = iq::write_iq(blob, iq::IqFormat::Float32Interleaved);
    std::ofstream bout(blob_path, std::ios::binary);
    if (!bout) throw Error(Errc::Io, "cannot write " + blob_path.string());
    bout.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Recording read_recording(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open " + path.string());
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    std::string magic, version;
    hs >> magic >> version;
    if (magic != "sdrlab-recording" || version != "v1") throw Error(Errc::Malformed, path.string() + " is not a v1 recording");

    Recording rec;
    std::string blob_name;
    std::size_t n_packets = 0;
    std::string tok;
    try {
        while (hs >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) throw Error(Errc::Malformed, "bad header token '" + tok + "'");
            const auto k = tok.substr(0, eq);
            const auto v = tok.substr(eq + 1);
            if (k == "protocol") rec.protocol = parse_protocol(v);
            else if (k == "symbol_rate") rec.modem.symbol_rate = to_double(k, v);
            else if (k == "modulation_index") rec.modem.modulation_index = to_double(k, v);
            else if (k == "samples_per_symbol") rec.modem.samples_per_symbol = static_cast<int>(to_u64(k, v));
            else if (k == "gaussian_bt") rec.modem.gaussian_bt = v == "none" ? std::nullopt : std::optional(to_double(k, v));
            else if (k == "channel") rec.channel = static_cast<int>(to_u64(k, v));
            else if (k == "packets") n_packets = static_cast<std::size_t>(to_u64(k, v));
            else if (k == "blob") blob_name = v;
        }
    } catch (const Error& e) {
        if (e.code() == Errc::Malformed) throw;
        throw Error(Errc::Malformed, std::string("recording header: ") + e.what());
    }
    rec.modem.validate();

    iq::IqBuffer blob;
    if (n_packets > 0) {
        if (blob_name.empty()) throw Error(Errc::Malformed, "recording header names no IQ blob");
        blob = iq::load_iq_file(path.parent_path() / blob_name, iq::IqFormat::Float32Interleaved,
                                rec.modem.sample_rate());
    }
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::istringstream ls(line);
        RecordedPacket p;
        std::size_t nbits = 0, offset = 0, len = 0;
        std::string hex;
        if (!(ls >> p.time_us >> nbits >> hex >> offset >> len)) throw Error(Errc::Malformed, "bad record: " + line);
        const auto bytes = ble::from_hex(hex);
        if (nbits > bytes.size() * 8 || offset + len > blob.size()) {
            throw Error(Errc::Malformed, "record does not fit its data: " + line);
        }
        p.bits = modem::bytes_to_bits(bytes);
        p.bits.resize(nbits);
        p.iq.assign(blob.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                    blob.samples.begin() + static_cast<std::ptrdiff_t>(offset + len));
        rec.packets.push_back(std::move(p));
    }
    if (rec.packets.size() != n_packets) {
        throw Error(Errc::Malformed, "header announces " + std::to_string(n_packets) + " packets, found " +
                                         std::to_string(rec.packets.size()));
    }
    return rec;
}

Report summarize(const LinkStats& stage1, const std::optional<LinkStats>& stage2,
                 std::vector<std::pair<std::string, std::string>> config) {
    Report r;
    r.stage1 = stage1;
    r.stage2 = stage2;
    r.config = std::move(config);
    if (stage1.sent == 0) {
        r.no_data = true;
        return r;
    }
    const std::uint64_t ok1 = std::min(stage1.received_ok, stage1.sent);
    const std::uint64_t delivered = stage2 ? std::min(stage2->received_ok, ok1) : ok1;
    r.lost_stage1 = stage1.sent - ok1;
    r.lost_end_to_end = stage1.sent - delivered;
    r.lost_additional = r.lost_end_to_end - r.lost_stage1;
    const auto sent = static_cast<double>(stage1.sent);
    r.stage1_loss = static_cast<double>(r.lost_stage1) / sent;
    r.additional_loss = static_cast<double>(r.lost_additional) / sent;
    r.end_to_end_loss = static_cast<double>(r.lost_end_to_end) / sent;
    r.end_to_end_delivery = static_cast<double>(delivered) / sent;
    r.stage2_per = stage2 ? stage2->per() : 0.0;
    return r;
}

std::string Report::to_text() const {
    std::ostringstream os;
    os << "replay experiment report\n";
    for (const auto& [k, v] : config) os << "  config " << k << " = " << v << '\n';
    if (no_data) {
        os << "no data: nothing was sent\n";
        return os.str();
    }
    os << "stage 1: sent " << stage1.sent << ", ok " << stage1.received_ok << ", bad " << stage1.received_bad
       << ", PER " << fmt_fraction(stage1.per()) << '\n';
    if (stage2) {
        os << "stage 2: replayed " << stage2->sent << ", ok " << stage2->received_ok << ", bad "
           << stage2->received_bad << ", PER " << fmt_fraction(stage2_per) << '\n';
    } else {
        os << "stage 2: not run\n";
    }
    os << "loss at stage 1:        " << lost_stage1 << "/" << stage1.sent << " = " << fmt_fraction(stage1_loss) << '\n';
    os << "additional replay loss: " << lost_additional << "/" << stage1.sent << " = " << fmt_fraction(additional_loss)
       << '\n';
    os << "end-to-end loss:        " << lost_end_to_end << "/" << stage1.sent << " = "
       << fmt_fraction(end_to_end_loss) << '\n';
    os << "end-to-end delivery:    " << fmt_fraction(end_to_end_delivery) << '\n';
    return os.str();
}

std::string Report::to_kv() const {
    std::ostringstream os;
    os << "no_data=" << (no_data ? 1 : 0) << '\n';
    os << "stage1.sent=" << stage1.sent << '\n';
    os << "stage1.received_ok=" << stage1.received_ok << '\n';
    os << "stage1.received_bad=" << stage1.received_bad << '\n';
    os << "stage1.per=" << fmt(stage1.per()) << '\n';
    if (stage2) {
        os << "stage2.sent=" << stage2->sent << '\n';
        os << "stage2.received_ok=" << stage2->received_ok << '\n';
        os << "stage2.received_bad=" << stage2->received_bad << '\n';
        os << "stage2.per=" << fmt(stage2_per) << '\n';
    }
    os << "lost.stage1=" << lost_stage1 << '\n';
    os << "lost.additional=" << lost_additional << '\n';
    os << "lost.end_to_end=" << lost_end_to_end << '\n';
    os << "stage1_loss=" << fmt(stage1_loss) << '\n';
    os << "additional_loss=" << fmt(additional_loss) << '\n';
    os << "end_to_end_loss=" << fmt(end_to_end_loss) << '\n';
    os << "end_to_end_delivery=" << fmt(end_to_end_delivery) << '\n';
    for (const auto& [k, v] : config) os << "config." << k << '=' << v << '\n';
    return os.str();
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    ExperimentResult r;
    r.stage1 = run_link(config);
    if (config.stage2 && !r.stage1.recording.packets.empty()) {
        r.stage2 = replay_from_recording(r.stage1.recording, config.modem, *config.stage2, config.replay_mode,
                                         config.threads, config.max_sync_errors);
    } else if (config.stage2) {
        r.stage2 = LinkStats{};
    }
    r.report = summarize(r.stage1.stats, r.stage2, config.to_kv());
    return r;
}

ExperimentConfig resolve_calibration(const ExperimentConfig& config) {
    config.validate();
    auto c = config;
    if (c.calibrate_stage1_per) {
        c.stage1.snr_db = calibrate_stage1(c, *c.calibrate_stage1_per);
        c.calibrate_stage1_per.reset();
    }
    if (c.calibrate_delivery) {
        if (!c.stage2) c.stage2 = replay_channel_defaults(c.stage1);
        c.stage2->snr_db = calibrate_stage2(c, *c.calibrate_delivery);
        c.calibrate_delivery.reset();
    }
    return c;
}

double calibrate_stage1(const ExperimentConfig& config, double target_per, double lo_db, double hi_db) {
    auto c = config;
    c.stage2.reset();
    return bisect_snr(
        [&](double snr) {
            c.stage1.snr_db = snr;
            return run_link(c).stats.per();
        },
        target_per, lo_db, hi_db);
}

double calibrate_stage2(const ExperimentConfig& config, double target_delivery, double lo_db, double hi_db) {
    const auto stage1 = run_link(config);
    if (stage1.recording.packets.empty()) throw Error(Errc::EmptyRecording, "stage 1 delivered nothing to replay");
    auto ch = config.stage2.value_or(replay_channel_defaults(config.stage1));
    const auto sent = static_cast<double>(stage1.stats.sent);
    return bisect_snr(
        [&](double snr) {
            ch.snr_db = snr;
            const auto s2 = replay_from_recording(stage1.recording, config.modem, ch, config.replay_mode,
                                                  config.threads, config.max_sync_errors);
            return 1.0 - static_cast<double>(s2.received_ok) / sent;
        },
        1.0 - target_delivery, lo_db, hi_db);
}

}  // namespace sdrlab::lab
