#include "sdrlab/commands.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "sdrlab/adv_data.hpp"
#include "sdrlab/ble_link.hpp"
#include "sdrlab/ble_sniffer.hpp"
#include "sdrlab/error.hpp"

namespace sdrlab::cli {

namespace {

constexpr double kBeaconAmplitude = 0.9;
constexpr double kBeaconGuardSeconds = 50e-6;

std::string hex16(std::uint16_t v) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "0x%04x", v);
    return buf;
}

void print_beacon_details(const ble::ParsedAdv& adv, std::ostream& out) {
    std::vector<adv::AdStructure> ads;
    try {
        ads = adv::parse_ad_structures(adv.pdu.adv_data);
    } catch (const Error& e) {
        out << "  ad error=" << errc_name(e.code()) << '\n';
        return;
    }
    for (const auto& s : ads) {
        out << "  ad type=0x" << ble::to_hex(std::span(&s.ad_type, 1)) << " len=" << s.value.size()
            << " value=" << ble::to_hex(s.value) << '\n';
    }
    try {
        if (const auto b = adv::parse_ibeacon(ads)) {
            out << "  ibeacon uuid=" << adv::format_uuid(b->proximity_uuid) << " major=" << b->major << " ("
                << hex16(b->major) << ") minor=" << b->minor << " (" << hex16(b->minor)
                << ") power=" << static_cast<int>(b->measured_power) << '\n';
        }
    } catch (const Error& e) {
        out << "  ibeacon error=" << errc_name(e.code()) << '\n';
    }
    try {
        if (const auto e = adv::parse_eddystone_url(ads)) {
            out << "  eddystone-url url=" << e->url() << " tx_power=" << static_cast<int>(e->tx_power) << '\n';
        }
    } catch (const Error& e) {
        out << "  eddystone error=" << errc_name(e.code()) << '\n';
    }
}

std::string format_rate(double hz) {
    std::ostringstream os;
    os.precision(12);
    os << hz;
    return os.str();
}

int report_error(std::ostream& err, const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
}

}  // namespace

int decode_command(const DecodeOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        const auto meta = iq::read_sidecar(opt.input);
        iq::IqFormat format = iq::IqFormat::Int8Interleaved;
        if (opt.format) {
            format = *opt.format;
        } else if (auto ext = iq::format_from_extension(opt.input)) {
            format = *ext;
        } else if (meta) {
            format = meta->format;
        }
        const double rate = opt.rate ? *opt.rate : meta ? meta->sample_rate : iq::kDefaultSampleRate;
        if (!(rate > 0.0) || rate > iq::kMaxHackRfRate) {
            throw Error(Errc::BadRate, "sample rate " + format_rate(rate) + " Hz outside (0, 20e6]");
        }
        ble::SnifferConfig cfg;
        cfg.channel = opt.channel;
        cfg.max_sync_errors = opt.max_sync_errors;
        const double center = ble::channel_to_freq(opt.channel);

        out << "# sdrlab decode input=" << opt.input.string() << " format=" << iq::format_name(format)
            << " rate=" << format_rate(rate) << " channel=" << opt.channel << " center_freq=" << format_rate(center)
            << " gain=" << opt.gain << " (annotation) max_sync_errors=" << opt.max_sync_errors << '\n';
        out << "# modem " << cfg.modem.describe() << '\n';

        iq::IqFileReader reader(opt.input, format);
        if (reader.file_size() == 0) throw Error(Errc::EmptyInput, opt.input.string() + " is empty");

        ble::AdvSniffer sniffer(cfg);
        std::size_t total = 0;
        std::size_t valid = 0;
        const auto emit = [&](const std::vector<ble::DecodedAdv>& packets) {
            for (const auto& d : packets) {
                ++total;
                if (!d.parsed) {
                    out << "# " << d.time_us << "us Pkt" << d.packet_number << " Ch" << opt.channel
                        << " undecodable: " << d.error << '\n';
                    continue;
                }
                const ble::LogContext ctx{d.time_us, d.packet_number, opt.channel, ble::kAdvAccessAddress};
                out << ble::format_log_line(ctx, *d.parsed) << '\n';
                if (d.crc_ok()) {
                    ++valid;
                    print_beacon_details(*d.parsed, out);
                }
            }
        };

        const double modem_rate = cfg.modem.sample_rate();
        if (std::abs(rate - modem_rate) <= 1e-6 * modem_rate) {
            std::vector<iq::Sample> chunk;
            while (reader.read(opt.chunk_samples, chunk)) emit(sniffer.push(chunk));
            emit(sniffer.finish());
        } else {
            // Other rates go through the resampler in one piece.
            const auto buf = iq::load_iq_file(opt.input, format, rate, center);
            iq::ResampleWarnings warnings;
            const auto matched = iq::resample(buf, modem_rate, &warnings);
            if (warnings.aliasing_risk) {
                err << "warning: " << warnings.out_of_band_fraction * 100.0
                    << "% of input power lies outside the resampled band\n";
            }
            emit(sniffer.push(matched.samples));
            emit(sniffer.finish());
        }
        out << "# packets=" << total << " crc_ok=" << valid << '\n';
        return valid > 0 ? kExitOk : kExitNoPackets;
    } catch (const std::exception& e) {
        return report_error(err, e);
    }
}

std::vector<std::uint8_t> beacon_adv_data(const BeaconOptions& opt) {
    const int given = (opt.url ? 1 : 0) + (opt.ibeacon ? 1 : 0) + (opt.raw_hex ? 1 : 0);
    if (given != 1) throw Error(Errc::BadSpec, "give exactly one of --url, --ibeacon, --raw");
    if (opt.power_dbm < -128 || opt.power_dbm > 127) throw Error(Errc::BadSpec, "power outside -128..127 dBm");
    const auto power = static_cast<std::int8_t>(opt.power_dbm);
    if (opt.url) return adv::serialize_ad_structures(adv::eddystone_structures(adv::encode_eddystone_url(*opt.url, power)));
    if (opt.ibeacon) {
        adv::IBeacon b;
        b.proximity_uuid = adv::parse_uuid(opt.ibeacon->uuid);
        b.major = opt.ibeacon->major;
        b.minor = opt.ibeacon->minor;
        b.measured_power = power;
        return adv::serialize_ad_structures(adv::ibeacon_structures(b));
    }
    return ble::from_hex(*opt.raw_hex);
}

int beacon_command(const BeaconOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        ble::AdvPdu pdu;
        pdu.pdu_type = ble::ADV_NONCONN_IND;
        pdu.tx_add = true;
        const auto addr = ble::from_hex(opt.adv_address);
        if (addr.size() != ble::kAdvAddressBytes) throw Error(Errc::BadSpec, "advertiser address needs 6 bytes");
        std::copy(addr.begin(), addr.end(), pdu.adv_a.begin());
        pdu.adv_data = beacon_adv_data(opt);

        const auto channel = ble::AdvChannel::from_index(opt.channel);
        const auto params = modem::ModemParams::ble();
        auto wave = modem::modulate(ble::build_adv_packet(pdu, channel), params);
        const auto guard = static_cast<std::size_t>(kBeaconGuardSeconds * params.sample_rate());
        std::vector<iq::Sample> samples(guard, iq::Sample{});
        for (const auto& s : wave.samples) samples.push_back(s * static_cast<float>(kBeaconAmplitude));
        samples.resize(samples.size() + guard, iq::Sample{});
        wave.samples = std::move(samples);
        wave.center_freq = channel.center_freq;
        if (std::abs(opt.rate - wave.sample_rate) > 1e-6 * wave.sample_rate) wave = iq::resample(wave, opt.rate);

        const auto format = opt.format ? *opt.format
                                       : iq::format_from_extension(opt.output).value_or(iq::IqFormat::Int8Interleaved);
        iq::save_iq_file(opt.output, wave, format);
        out << "wrote " << opt.output.string() << " format=" << iq::format_name(format)
            << " rate=" << format_rate(wave.sample_rate) << " samples=" << wave.size() << " channel=" << opt.channel
            << '\n';
        out << "AdvA=" << ble::to_hex(pdu.adv_a) << " Data=" << ble::to_hex(pdu.adv_data) << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        return report_error(err, e);
    }
}

int experiment_command(const ExperimentOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        const auto requested = lab::load_config(opt.config);
        const auto config = lab::resolve_calibration(requested);
        const auto result = lab::run_experiment(config);
        if (opt.recording) {
            lab::write_recording(*opt.recording, result.stage1.recording);
            out << "# recording " << opt.recording->string() << " packets=" << result.stage1.recording.packets.size()
                << '\n';
        }
        out << result.report.to_text();
        out << "# key-value\n" << result.report.to_kv();
        return kExitOk;
    } catch (const std::exception& e) {
        return report_error(err, e);
    }
}

int replay_command(const ReplayOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        const auto rec = lab::read_recording(opt.recording);
        lab::ChannelModel ch;
        ch.snr_db = opt.snr_db;
        ch.seed = opt.seed;
        ch.carrier_offset = opt.carrier_offset;
        ch.timing_skew_ppm = opt.timing_skew_ppm;
        out << "# sdrlab replay recording=" << opt.recording.string() << " protocol=" << lab::protocol_name(rec.protocol)
            << " packets=" << rec.packets.size() << " mode=" << lab::replay_mode_name(opt.mode)
            << " snr_db=" << (opt.snr_db ? format_rate(*opt.snr_db) : "none") << " seed=" << opt.seed
            << " carrier_offset=" << format_rate(opt.carrier_offset)
            << " timing_skew_ppm=" << format_rate(opt.timing_skew_ppm) << '\n';
        out << "# modem " << rec.modem.describe() << '\n';
        const auto stats = lab::replay_from_recording(rec, rec.modem, ch, opt.mode);
        char per[32];
        std::snprintf(per, sizeof per, "%.6f", stats.per());
        out << "replayed=" << stats.sent << " received_ok=" << stats.received_ok
            << " received_bad=" << stats.received_bad << " per=" << per << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        return report_error(err, e);
    }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"BLE advertising / 2-FSK MAC frame capture, synthesis and replay lab", "sdrlab"};
    app.require_subcommand(1);

    DecodeOptions dec;
    std::string dec_format;
    auto* decode = app.add_subcommand("decode", "decode BLE advertising packets from an IQ capture");
    decode->add_option("--in", dec.input, "capture file")->required();
    decode->add_option("--format", dec_format, "cs8 or cf32")->check(CLI::IsMember({"cs8", "cf32"}));
    decode->add_option("--rate", dec.rate, "sample rate, Hz");
    decode->add_option("--channel", dec.channel, "advertising channel")->check(CLI::IsMember({37, 38, 39}));
    decode->add_option("-g,--gain", dec.gain, "receiver gain, recorded in the header only");
    decode->add_option("--max-sync-errors", dec.max_sync_errors, "bit errors allowed in preamble + AA")
        ->check(CLI::Range(0, 8));

    BeaconOptions bea;
    std::string bea_format;
    std::vector<std::string> ibeacon_args;
    auto* beacon = app.add_subcommand("beacon", "synthesize a beacon advertisement as IQ");
    auto* url_opt = beacon->add_option("--url", bea.url, "Eddystone-URL");
    auto* ib_opt = beacon->add_option("--ibeacon", ibeacon_args, "iBeacon: <uuid> <major> <minor>")->expected(3);
    auto* raw_opt = beacon->add_option("--raw", bea.raw_hex, "raw AdvData hex");
    url_opt->excludes(ib_opt, raw_opt);
    ib_opt->excludes(raw_opt);
    beacon->add_option("--out", bea.output, "output IQ file")->required();
    beacon->add_option("--format", bea_format, "cs8 or cf32")->check(CLI::IsMember({"cs8", "cf32"}));
    beacon->add_option("--channel", bea.channel, "advertising channel")->check(CLI::IsMember({37, 38, 39}));
    beacon->add_option("--power", bea.power_dbm, "tx / measured power, dBm");
    beacon->add_option("--adv-address", bea.adv_address, "advertiser address, 12 hex digits");
    beacon->add_option("--rate", bea.rate, "output sample rate, Hz");

    ExperimentOptions exp;
    auto* experiment = app.add_subcommand("experiment", "run a capture + replay experiment");
    experiment->add_option("--config", exp.config, "key = value config file")->required();
    experiment->add_option("--recording", exp.recording, "write the stage-1 recording here");

    ReplayOptions rep;
    std::string rep_mode = "iq";
    auto* replay = app.add_subcommand("replay", "replay a recording into a victim receiver");
    replay->add_option("--recording", rep.recording, "recording index file")->required();
    replay->add_option("--snr", rep.snr_db, "replay channel SNR, dB (clean if omitted)");
    replay->add_option("--seed", rep.seed, "noise seed");
    replay->add_option("--carrier-offset", rep.carrier_offset, "Hz");
    replay->add_option("--skew-ppm", rep.timing_skew_ppm, "transmitter clock skew, ppm");
    replay->add_option("--mode", rep_mode, "iq or regenerate")->check(CLI::IsMember({"iq", "regenerate"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }

    try {
        if (decode->parsed()) {
            if (!dec_format.empty()) dec.format = iq::parse_format(dec_format);
            return decode_command(dec, out, err);
        }
        if (beacon->parsed()) {
            if (!bea_format.empty()) bea.format = iq::parse_format(bea_format);
            if (!ibeacon_args.empty()) {
                const auto to_u16 = [](const std::string& s) {
                    std::size_t used = 0;
                    unsigned long v = 0;
                    try {
                        v = std::stoul(s, &used, 0);
                    } catch (const std::exception&) {
                        used = 0;
                    }
                    if (used == 0 || used != s.size() || v > 0xFFFF) {
                        throw Error(Errc::BadSpec, "'" + s + "' is not a 16-bit value");
                    }
                    return static_cast<std::uint16_t>(v);
                };
                bea.ibeacon = IBeaconSpec{ibeacon_args[0], to_u16(ibeacon_args[1]), to_u16(ibeacon_args[2])};
            }
            return beacon_command(bea, out, err);
        }
        if (experiment->parsed()) return experiment_command(exp, out, err);
        rep.mode = lab::parse_replay_mode(rep_mode);
        return replay_command(rep, out, err);
    } catch (const std::exception& e) {
        return report_error(err, e);
    }
}

}  // namespace sdrlab::cli
