#include "sdrlab/iqio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "sdrlab/error.hpp"

namespace sdrlab::iq {

namespace {

float load_f32_le(const std::uint8_t* p) {
    std::uint32_t raw = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                        (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(raw);
}

void store_f32_le(float v, std::uint8_t* p) {
    const auto raw = std::bit_cast<std::uint32_t>(v);
    p[0] = static_cast<std::uint8_t>(raw);
    p[1] = static_cast<std::uint8_t>(raw >> 8);
    p[2] = static_cast<std::uint8_t>(raw >> 16);
    p[3] = static_cast<std::uint8_t>(raw >> 24);
}

std::int8_t quantize_int8(float v) {
    // 1.0 is not representable; clamp to +127/128 (one step).
    const long q = std::lround(static_cast<double>(v) * 128.0);
    return static_cast<std::int8_t>(std::clamp(q, -128L, 127L));
}

std::vector<double> kaiser_lowpass(double cutoff, int half_len, double gain) {
    // cutoff in cycles/sample; beta 7 keeps passband ripple far below 0.1 dB.
    constexpr double beta = 7.0;
    const double denom = std::cyl_bessel_i(0.0, beta);
    std::vector<double> taps(2 * static_cast<std::size_t>(half_len) + 1);
    double sum = 0.0;
    for (int n = -half_len; n <= half_len; ++n) {
        const double x = 2.0 * cutoff * n;
        const double sinc = n == 0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
        const double r = static_cast<double>(n) / half_len;
        const double w = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / denom;
        taps[static_cast<std::size_t>(n + half_len)] = 2.0 * cutoff * sinc * w;
        sum += taps[static_cast<std::size_t>(n + half_len)];
    }
    for (auto& t : taps) t *= gain / sum;
    return taps;
}

double out_of_band_fraction(const IqBuffer& buf, double new_rate) {
    if (new_rate >= buf.sample_rate || buf.empty()) return 0.0;
    const double cutoff = 0.5 * new_rate / buf.sample_rate;
    const int half = static_cast<int>(std::ceil(8.0 / cutoff));
    const auto taps = kaiser_lowpass(cutoff, half, 1.0);
    const std::size_t n = std::min<std::size_t>(buf.size(), 1u << 16);
    double total = 0.0;
    double kept = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += std::norm(buf.samples[i]);
        std::complex<double> acc{};
        for (int k = -half; k <= half; ++k) {
            const long j = static_cast<long>(i) - k;
            if (j < 0 || j >= static_cast<long>(n)) continue;
            acc += taps[static_cast<std::size_t>(k + half)] * std::complex<double>(buf.samples[static_cast<std::size_t>(j)]);
        }
        kept += std::norm(acc);
    }
    if (total <= 0.0) return 0.0;
    return std::clamp(1.0 - kept / total, 0.0, 1.0);
}

}  // namespace

std::size_t pair_size(IqFormat format) noexcept {
    return format == IqFormat::Int8Interleaved ? 2 : 8;
}

std::string format_name(IqFormat format) {
    return format == IqFormat::Int8Interleaved ? "cs8" : "cf32";
}

IqFormat parse_format(const std::string& name) {
    if (name == "cs8" || name == "int8") return IqFormat::Int8Interleaved;
    if (name == "cf32" || name == "float32") return IqFormat::Float32Interleaved;
    throw Error(Errc::BadSpec, "unknown IQ format '" + name + "' (expected cs8 or cf32)");
}

std::optional<IqFormat> format_from_extension(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".cs8") return IqFormat::Int8Interleaved;
    if (ext == ".cf32") return IqFormat::Float32Interleaved;
    return std::nullopt;
}

void decode_samples(std::span<const std::uint8_t> bytes, IqFormat format, std::vector<Sample>& out) {
    const std::size_t ps = pair_size(format);
    if (bytes.size() % ps != 0) {
        throw Error(Errc::OddLength, std::to_string(bytes.size()) + " bytes is not a multiple of the " +
                                         std::to_string(ps) + "-byte IQ pair");
    }
    const std::size_t n = bytes.size() / ps;
    out.reserve(out.size() + n);
    if (format == IqFormat::Int8Interleaved) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto re = static_cast<std::int8_t>(bytes[2 * i]);
            const auto im = static_cast<std::int8_t>(bytes[2 * i + 1]);
            out.emplace_back(static_cast<float>(re) / 128.0f, static_cast<float>(im) / 128.0f);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            out.emplace_back(load_f32_le(&bytes[8 * i]), load_f32_le(&bytes[8 * i + 4]));
        }
    }
}

IqBuffer read_iq(std::span<const std::uint8_t> bytes, IqFormat format, double sample_rate, double center_freq) {
    if (bytes.empty()) throw Error(Errc::EmptyInput, "no IQ bytes");
    if (!(sample_rate > 0.0)) throw Error(Errc::BadRate, "sample rate must be positive");
    IqBuffer buf;
    buf.sample_rate = sample_rate;
    buf.center_freq = center_freq;
    buf.origin = format_name(format);
    decode_samples(bytes, format, buf.samples);
    return buf;
}

std::vector<std::uint8_t> write_iq(const IqBuffer& buf, IqFormat format) {
    std::vector<std::uint8_t> out(buf.size() * pair_size(format));
    if (format == IqFormat::Int8Interleaved) {
        for (std::size_t i = 0; i < buf.size(); ++i) {
            const auto s = buf.samples[i];
            if (!(std::abs(s.real()) <= 1.0f) || !(std::abs(s.imag()) <= 1.0f)) {
                throw Error(Errc::SampleOutOfRange, "sample " + std::to_string(i) +
                                                        " outside [-1, 1]; normalise before int8 export");
            }
            out[2 * i] = static_cast<std::uint8_t>(quantize_int8(s.real()));
            out[2 * i + 1] = static_cast<std::uint8_t>(quantize_int8(s.imag()));
        }
    } else {
        for (std::size_t i = 0; i < buf.size(); ++i) {
            store_f32_le(buf.samples[i].real(), &out[8 * i]);
            store_f32_le(buf.samples[i].imag(), &out[8 * i + 4]);
        }
    }
    return out;
}

std::optional<std::pair<int, int>> rational_ratio(double from_rate, double to_rate, int max_term) {
    if (!(from_rate > 0.0) || !(to_rate > 0.0)) return std::nullopt;
    const double ratio = to_rate / from_rate;
    for (int m = 1; m <= max_term; ++m) {
        const double l_exact = ratio * m;
        const long l = std::lround(l_exact);
        if (l < 1 || l > max_term) continue;
        if (std::abs(l_exact - static_cast<double>(l)) <= 1e-9 * std::max(1.0, l_exact)) {
            // m ascending gives the reduced fraction first.
            return std::pair<int, int>{static_cast<int>(l), m};
        }
    }
    return std::nullopt;
}

IqBuffer resample(const IqBuffer& buf, double new_rate, ResampleWarnings* warnings) {
    if (!(new_rate > 0.0)) throw Error(Errc::BadRate, "target rate must be positive");
    const auto ratio = rational_ratio(buf.sample_rate, new_rate);
    if (!ratio) {
        throw Error(Errc::IrrationalRatio, "cannot express " + std::to_string(new_rate) + "/" +
                                               std::to_string(buf.sample_rate) + " with terms <= 64");
    }
    if (warnings) {
        warnings->out_of_band_fraction = out_of_band_fraction(buf, new_rate);
        warnings->aliasing_risk = warnings->out_of_band_fraction > 0.01;
    }
    const auto [up, down] = *ratio;
    IqBuffer out;
    out.sample_rate = new_rate;
    out.center_freq = buf.center_freq;
    out.origin = buf.origin;
    if (up == 1 && down == 1) {
        out.samples = buf.samples;
        return out;
    }

    // Filter lives at the upsampled rate; cutoff is the narrower Nyquist.
    const int widest = std::max(up, down);
    const double cutoff = 0.5 / widest * 0.92;
    const int half = 16 * widest;
    const auto taps = kaiser_lowpass(cutoff, half, static_cast<double>(up));

    const std::size_t n_in = buf.size();
    const std::size_t n_out = (n_in * static_cast<std::size_t>(up) + static_cast<std::size_t>(down) - 1) /
                              static_cast<std::size_t>(down);
    out.samples.resize(n_out);
    for (std::size_t m = 0; m < n_out; ++m) {
        const long t = static_cast<long>(m) * down;
        // Contributing inputs satisfy |t - k*up| <= half.
        const long k_lo = std::max(0L, t - half <= 0 ? 0L : (t - half + up - 1) / up);
        const long k_hi = std::min(static_cast<long>(n_in) - 1, (t + half) / up);
        std::complex<double> acc{};
        for (long k = k_lo; k <= k_hi; ++k) {
            const long offset = t - k * up;
            acc += taps[static_cast<std::size_t>(offset + half)] * std::complex<double>(buf.samples[static_cast<std::size_t>(k)]);
        }
        out.samples[m] = Sample(static_cast<float>(acc.real()), static_cast<float>(acc.imag()));
    }
    return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& data_file) {
    auto p = data_file;
    p += ".meta";
    return p;
}

void write_sidecar(const std::filesystem::path& data_file, const Sidecar& meta) {
    std::ofstream out(sidecar_path(data_file));
    if (!out) throw Error(Errc::Io, "cannot write " + sidecar_path(data_file).string());
    out.precision(17);
    out << "sample_rate=" << meta.sample_rate << "\n";
    out << "center_freq=" << meta.center_freq << "\n";
    out << "format=" << format_name(meta.format) << "\n";
}

std::optional<Sidecar> read_sidecar(const std::filesystem::path& data_file) {
    std::ifstream in(sidecar_path(data_file));
    if (!in) return std::nullopt;
    Sidecar meta;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(Errc::Malformed, "sidecar line without '=': " + line);
        const auto key = line.substr(0, eq);
        const auto value = line.substr(eq + 1);
        try {
            if (key == "sample_rate") {
                meta.sample_rate = std::stod(value);
            } else if (key == "center_freq") {
                meta.center_freq = std::stod(value);
            } else if (key == "format") {
                meta.format = parse_format(value);
            }
        } catch (const std::invalid_argument&) {
            throw Error(Errc::Malformed, "bad sidecar value: " + line);
        }
    }
    return meta;
}

IqBuffer load_iq_file(const std::filesystem::path& path, IqFormat format, double sample_rate, double center_freq) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto buf = read_iq(bytes, format, sample_rate, center_freq);
    buf.origin = path.filename().string();
    return buf;
}

void save_iq_file(const std::filesystem::path& path, const IqBuffer& buf, IqFormat format) {
    const auto bytes = write_iq(buf, format);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    write_sidecar(path, Sidecar{buf.sample_rate, buf.center_freq, format});
}

IqFileReader::IqFileReader(const std::filesystem::path& path, IqFormat format)
    : in_(path, std::ios::binary), format_(format) {
    if (!in_) throw Error(Errc::Io, "cannot open " + path.string());
    file_size_ = std::filesystem::file_size(path);
}

bool IqFileReader::read(std::size_t max_samples, std::vector<Sample>& out) {
    out.clear();
    const std::size_t ps = pair_size(format_);
    scratch_.resize(max_samples * ps);
    in_.read(reinterpret_cast<char*>(scratch_.data()), static_cast<std::streamsize>(scratch_.size()));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got == 0) return false;
    decode_samples(std::span(scratch_.data(), got), format_, out);
    samples_read_ += out.size();
    return true;
}

}  // namespace sdrlab::iq
