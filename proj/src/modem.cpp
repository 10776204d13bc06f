#include "sdrlab/modem.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sdrlab/error.hpp"

namespace sdrlab::modem {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> gaussian_taps(double bt, int sps) {
    // Standard deviation of the GFSK pulse-shaping Gaussian, in symbols.
    const double sigma = std::sqrt(std::log(2.0)) / (kTwoPi * bt);
    const int half = std::max(1, static_cast<int>(std::ceil(4.0 * sigma * sps)));
    std::vector<double> taps(2 * static_cast<std::size_t>(half) + 1);
    double sum = 0.0;
    for (int n = -half; n <= half; ++n) {
        const double t = static_cast<double>(n) / sps;
        const double v = std::exp(-t * t / (2.0 * sigma * sigma));
        taps[static_cast<std::size_t>(n + half)] = v;
        sum += v;
    }
    for (auto& t : taps) t /= sum;
    return taps;
}

// Cumulative frequency with linear interpolation between integer knots, so
// that window sums over fractional bounds stay exact for piecewise-constant
// input.
class PhaseIntegral {
public:
    explicit PhaseIntegral(std::span<const float> freq) : cum_(freq.size() + 1, 0.0) {
        for (std::size_t i = 0; i < freq.size(); ++i) cum_[i + 1] = cum_[i] + freq[i];
    }

    double at(double x) const {
        const double n = static_cast<double>(cum_.size() - 1);
        x = std::clamp(x, 0.0, n);
        const auto i = static_cast<std::size_t>(std::floor(x));
        if (i + 1 >= cum_.size()) return cum_.back();
        const double frac = x - static_cast<double>(i);
        return cum_[i] + frac * (cum_[i + 1] - cum_[i]);
    }

    /// Mean over [center - width/2, center + width/2), clipped to the data.
    double window_mean(double center, double width) const {
        const double n = static_cast<double>(cum_.size() - 1);
        const double lo = std::clamp(center - width / 2.0, 0.0, n);
        const double hi = std::clamp(center + width / 2.0, 0.0, n);
        if (hi - lo <= 1e-9) return 0.0;
        return (at(hi) - at(lo)) / (hi - lo);
    }

private:
    std::vector<double> cum_;
};

double median_of(std::vector<double>& v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace

void ModemParams::validate() const {
    if (!(symbol_rate > 0.0)) throw Error(Errc::BadParams, "symbol_rate must be positive");
    if (!(modulation_index > 0.0)) throw Error(Errc::BadParams, "modulation_index must be positive");
    if (samples_per_symbol < 2) throw Error(Errc::BadParams, "samples_per_symbol must be >= 2");
    if (gaussian_bt && !(*gaussian_bt > 0.0 && *gaussian_bt <= 1.0)) {
        throw Error(Errc::BadParams, "gaussian_bt must lie in (0, 1]");
    }
}

std::string ModemParams::describe() const {
    std::ostringstream os;
    os << "symbol_rate=" << symbol_rate << " modulation_index=" << modulation_index
       << " samples_per_symbol=" << samples_per_symbol << " gaussian_bt=";
    if (gaussian_bt) {
        os << *gaussian_bt;
    } else {
        os << "none";
    }
    return os.str();
}

ModemParams ModemParams::ble() {
    return ModemParams{1e6, 0.5, 4, 0.5};
}

ModemParams ModemParams::wixel(double bit_rate) {
    if (!(bit_rate > 0.0) || bit_rate > 350e3) {
        throw Error(Errc::BadParams, "Wixel bit rate must be in (0, 350000] b/s");
    }
    constexpr double deviation_hz = 127e3;
    return ModemParams{bit_rate, 2.0 * deviation_hz / bit_rate, 4, std::nullopt};
}

std::vector<std::uint8_t> bytes_to_bits(std::span<const std::uint8_t> bytes) {
    std::vector<std::uint8_t> bits;
    bits.reserve(bytes.size() * 8);
    for (auto b : bytes) {
        for (int i = 0; i < 8; ++i) bits.push_back(static_cast<std::uint8_t>((b >> i) & 1u));
    }
    return bits;
}

std::vector<std::uint8_t> bits_to_bytes(std::span<const std::uint8_t> bits) {
    std::vector<std::uint8_t> bytes((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) bytes[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    return bytes;
}

iq::IqBuffer modulate(const BitStream& bits, const ModemParams& params) {
    params.validate();
    if (bits.empty()) throw Error(Errc::EmptyBits, "nothing to modulate");
    const int sps = params.samples_per_symbol;
    const std::size_t n = bits.size() * static_cast<std::size_t>(sps);

    std::vector<double> nrz(n);
    for (std::size_t k = 0; k < bits.size(); ++k) {
        if (bits.bits[k] > 1) throw Error(Errc::Malformed, "bit values must be 0 or 1");
        const double level = bits.bits[k] ? 1.0 : -1.0;
        std::fill_n(nrz.begin() + static_cast<std::ptrdiff_t>(k * static_cast<std::size_t>(sps)), sps, level);
    }

    std::vector<double> shaped;
    if (params.gaussian_bt) {
        const auto taps = gaussian_taps(*params.gaussian_bt, sps);
        const long half = static_cast<long>(taps.size() / 2);
        shaped.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (long k = -half; k <= half; ++k) {
                const long j = std::clamp(static_cast<long>(i) - k, 0L, static_cast<long>(n) - 1);
                acc += taps[static_cast<std::size_t>(k + half)] * nrz[static_cast<std::size_t>(j)];
            }
            shaped[i] = acc;
        }
    } else {
        shaped = std::move(nrz);
    }

    iq::IqBuffer out;
    out.sample_rate = params.sample_rate();
    out.origin = "modulate";
    out.samples.resize(n);
    const double step = kTwoPi * params.deviation() / out.sample_rate;
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        phase = std::remainder(phase + step * shaped[i], kTwoPi);
        out.samples[i] = iq::Sample(static_cast<float>(std::cos(phase)), static_cast<float>(std::sin(phase)));
    }
    return out;
}

void demodulate_fm(std::span<const iq::Sample> samples, double sample_rate, std::vector<float>& out) {
    if (samples.size() < 2) return;
    const double scale = sample_rate / kTwoPi;
    out.reserve(out.size() + samples.size() - 1);
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const auto a = samples[i - 1];
        const auto b = samples[i];
        // b * conj(a)
        const float re = b.real() * a.real() + b.imag() * a.imag();
        const float im = b.imag() * a.real() - b.real() * a.imag();
        if (re == 0.0f && im == 0.0f) {
            out.push_back(0.0f);
        } else {
            out.push_back(static_cast<float>(std::atan2(static_cast<double>(im), static_cast<double>(re)) * scale));
        }
    }
}

std::vector<float> demodulate_fm(const iq::IqBuffer& buf) {
    if (buf.size() < 2) throw Error(Errc::TooShort, "need at least two samples");
    std::vector<float> out;
    demodulate_fm(buf.samples, buf.sample_rate, out);
    return out;
}

BitStream recover_bits(std::span<const float> freq, const ModemParams& params, std::optional<double> start_hint) {
    params.validate();
    const int sps = params.samples_per_symbol;
    const double width = sps;
    const double n = static_cast<double>(freq.size());
    if (freq.size() < static_cast<std::size_t>(sps)) {
        throw Error(Errc::NoSymbols, "fewer samples than one symbol");
    }
    const PhaseIntegral phase(freq);

    double center = 0.0;
    if (start_hint) {
        if (!(*start_hint >= 0.0 && *start_hint < n)) throw Error(Errc::NoSymbols, "start hint outside input");
        center = *start_hint;
    } else {
        // Maximum-energy phase over half-sample candidates within one symbol.
        const std::size_t probe = std::clamp<std::size_t>(freq.size() / static_cast<std::size_t>(sps), 1, 128);
        double best = -1.0;
        for (int j = 0; j < 2 * sps; ++j) {
            const double tau = 0.5 * j;
            double energy = 0.0;
            for (std::size_t k = 0; k < probe; ++k) {
                const double c = tau + static_cast<double>(k) * width;
                if (c >= n) break;
                const double v = phase.window_mean(c, width);
                energy += v * v;
            }
            if (energy > best) {
                best = energy;
                center = tau;
            }
        }
    }

    std::vector<double> values;
    std::vector<std::size_t> offsets;
    const double gate = width / 4.0;
    while (center < n) {
        values.push_back(phase.window_mean(center, width));
        offsets.push_back(static_cast<std::size_t>(center));
        const double early = std::abs(phase.window_mean(center - gate, width));
        const double late = std::abs(phase.window_mean(center + gate, width));
        const double err = (late - early) / (late + early + 1e-12);
        center += width + kTimingLoopGain * width * err;
    }
    if (values.empty()) throw Error(Errc::NoSymbols, "no symbol centre inside input");

    // Decision-directed offset: distance of each symbol from its nearest
    // nominal level, median-filtered over a sliding window.
    const double dev = params.deviation();
    std::vector<double> residual(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        residual[k] = values[k] - (values[k] >= 0.0 ? dev : -dev);
    }
    const std::size_t half_window = kOffsetWindowSymbols / 2;
    BitStream out;
    out.bits.resize(values.size());
    out.start_offsets = std::move(offsets);
    std::vector<double> scratch;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const std::size_t lo = k >= half_window ? k - half_window : 0;
        const std::size_t hi = std::min(values.size(), k + half_window);
        scratch.assign(residual.begin() + static_cast<std::ptrdiff_t>(lo),
                       residual.begin() + static_cast<std::ptrdiff_t>(hi));
        const double offset = median_of(scratch);
        out.bits[k] = values[k] - offset > 0.0 ? 1 : 0;
    }
    return out;
}

std::vector<std::size_t> correlate_pattern(std::span<const std::uint8_t> bits, std::span<const std::uint8_t> pattern,
                                           int max_bit_errors) {
    if (pattern.size() < 8) throw Error(Errc::PatternTooShort, "pattern must be at least 8 bits");
    if (max_bit_errors < 0 || 4 * static_cast<std::size_t>(max_bit_errors) >= pattern.size()) {
        throw Error(Errc::BadThreshold, "max_bit_errors must be below a quarter of the pattern length");
    }
    std::vector<std::size_t> hits;
    if (bits.size() < pattern.size()) return hits;
    for (std::size_t i = 0; i + pattern.size() <= bits.size(); ++i) {
        int errors = 0;
        for (std::size_t j = 0; j < pattern.size() && errors <= max_bit_errors; ++j) {
            errors += (bits[i + j] != 0) != (pattern[j] != 0);
        }
        if (errors <= max_bit_errors) hits.push_back(i);
    }
    return hits;
}

std::vector<SyncHit> scan_for_sync(std::span<const float> freq, int samples_per_symbol,
                                   std::span<const std::uint8_t> pattern, int max_bit_errors) {
    if (pattern.size() < 8) throw Error(Errc::PatternTooShort, "pattern must be at least 8 bits");
    if (pattern.size() > 64) throw Error(Errc::BadParams, "scan_for_sync handles patterns up to 64 bits");
    if (samples_per_symbol < 2) throw Error(Errc::BadParams, "samples_per_symbol must be >= 2");
    const auto sps = static_cast<std::size_t>(samples_per_symbol);
    const std::size_t len = pattern.size();

    // Newest bit in the register LSB; pattern laid out the same way.
    std::uint64_t want = 0;
    for (std::size_t j = 0; j < len; ++j) want = (want << 1) | (pattern[j] ? 1u : 0u);
    const std::uint64_t mask = len == 64 ? ~0ull : ((1ull << len) - 1);

    std::vector<std::uint64_t> reg(sps, 0);
    std::vector<std::size_t> filled(sps, 0);
    std::vector<SyncHit> hits;

    // Sum over freq[n - sps + 1, n] covers [n - sps + 1, n + 1); its centre:
    const auto center_of = [sps](std::size_t n) {
        return static_cast<double>(n) + 1.0 - static_cast<double>(sps) / 2.0;
    };

    struct Candidate {
        std::size_t index;
        int errors;
    };
    std::vector<Candidate> run;
    const auto flush = [&] {
        if (run.empty()) return;
        int best = run.front().errors;
        for (const auto& c : run) best = std::min(best, c.errors);
        std::vector<std::size_t> tied;
        for (const auto& c : run) {
            if (c.errors == best) tied.push_back(c.index);
        }
        hits.push_back(SyncHit{center_of(tied[tied.size() / 2]), best});
        run.clear();
    };

    double sum = 0.0;
    for (std::size_t n = 0; n < freq.size(); ++n) {
        sum += freq[n];
        if (n >= sps) sum -= freq[n - sps];
        if (n + 1 < sps) continue;
        const std::size_t ph = n % sps;
        reg[ph] = (reg[ph] << 1) | (sum > 0.0 ? 1u : 0u);
        if (filled[ph] < len) {
            ++filled[ph];
            if (filled[ph] < len) continue;
        }
        const int errors = std::popcount((reg[ph] ^ want) & mask);
        if (errors > max_bit_errors) continue;
        if (!run.empty() && n - run.front().index >= sps) flush();
        run.push_back(Candidate{n, errors});
    }
    flush();
    return hits;
}

}  // namespace sdrlab::modem
