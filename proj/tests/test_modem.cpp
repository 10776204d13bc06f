#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "sdrlab/error.hpp"
#include "sdrlab/modem.hpp"
#include "sdrlab/replay_lab.hpp"
#include "support.hpp"

using namespace sdrlab;
using modem::BitStream;
using modem::ModemParams;

namespace {

ModemParams hard_fsk(double rate, double h, int sps) {
    return ModemParams{rate, h, sps, std::nullopt};
}

BitStream stream_of(std::vector<std::uint8_t> bits) {
    BitStream s;
    s.bits = std::move(bits);
    return s;
}

std::size_t bit_errors(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    std::size_t e = a.size() > b.size() ? a.size() - b.size() : b.size() - a.size();
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) e += a[i] != b[i];
    return e;
}

std::vector<std::uint8_t> loopback(const std::vector<std::uint8_t>& bits, const ModemParams& p,
                                   const lab::ChannelModel& ch = {}) {
    const auto rx = lab::apply_channel(modem::modulate(stream_of(bits), p), ch);
    return modem::recover_bits(modem::demodulate_fm(rx), p).bits;
}

double ber_at(double ebn0_db, std::size_t n_bits, std::uint64_t seed) {
    const auto p = ModemParams::ble();
    std::mt19937_64 rng(seed);
    const auto bits = support::random_bits(rng, n_bits);
    lab::ChannelModel ch;
    ch.snr_db = ebn0_db - 10.0 * std::log10(p.samples_per_symbol);
    ch.seed = seed;
    return static_cast<double>(bit_errors(loopback(bits, p, ch), bits)) / static_cast<double>(n_bits);
}

}  // namespace

TEST_CASE("presets") {
    const auto ble = ModemParams::ble();
    CHECK(ble.symbol_rate == 1e6);
    CHECK(ble.deviation() == 250e3);
    CHECK(ble.sample_rate() == 4e6);
    CHECK(ble.gaussian_bt == 0.5);
    const auto wixel = ModemParams::wixel();
    CHECK(wixel.symbol_rate == 250e3);
    CHECK(wixel.deviation() == doctest::Approx(127e3));
    CHECK_FALSE(wixel.gaussian_bt);
    CHECK(ModemParams::wixel(350e3).deviation() == doctest::Approx(127e3));
    CHECK_THROWS_AS(ModemParams::wixel(400e3), Error);
    CHECK_THROWS_AS((ModemParams{1e6, 0.5, 1, std::nullopt}.validate()), Error);
    CHECK_THROWS_AS((ModemParams{1e6, 0.0, 4, std::nullopt}.validate()), Error);
}

TEST_CASE("bit packing is LSB first") {
    const std::vector<std::uint8_t> bytes{0xD6, 0x01};
    const auto bits = modem::bytes_to_bits(bytes);
    CHECK(bits == std::vector<std::uint8_t>{0, 1, 1, 0, 1, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0});
    CHECK(modem::bits_to_bytes(bits) == bytes);
}

TEST_CASE("all-ones hard FSK is a tone at +deviation") {
    const auto p = hard_fsk(1e6, 0.5, 4);
    const auto buf = modem::modulate(stream_of(std::vector<std::uint8_t>(100, 1)), p);
    CHECK(buf.size() == 400);
    CHECK(buf.sample_rate == 4e6);
    const double f = oracle::peak_frequency(buf.samples, 4e6, -1e6, 1e6, 400);
    CHECK(std::abs(f - 250e3) <= 1e3);
}

TEST_CASE("modulated output has constant envelope") {
    std::mt19937_64 rng(3);
    for (const auto& p : {ModemParams::ble(), ModemParams::wixel(), hard_fsk(500e3, 0.7, 8)}) {
        const auto buf = modem::modulate(stream_of(support::random_bits(rng, 300)), p);
        CHECK(buf.size() == 300u * static_cast<unsigned>(p.samples_per_symbol));
        double worst = 0.0;
        for (auto s : buf.samples) worst = std::max(worst, std::abs(std::abs(std::complex<double>(s)) - 1.0));
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("alternating bits give a symmetric spectrum") {
    std::vector<std::uint8_t> bits;
    for (int i = 0; i < 256; ++i) bits.push_back(static_cast<std::uint8_t>(i & 1));
    for (const auto& p : {ModemParams::ble(), hard_fsk(1e6, 0.5, 4)}) {
        const auto buf = modem::modulate(stream_of(bits), p);
        const double fs = p.sample_rate();
        const double pos = oracle::band_power(buf.samples, fs, 0.0, fs / 2, 200);
        const double neg = oracle::band_power(buf.samples, fs, -fs / 2, 0.0, 200);
        CHECK(std::abs(10.0 * std::log10(pos / neg)) < 1.0);
    }
}

TEST_CASE("single hard-FSK symbol advances phase in equal steps") {
    const auto p = hard_fsk(1e6, 0.5, 4);
    const auto buf = modem::modulate(stream_of({1}), p);
    REQUIRE(buf.size() == 4);
    const double step = 2.0 * std::numbers::pi * p.deviation() / p.sample_rate();
    double prev = 0.0;
    for (std::size_t n = 0; n < 4; ++n) {
        const double ph = std::arg(std::complex<double>(buf.samples[n]));
        CHECK(ph - prev == doctest::Approx(step).epsilon(1e-6));
        prev = ph;
    }
}

TEST_CASE("discriminator measures a tone") {
    iq::IqBuffer buf;
    buf.sample_rate = 4e6;
    for (int n = 0; n < 1000; ++n) {
        const double ph = 2.0 * std::numbers::pi * 100e3 * n / 4e6;
        buf.samples.emplace_back(static_cast<float>(std::cos(ph)), static_cast<float>(std::sin(ph)));
    }
    const auto f = modem::demodulate_fm(buf);
    REQUIRE(f.size() == 999);
    for (float v : f) REQUIRE(std::abs(v - 100e3) <= 1.0);

    auto conj = buf;
    for (auto& s : conj.samples) s = std::conj(s);
    const auto g = modem::demodulate_fm(conj);
    for (std::size_t i = 0; i < f.size(); ++i) REQUIRE(g[i] == doctest::Approx(-f[i]));
}

TEST_CASE("discriminator degenerate inputs") {
    iq::IqBuffer zeros;
    zeros.samples.assign(10, iq::Sample{});
    for (float v : modem::demodulate_fm(zeros)) CHECK(v == 0.0f);
    iq::IqBuffer one;
    one.samples = {{1.0f, 0.0f}};
    CHECK_THROWS_AS(modem::demodulate_fm(one), Error);
}

TEST_CASE("GFSK settles to the nominal deviation") {
    const auto p = ModemParams::ble();
    for (std::uint8_t bit : {0, 1}) {
        const auto f = modem::demodulate_fm(modem::modulate(stream_of(std::vector<std::uint8_t>(40, bit)), p));
        const double want = bit ? p.deviation() : -p.deviation();
        for (std::size_t i = 20; i + 20 < f.size(); ++i) REQUIRE(std::abs(f[i] - want) <= 0.01 * p.deviation());
    }
}

TEST_CASE("noiseless loopback is exact across parameters") {
    std::mt19937_64 rng(7);
    const std::vector<ModemParams> grid = {
        ModemParams::ble(),       ModemParams::wixel(),        ModemParams::wixel(350e3),
        hard_fsk(1e6, 0.5, 2),    hard_fsk(1e6, 0.5, 4),       hard_fsk(250e3, 1.0, 8),
        ModemParams{1e6, 0.5, 8, 0.5}, ModemParams{2e6, 0.5, 4, 0.3}, ModemParams{1e6, 0.32, 5, 0.5},
    };
    for (const auto& p : grid) {
        CAPTURE(p.describe());
        const auto bits = support::random_bits(rng, 512);
        const auto got = loopback(bits, p);
        CHECK(bit_errors(got, bits) == 0);
    }
}

TEST_CASE("recover_bits reports symbol centres") {
    std::mt19937_64 rng(8);
    const auto p = hard_fsk(1e6, 0.5, 4);
    const auto bits = support::random_bits(rng, 200);
    const auto rec = modem::recover_bits(modem::demodulate_fm(modem::modulate(stream_of(bits), p)), p);
    REQUIRE(rec.start_offsets.size() == rec.bits.size());
    for (std::size_t i = 1; i < rec.start_offsets.size(); ++i) CHECK(rec.start_offsets[i] > rec.start_offsets[i - 1]);
    CHECK(rec.start_offsets[10] == 41);
}

TEST_CASE("loopback tolerates a 10 kHz carrier offset") {
    std::mt19937_64 rng(9);
    const auto p = ModemParams::ble();
    const auto bits = support::random_bits(rng, 10000);
    lab::ChannelModel ch;
    ch.carrier_offset = 10e3;
    CHECK(bit_errors(loopback(bits, p, ch), bits) == 0);
}

TEST_CASE("loopback tolerates transmitter clock skew") {
    std::mt19937_64 rng(10);
    const auto p = ModemParams::ble();
    const auto bits = support::random_bits(rng, 4000);
    lab::ChannelModel ch;
    ch.timing_skew_ppm = 50.0;
    CHECK(bit_errors(loopback(bits, p, ch), bits) == 0);
}

TEST_CASE("bit error rate at 20 dB Eb/N0") {
    const double ber = ber_at(20.0, 100000, 21);
    CHECK(ber < 1e-4);
}

TEST_CASE("bit error rate falls with Eb/N0") {
    double prev = 1.0;
    for (double ebn0 : {5.0, 10.0, 15.0, 20.0}) {
        const double ber = ber_at(ebn0, 20000, 22);
        CAPTURE(ebn0);
        CHECK(ber <= prev);
        prev = ber;
    }
}

TEST_CASE("recover_bits needs a symbol") {
    const std::vector<float> two{1.0f, 2.0f};
    CHECK_THROWS_AS(modem::recover_bits(two, ModemParams::ble()), Error);
}

TEST_CASE("modulate rejects empty input") {
    try {
        modem::modulate(BitStream{}, ModemParams::ble());
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptyBits);
    }
}

TEST_CASE("correlate_pattern finds a planted word") {
    std::mt19937_64 rng(13);
    auto bits = support::random_bits(rng, 1000);
    const auto pattern = modem::bytes_to_bits(std::vector<std::uint8_t>{0xD6, 0xBE, 0x89, 0x8E});
    std::copy(pattern.begin(), pattern.end(), bits.begin() + 100);
    const auto hits = modem::correlate_pattern(bits, pattern, 0);
    CHECK(hits == std::vector<std::size_t>{100});

    bits[100 + 5] ^= 1;
    CHECK(modem::correlate_pattern(bits, pattern, 0).empty());
    const auto loose = modem::correlate_pattern(bits, pattern, 1);
    CHECK(std::find(loose.begin(), loose.end(), 100u) != loose.end());

    CHECK(modem::correlate_pattern(std::vector<std::uint8_t>{}, pattern, 0).empty());
}

TEST_CASE("correlate_pattern equals naive search at zero tolerance") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 50; ++trial) {
        const auto bits = support::random_bits(rng, 300);
        const auto pattern = support::random_bits(rng, 8 + trial % 5);
        std::vector<std::size_t> naive;
        for (std::size_t i = 0; i + pattern.size() <= bits.size(); ++i) {
            if (std::equal(pattern.begin(), pattern.end(), bits.begin() + static_cast<std::ptrdiff_t>(i))) {
                naive.push_back(i);
            }
        }
        CHECK(modem::correlate_pattern(bits, pattern, 0) == naive);
    }
}

TEST_CASE("correlate_pattern argument checks") {
    const std::vector<std::uint8_t> bits(64, 0);
    const std::vector<std::uint8_t> shortp(7, 1);
    const std::vector<std::uint8_t> p16(16, 1);
    try {
        modem::correlate_pattern(bits, shortp, 0);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::PatternTooShort);
    }
    try {
        modem::correlate_pattern(bits, p16, 4);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::BadThreshold);
    }
}

TEST_CASE("scan_for_sync locates a planted sync word") {
    std::mt19937_64 rng(15);
    const auto p = ModemParams::ble();
    auto bits = support::random_bits(rng, 400);
    const auto sync = modem::bytes_to_bits(std::vector<std::uint8_t>{0xAA, 0xD6, 0xBE, 0x89, 0x8E});
    std::copy(sync.begin(), sync.end(), bits.begin() + 150);
    const auto freq = modem::demodulate_fm(modem::modulate(stream_of(bits), p));
    const auto hits = modem::scan_for_sync(freq, p.samples_per_symbol, sync, 0);
    REQUIRE(hits.size() >= 1);
    bool found = false;
    for (const auto& h : hits) {
        // Last sync bit is symbol 189, centred near sample 189*4 + 1.
        if (std::abs(h.last_symbol_center - (189 * 4 + 1)) <= 2.0) found = true;
    }
    CHECK(found);
}
