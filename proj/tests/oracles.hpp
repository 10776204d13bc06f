#pragma once
// Reference models used to produce expected values in the tests.  They are
// deliberately slow and literal: one register cell per array element, one
// bit per step, and nothing here calls into the library.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

namespace oracle {

// BLE data whitening: 7 cells, cell 0 preset to 1, cells 1..6 loaded with
// channel index bits 5..0.  Output from cell 6; feedback into cell 0 and
// into the input of cell 4 (x^7 + x^4 + 1).
inline std::vector<std::uint8_t> whitening_bits(std::size_t n_bits, int channel) {
    std::array<int, 7> x{};
    x[0] = 1;
    for (int i = 1; i <= 6; ++i) x[i] = (channel >> (6 - i)) & 1;
    std::vector<std::uint8_t> out;
    for (std::size_t k = 0; k < n_bits; ++k) {
        const int o = x[6];
        out.push_back(static_cast<std::uint8_t>(o));
        std::array<int, 7> y{};
        y[0] = o;
        y[1] = x[0];
        y[2] = x[1];
        y[3] = x[2];
        y[4] = x[3] ^ o;
        y[5] = x[4];
        y[6] = x[5];
        x = y;
    }
    return out;
}

inline std::vector<std::uint8_t> whiten_bytes(const std::vector<std::uint8_t>& data, int channel) {
    const auto ks = whitening_bits(data.size() * 8, channel);
    std::vector<std::uint8_t> out(data.size(), 0);
    for (std::size_t i = 0; i < data.size() * 8; ++i) {
        const int bit = ((data[i / 8] >> (i % 8)) & 1) ^ ks[i];
        out[i / 8] |= static_cast<std::uint8_t>(bit << (i % 8));
    }
    return out;
}

// BLE CRC-24: 24 cells, cell 0 gets the LSB of the preset.  Each data bit
// (LSB first) is XORed with cell 23; the result enters cell 0 and is XORed
// into the inputs of cells 1, 3, 4, 6, 9 and 10.  Cell 23 is sent first.
inline std::array<std::uint8_t, 3> ble_crc24(const std::vector<std::uint8_t>& pdu, std::uint32_t preset = 0x555555) {
    std::array<int, 24> x{};
    for (int i = 0; i < 24; ++i) x[i] = (preset >> i) & 1;
    for (std::size_t i = 0; i < pdu.size() * 8; ++i) {
        const int fb = ((pdu[i / 8] >> (i % 8)) & 1) ^ x[23];
        std::array<int, 24> y{};
        y[0] = fb;
        for (int j = 1; j < 24; ++j) {
            const bool tap = j == 1 || j == 3 || j == 4 || j == 6 || j == 9 || j == 10;
            y[j] = x[j - 1] ^ (tap ? fb : 0);
        }
        x = y;
    }
    std::array<std::uint8_t, 3> out{};
    for (int k = 0; k < 24; ++k) out[k / 8] |= static_cast<std::uint8_t>(x[23 - k] << (k % 8));
    return out;
}

// 802.15.4 FCS: x^16 + x^12 + x^5 + 1, 16 cells, data LSB first, cell 15
// sent first.  Returned as the little-endian value of the two FCS bytes.
inline std::uint16_t fcs16(const std::vector<std::uint8_t>& data, std::uint16_t preset = 0) {
    std::array<int, 16> r{};
    // The preset is given in the same transmitted-bit order as the result.
    for (int k = 0; k < 16; ++k) r[15 - k] = (preset >> k) & 1;
    for (std::size_t i = 0; i < data.size() * 8; ++i) {
        const int fb = ((data[i / 8] >> (i % 8)) & 1) ^ r[15];
        std::array<int, 16> y{};
        y[0] = fb;
        for (int j = 1; j < 16; ++j) y[j] = r[j - 1] ^ ((j == 5 || j == 12) ? fb : 0);
        r = y;
    }
    std::uint16_t v = 0;
    for (int k = 0; k < 16; ++k) v |= static_cast<std::uint16_t>(r[15 - k] << k);
    return v;
}

// Frequency of the strongest spectral line, by direct DTFT evaluation on a
// coarse grid followed by golden-section refinement.
inline double peak_frequency(const std::vector<std::complex<float>>& x, double fs, double lo, double hi,
                             int grid = 2048) {
    const auto mag = [&](double f) {
        std::complex<double> acc = 0.0;
        const double w = -2.0 * std::numbers::pi * f / fs;
        for (std::size_t n = 0; n < x.size(); ++n) {
            const double ph = w * static_cast<double>(n);
            acc += std::complex<double>(x[n]) * std::complex<double>(std::cos(ph), std::sin(ph));
        }
        return std::abs(acc);
    };
    double best_f = lo;
    double best_m = -1.0;
    const double step = (hi - lo) / grid;
    for (int i = 0; i <= grid; ++i) {
        const double f = lo + step * i;
        const double m = mag(f);
        if (m > best_m) {
            best_m = m;
            best_f = f;
        }
    }
    double a = best_f - step;
    double b = best_f + step;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 60; ++it) {
        const double c = b - g * (b - a);
        const double d = a + g * (b - a);
        if (mag(c) > mag(d)) {
            b = d;
        } else {
            a = c;
        }
    }
    return 0.5 * (a + b);
}

// Band power by direct DTFT on a uniform grid inside [lo, hi].
inline double band_power(const std::vector<std::complex<float>>& x, double fs, double lo, double hi, int points = 256) {
    double total = 0.0;
    for (int i = 0; i < points; ++i) {
        const double f = lo + (hi - lo) * (i + 0.5) / points;
        std::complex<double> acc = 0.0;
        const double w = -2.0 * std::numbers::pi * f / fs;
        for (std::size_t n = 0; n < x.size(); ++n) {
            const double ph = w * static_cast<double>(n);
            acc += std::complex<double>(x[n]) * std::complex<double>(std::cos(ph), std::sin(ph));
        }
        total += std::norm(acc);
    }
    return total;
}

inline double binomial_sd(double n, double p) {
    return std::sqrt(n * p * (1.0 - p));
}

}  // namespace oracle
