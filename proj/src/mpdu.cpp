#include "sdrlab/mpdu.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>

#include "sdrlab/ble_link.hpp"
#include "sdrlab/burst.hpp"
#include "sdrlab/error.hpp"

namespace sdrlab::mac {

namespace {

constexpr std::uint16_t kPolyReflected = 0x8408;

constexpr std::array<std::uint16_t, 256> make_table() {
    std::array<std::uint16_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t r = i;
        for (int b = 0; b < 8; ++b) r = (r & 1u) ? (r >> 1) ^ kPolyReflected : r >> 1;
        t[i] = static_cast<std::uint16_t>(r);
    }
    return t;
}

constexpr auto kTable = make_table();

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}

std::vector<std::uint8_t> sync_bytes() {
    return {0xAA, static_cast<std::uint8_t>(kSyncWord >> 24), static_cast<std::uint8_t>(kSyncWord >> 16),
            static_cast<std::uint8_t>(kSyncWord >> 8), static_cast<std::uint8_t>(kSyncWord)};
}

}  // namespace

std::uint16_t fcs16(std::span<const std::uint8_t> bytes, std::uint16_t init) {
    std::uint16_t reg = init;
    for (auto b : bytes) reg = static_cast<std::uint16_t>((reg >> 8) ^ kTable[(reg ^ b) & 0xFF]);
    return reg;
}

std::vector<std::uint8_t> build_mpdu(const Mpdu& m, std::uint16_t fcs_init) {
    if (m.payload.size() > kMaxPayloadBytes) {
        throw Error(Errc::PayloadTooLong, std::to_string(m.payload.size()) + " payload bytes (max 104)");
    }
    std::vector<std::uint8_t> out;
    out.reserve(m.size());
    put16(out, m.frame_control);
    out.push_back(m.seq);
    put16(out, m.dest_pan);
    put16(out, m.dest_addr);
    put16(out, m.src_addr);
    out.insert(out.end(), m.payload.begin(), m.payload.end());
    put16(out, fcs16(out, fcs_init));
    return out;
}

Mpdu parse_mpdu(std::span<const std::uint8_t> bytes, std::uint16_t fcs_init) {
    if (bytes.size() < kHeaderBytes + kFcsBytes) {
        throw Error(Errc::TooShort, std::to_string(bytes.size()) + " bytes, an MPDU needs at least 11");
    }
    Mpdu m;
    m.frame_control = get16(bytes, 0);
    m.seq = bytes[2];
    m.dest_pan = get16(bytes, 3);
    m.dest_addr = get16(bytes, 5);
    m.src_addr = get16(bytes, 7);
    const std::size_t body = bytes.size() - kFcsBytes;
    m.payload.assign(bytes.begin() + kHeaderBytes, bytes.begin() + static_cast<std::ptrdiff_t>(body));
    m.fcs_ok = fcs16(bytes.first(body), fcs_init) == get16(bytes, body);
    return m;
}

void write_hex_lines(std::ostream& out, std::span<const std::vector<std::uint8_t>> frames) {
    for (const auto& f : frames) out << ble::to_hex(f) << '\n';
}

std::vector<std::vector<std::uint8_t>> read_hex_lines(std::istream& in) {
    std::vector<std::vector<std::uint8_t>> out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        out.push_back(ble::from_hex(line));
    }
    return out;
}

modem::BitStream build_phy_frame(std::span<const std::uint8_t> mpdu) {
    if (mpdu.size() > kHeaderBytes + kMaxPayloadBytes + kFcsBytes) {
        throw Error(Errc::PayloadTooLong, "MPDU does not fit the length byte");
    }
    std::vector<std::uint8_t> bytes(kPreambleBytes - 1, 0xAA);
    const auto sync = sync_bytes();
    bytes.insert(bytes.end(), sync.begin(), sync.end());
    bytes.push_back(static_cast<std::uint8_t>(mpdu.size()));
    bytes.insert(bytes.end(), mpdu.begin(), mpdu.end());
    modem::BitStream out;
    out.bits = modem::bytes_to_bits(bytes);
    return out;
}

std::vector<std::uint8_t> phy_sync_bits() {
    return modem::bytes_to_bits(sync_bytes());
}

std::vector<ReceivedFrame> receive_frames(const iq::IqBuffer& buf, const modem::ModemParams& params,
                                          int max_sync_errors, std::uint16_t fcs_init) {
    std::vector<ReceivedFrame> out;
    if (buf.size() < 2) return out;
    const auto freq = modem::demodulate_fm(buf);
    const auto sync = phy_sync_bits();
    const std::size_t max_after = (1 + kHeaderBytes + kMaxPayloadBytes + kFcsBytes) * 8;
    const double sps = params.samples_per_symbol;

    double busy_until = -1.0;
    for (const auto& hit : modem::scan_for_sync(freq, params.samples_per_symbol, sync, max_sync_errors)) {
        if (hit.last_symbol_center < busy_until) continue;
        const auto burst = modem::recover_burst(freq, params, hit, sync, max_sync_errors, max_after);
        if (!burst) continue;
        const auto& bits = burst->bits.bits;
        const auto& offs = burst->bits.start_offsets;

        ReceivedFrame f;
        std::size_t used = bits.size();
        if (bits.size() < sync.size() + 8) {
            f.error = "truncated before length byte";
        } else {
            const auto len = modem::bits_to_bytes(std::span(bits).subspan(sync.size(), 8))[0];
            const std::size_t need = sync.size() + 8 + static_cast<std::size_t>(len) * 8;
            if (len < kHeaderBytes + kFcsBytes || len > kHeaderBytes + kMaxPayloadBytes + kFcsBytes) {
                f.error = "length byte " + std::to_string(len) + " outside 11..115";
                used = sync.size() + 8;
            } else if (bits.size() < need) {
                f.error = "truncated frame";
            } else {
                used = need;
                const auto bytes = modem::bits_to_bytes(std::span(bits).subspan(sync.size() + 8, len * 8u));
                f.mpdu = parse_mpdu(bytes, fcs_init);
            }
        }
        f.air_bits.assign(bits.begin(), bits.begin() + static_cast<std::ptrdiff_t>(used));
        f.first_sample = static_cast<std::size_t>(std::max(0.0, std::round(offs.front() - sps / 2.0 + 1.0)));
        f.end_sample = std::min(buf.size(), offs[used - 1] + static_cast<std::size_t>(sps / 2.0 + 1.0));
        busy_until = static_cast<double>(offs[used - 1]);
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace sdrlab::mac
