#include "sdrlab/ble_link.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "sdrlab/error.hpp"

namespace sdrlab::ble {

namespace {

// Reflected x^24 + x^10 + x^9 + x^6 + x^4 + x^3 + x + 1.
constexpr std::uint32_t kCrcPolyReflected = 0xDA6000;

constexpr std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t r = i;
        for (int b = 0; b < 8; ++b) r = (r & 1u) ? (r >> 1) ^ kCrcPolyReflected : r >> 1;
        table[i] = r;
    }
    return table;
}

constexpr auto kCrcTable = make_crc_table();

constexpr std::uint32_t reverse24(std::uint32_t v) {
    std::uint32_t r = 0;
    for (int i = 0; i < 24; ++i) r |= ((v >> i) & 1u) << (23 - i);
    return r;
}

void check_whitening_channel(int channel_index) {
    if (channel_index < 0 || channel_index > 39) {
        throw Error(Errc::BadChannel, "channel index " + std::to_string(channel_index) + " outside 0..39");
    }
}

}  // namespace

std::string pdu_type_name(std::uint8_t type) {
    switch (type) {
        case ADV_IND: return "ADV_IND";
        case ADV_DIRECT_IND: return "ADV_DIRECT_IND";
        case ADV_NONCONN_IND: return "ADV_NONCONN_IND";
        case SCAN_REQ: return "SCAN_REQ";
        case SCAN_RSP: return "SCAN_RSP";
        case CONNECT_REQ: return "CONNECT_REQ";
        case ADV_SCAN_IND: return "ADV_SCAN_IND";
        default: return "t" + std::to_string(type);
    }
}

double channel_to_freq(int index) {
    switch (index) {
        case 37: return 2.402e9;
        case 38: return 2.426e9;
        case 39: return 2.480e9;
        default:
            throw Error(Errc::BadChannel, "channel " + std::to_string(index) + " is not an advertising channel");
    }
}

std::vector<std::uint8_t> whitening_keystream(std::size_t n_bytes, int channel_index) {
    check_whitening_channel(channel_index);
    // Register bit 6 holds LFSR position 0 (preset to 1), bits 5..0 the
    // channel index; the output tap is bit 0.
    std::uint8_t lfsr = static_cast<std::uint8_t>((channel_index & 0x3F) | 0x40);
    std::vector<std::uint8_t> stream(n_bytes, 0);
    for (auto& byte : stream) {
        for (int bit = 0; bit < 8; ++bit) {
            if (lfsr & 0x01) {
                lfsr ^= 0x88;
                byte |= static_cast<std::uint8_t>(1u << bit);
            }
            lfsr >>= 1;
        }
    }
    return stream;
}

std::vector<std::uint8_t> whiten(std::span<const std::uint8_t> data, int channel_index) {
    auto out = whitening_keystream(data.size(), channel_index);
    for (std::size_t i = 0; i < data.size(); ++i) out[i] ^= data[i];
    return out;
}

std::array<std::uint8_t, 3> crc24(std::span<const std::uint8_t> pdu_bytes, std::uint32_t init) {
    if (pdu_bytes.size() < 2 || pdu_bytes.size() > 2 + kMaxPayloadBytes) {
        throw Error(Errc::LengthOutOfRange, "PDU length " + std::to_string(pdu_bytes.size()) + " outside 2..39");
    }
    std::uint32_t reg = reverse24(init & 0xFFFFFF);
    for (auto b : pdu_bytes) reg = (reg >> 8) ^ kCrcTable[(reg ^ b) & 0xFF];
    return {static_cast<std::uint8_t>(reg), static_cast<std::uint8_t>(reg >> 8), static_cast<std::uint8_t>(reg >> 16)};
}

std::vector<std::uint8_t> serialize_pdu(const AdvPdu& pdu) {
    if (pdu.adv_data.size() > kMaxAdvDataBytes) {
        throw Error(Errc::PayloadTooLong, std::to_string(pdu.adv_data.size()) + " bytes of AdvData (max 31)");
    }
    if (pdu.pdu_type > 0x0F) throw Error(Errc::Malformed, "PDU type is a 4-bit field");
    std::vector<std::uint8_t> out;
    out.reserve(2 + pdu.payload_len());
    out.push_back(static_cast<std::uint8_t>(pdu.pdu_type | (pdu.tx_add ? 0x40 : 0) | (pdu.rx_add ? 0x80 : 0)));
    out.push_back(static_cast<std::uint8_t>(pdu.payload_len()));
    out.insert(out.end(), pdu.adv_a.begin(), pdu.adv_a.end());
    out.insert(out.end(), pdu.adv_data.begin(), pdu.adv_data.end());
    return out;
}

ParsedAdv parse_adv_pdu(std::span<const std::uint8_t> dewhitened) {
    if (dewhitened.size() < 2 + 3) throw Error(Errc::TooShort, "need header and CRC");
    const std::uint8_t h0 = dewhitened[0];
    const std::size_t len = dewhitened[1] & 0x3F;
    if (len > kMaxPayloadBytes) throw Error(Errc::Malformed, "payload length " + std::to_string(len) + " > 37");
    if (2 + len + 3 > dewhitened.size()) {
        throw Error(Errc::LengthMismatch, "header declares " + std::to_string(len) + " payload bytes, only " +
                                              std::to_string(dewhitened.size() - 2) + " remain with CRC");
    }
    if (len < kAdvAddressBytes) throw Error(Errc::TooShort, "payload shorter than the advertiser address");

    ParsedAdv out;
    out.pdu.pdu_type = h0 & 0x0F;
    out.pdu.tx_add = (h0 >> 6) & 1;
    out.pdu.rx_add = (h0 >> 7) & 1;
    std::copy_n(dewhitened.begin() + 2, kAdvAddressBytes, out.pdu.adv_a.begin());
    out.pdu.adv_data.assign(dewhitened.begin() + 2 + kAdvAddressBytes, dewhitened.begin() + 2 + static_cast<std::ptrdiff_t>(len));
    std::copy_n(dewhitened.begin() + 2 + static_cast<std::ptrdiff_t>(len), 3, out.crc.begin());
    out.crc_ok = crc24(dewhitened.first(2 + len)) == out.crc;
    return out;
}

std::vector<std::uint8_t> serialize_adv_packet(const AdvPdu& pdu, const AdvChannel& channel) {
    auto body = serialize_pdu(pdu);
    const auto crc = crc24(body);
    body.insert(body.end(), crc.begin(), crc.end());
    const auto whitened = whiten(body, channel.index);

    std::vector<std::uint8_t> out;
    out.reserve(5 + whitened.size());
    out.push_back(kAdvPreamble);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(kAdvAccessAddress >> (8 * i)));
    out.insert(out.end(), whitened.begin(), whitened.end());
    return out;
}

modem::BitStream build_adv_packet(const AdvPdu& pdu, const AdvChannel& channel) {
    channel_to_freq(channel.index);
    modem::BitStream out;
    out.bits = modem::bytes_to_bits(serialize_adv_packet(pdu, channel));
    return out;
}

std::vector<std::uint8_t> adv_sync_bits() {
    std::vector<std::uint8_t> bytes{kAdvPreamble};
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(kAdvAccessAddress >> (8 * i)));
    return modem::bytes_to_bits(bytes);
}

std::string format_log_line(const LogContext& ctx, const ParsedAdv& adv) {
    char head[160];
    std::snprintf(head, sizeof head, "%lluus Pkt%llu Ch%d AA:%08x ADV_PDU_t%u:%s T%d R%d PloadL%zu ",
                  static_cast<unsigned long long>(ctx.time_us), static_cast<unsigned long long>(ctx.packet_number),
                  ctx.channel, ctx.access_address, static_cast<unsigned>(adv.pdu.pdu_type),
                  pdu_type_name(adv.pdu.pdu_type).c_str(), adv.pdu.tx_add ? 1 : 0, adv.pdu.rx_add ? 1 : 0,
                  adv.pdu.payload_len());
    return std::string(head) + "AdvA:" + to_hex(adv.pdu.adv_a) + " Data:" + to_hex(adv.pdu.adv_data) + " CRC" +
           (adv.crc_ok ? "0" : "1");
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0F]);
    }
    return out;
}

std::vector<std::uint8_t> from_hex(const std::string& text) {
    std::string digits;
    for (char c : text) {
        if (c == ':' || c == ' ' || c == '-') continue;
        if (!std::isxdigit(static_cast<unsigned char>(c))) {
            throw Error(Errc::BadSpec, std::string("non-hex character '") + c + "'");
        }
        digits.push_back(c);
    }
    if (digits.size() % 2 != 0) throw Error(Errc::BadSpec, "odd number of hex digits");
    std::vector<std::uint8_t> out(digits.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(std::stoul(digits.substr(2 * i, 2), nullptr, 16));
    }
    return out;
}

}  // namespace sdrlab::ble
