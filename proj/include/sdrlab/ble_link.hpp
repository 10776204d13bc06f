#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sdrlab/modem.hpp"

namespace sdrlab::ble {

inline constexpr std::uint32_t kAdvAccessAddress = 0x8E89BED6;
inline constexpr std::uint32_t kAdvCrcInit = 0x555555;
inline constexpr std::uint8_t kAdvPreamble = 0xAA;
inline constexpr std::size_t kMaxPacketBytes = 47;
inline constexpr std::size_t kMaxPayloadBytes = 37;
inline constexpr std::size_t kMaxAdvDataBytes = 31;
inline constexpr std::size_t kAdvAddressBytes = 6;

enum PduType : std::uint8_t {
    ADV_IND = 0,
    ADV_DIRECT_IND = 1,
    ADV_NONCONN_IND = 2,
    SCAN_REQ = 3,
    SCAN_RSP = 4,
    CONNECT_REQ = 5,
    ADV_SCAN_IND = 6,
};

/// "ADV_NONCONN_IND" etc.; reserved codes render as "t<N>".
std::string pdu_type_name(std::uint8_t type);

/// Advertising channels only (37, 38, 39).
double channel_to_freq(int index);

struct AdvChannel {
    int index = 37;
    double center_freq = 2.402e9;

    static AdvChannel from_index(int index) { return AdvChannel{index, channel_to_freq(index)}; }
};

/// Advertising PDU.  adv_a is kept in transmission order (the order a
/// sniffer prints it), not the reversed human-readable MAC form.
struct AdvPdu {
    std::uint8_t pdu_type = ADV_NONCONN_IND;
    bool tx_add = false;
    bool rx_add = false;
    std::array<std::uint8_t, kAdvAddressBytes> adv_a{};
    std::vector<std::uint8_t> adv_data;

    std::size_t payload_len() const noexcept { return kAdvAddressBytes + adv_data.size(); }
    bool operator==(const AdvPdu&) const = default;
};

/// Result of parsing a dewhitened PDU + CRC.
struct ParsedAdv {
    AdvPdu pdu;
    std::array<std::uint8_t, 3> crc{};
    bool crc_ok = false;
};

/// XOR with the channel-seeded x^7 + x^4 + 1 whitening sequence, LSB first.
/// Involutive.  channel_index 0..39.
std::vector<std::uint8_t> whiten(std::span<const std::uint8_t> data, int channel_index);
std::vector<std::uint8_t> whitening_keystream(std::size_t n_bytes, int channel_index);

/// CRC-24 over a PDU (2..39 bytes), returned in transmission order.
std::array<std::uint8_t, 3> crc24(std::span<const std::uint8_t> pdu_bytes, std::uint32_t init = kAdvCrcInit);

/// Header + payload bytes; throws PayloadTooLong past 31 bytes of AdvData.
std::vector<std::uint8_t> serialize_pdu(const AdvPdu& pdu);

/// Input: PDU bytes followed by the three CRC bytes, already dewhitened.
ParsedAdv parse_adv_pdu(std::span<const std::uint8_t> dewhitened);

/// On-air bytes: preamble, access address, whitened PDU and CRC.
std::vector<std::uint8_t> serialize_adv_packet(const AdvPdu& pdu, const AdvChannel& channel);
/// serialize_adv_packet expanded LSB-first per byte.
modem::BitStream build_adv_packet(const AdvPdu& pdu, const AdvChannel& channel);

/// Preamble followed by the advertising access address, as transmitted.
std::vector<std::uint8_t> adv_sync_bits();

struct LogContext {
    std::uint64_t time_us = 0;
    std::uint64_t packet_number = 0;
    int channel = 37;
    std::uint32_t access_address = kAdvAccessAddress;
};

/// One sniffer log line:
/// `<t>us Pkt<n> Ch<ch> AA:<8hex> ADV_PDU_t<type>:<name> T<tx> R<rx> PloadL<len> AdvA:<12hex> Data:<hex> CRC<0|1>`
/// CRC0 means the CRC matched.
std::string format_log_line(const LogContext& ctx, const ParsedAdv& adv);

std::string to_hex(std::span<const std::uint8_t> bytes);
/// Accepts upper or lower case, optional separators ':', ' ', '-'.
std::vector<std::uint8_t> from_hex(const std::string& text);

}  // namespace sdrlab::ble
