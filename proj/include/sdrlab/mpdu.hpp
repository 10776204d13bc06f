#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdrlab/iqio.hpp"
#include "sdrlab/modem.hpp"

namespace sdrlab::mac {

/// Data frame, short destination and source addresses.
inline constexpr std::uint16_t kDataFrameControl = 0x8801;
inline constexpr std::size_t kHeaderBytes = 9;
inline constexpr std::size_t kFcsBytes = 2;
inline constexpr std::size_t kMaxPayloadBytes = 104;
/// 802.15.4 FCS starts from zero; the CC2511 hardware CRC starts from ones.
inline constexpr std::uint16_t kFcsInit = 0x0000;
inline constexpr std::uint16_t kCc2511CrcInit = 0xFFFF;

/// MAC frame with short addressing.  Multi-byte fields go on the air
/// little-endian.
struct Mpdu {
    std::uint16_t frame_control = kDataFrameControl;
    std::uint8_t seq = 0;
    std::uint16_t dest_pan = 0;
    std::uint16_t dest_addr = 0;
    std::uint16_t src_addr = 0;
    std::vector<std::uint8_t> payload;
    /// Set by parse_mpdu.
    bool fcs_ok = false;

    std::size_t size() const noexcept { return kHeaderBytes + payload.size() + kFcsBytes; }
    bool operator==(const Mpdu&) const = default;
};

/// CRC-16, x^16 + x^12 + x^5 + 1, reflected (LSB-first), no final XOR.
std::uint16_t fcs16(std::span<const std::uint8_t> bytes, std::uint16_t init = kFcsInit);

/// Throws PayloadTooLong beyond 104 bytes.
std::vector<std::uint8_t> build_mpdu(const Mpdu& m, std::uint16_t fcs_init = kFcsInit);
/// Throws TooShort below 11 bytes.
Mpdu parse_mpdu(std::span<const std::uint8_t> bytes, std::uint16_t fcs_init = kFcsInit);

/// Frame fixtures: one frame per line, lowercase hex.  Blank lines and
/// lines starting with '#' are skipped when reading.
void write_hex_lines(std::ostream& out, std::span<const std::vector<std::uint8_t>> frames);
std::vector<std::vector<std::uint8_t>> read_hex_lines(std::istream& in);

// Over-the-air framing for the 2-FSK link: four 0xAA preamble bytes, the
// D3 91 D3 91 sync word, a length byte, then the MPDU.  Every byte is sent
// LSB first.
inline constexpr std::size_t kPreambleBytes = 4;
inline constexpr std::uint32_t kSyncWord = 0xD391D391;

modem::BitStream build_phy_frame(std::span<const std::uint8_t> mpdu);
/// Last preamble byte plus the sync word; what the receiver searches for.
std::vector<std::uint8_t> phy_sync_bits();

struct ReceivedFrame {
    std::size_t first_sample = 0;
    std::size_t end_sample = 0;
    /// Preamble tail, sync word, length byte and MPDU as recovered.
    std::vector<std::uint8_t> air_bits;
    std::optional<Mpdu> mpdu;
    std::string error;

    bool fcs_ok() const noexcept { return mpdu && mpdu->fcs_ok; }
};

/// Finds and decodes every framed MPDU in a buffer at params.sample_rate().
std::vector<ReceivedFrame> receive_frames(const iq::IqBuffer& buf, const modem::ModemParams& params,
                                          int max_sync_errors = 0, std::uint16_t fcs_init = kFcsInit);

}  // namespace sdrlab::mac
