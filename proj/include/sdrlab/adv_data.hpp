#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdrlab::adv {

inline constexpr std::uint8_t kAdFlags = 0x01;
inline constexpr std::uint8_t kAdComplete16BitUuids = 0x03;
inline constexpr std::uint8_t kAdServiceData16 = 0x16;
inline constexpr std::uint8_t kAdManufacturerData = 0xFF;
inline constexpr std::uint16_t kEddystoneService = 0xFEAA;
inline constexpr std::uint16_t kAppleCompanyId = 0x004C;
inline constexpr std::uint8_t kEddystoneUrlFrame = 0x10;

/// One length-type-value element of advertising data.
struct AdStructure {
    std::uint8_t ad_type = 0;
    std::vector<std::uint8_t> value;

    bool operator==(const AdStructure&) const = default;
};

/// Greedy parse.  A zero length byte terminates the list (the rest is
/// padding).  Throws Overrun when a declared length runs past the end.
std::vector<AdStructure> parse_ad_structures(std::span<const std::uint8_t> adv_data);
/// Throws PayloadTooLong if a value exceeds 254 bytes.
std::vector<std::uint8_t> serialize_ad_structures(std::span<const AdStructure> structures);

struct IBeacon {
    std::array<std::uint8_t, 16> proximity_uuid{};
    std::uint16_t major = 0;
    std::uint16_t minor = 0;
    /// RSSI at 1 m, dBm.
    std::int8_t measured_power = 0;

    bool operator==(const IBeacon&) const = default;
};

/// Looks for Apple manufacturer data carrying the 02 15 marker.  Throws
/// Malformed when the marker is present but the length is wrong.
std::optional<IBeacon> parse_ibeacon(std::span<const AdStructure> structures);
/// Flags (LE general discoverable, no BR/EDR) followed by the beacon.
std::vector<AdStructure> ibeacon_structures(const IBeacon& beacon);

enum class UrlScheme : std::uint8_t { HttpWww = 0, HttpsWww = 1, Http = 2, Https = 3 };

struct EddystoneUrl {
    std::int8_t tx_power = 0;
    UrlScheme scheme = UrlScheme::HttpWww;
    /// Encoded body: printable characters and expansion codes 0x00..0x0D.
    std::vector<std::uint8_t> encoded_body;

    std::string url() const;
    bool operator==(const EddystoneUrl&) const = default;
};

/// Finds 0xFEAA service data.  Absent when there is none; throws
/// UnknownFrameType for other Eddystone frames and Malformed for a URL
/// frame too short to hold the scheme byte.
std::optional<EddystoneUrl> parse_eddystone_url(std::span<const AdStructure> structures);
/// Compresses a URL with the scheme and suffix tables.  Throws BadSpec for
/// an unknown scheme or characters outside printable ASCII.
EddystoneUrl encode_eddystone_url(const std::string& url, std::int8_t tx_power);
/// Complete-16-bit-UUID list (0xFEAA) followed by the URL service data.
std::vector<AdStructure> eddystone_structures(const EddystoneUrl& frame);

/// Text of the expansion code, or nullptr if the byte is not one.
const char* eddystone_expansion(std::uint8_t code) noexcept;
const char* url_scheme_prefix(UrlScheme scheme) noexcept;

/// Parses a canonical 8-4-4-4-12 UUID (dashes optional).
std::array<std::uint8_t, 16> parse_uuid(const std::string& text);
std::string format_uuid(const std::array<std::uint8_t, 16>& uuid);

}  // namespace sdrlab::adv
