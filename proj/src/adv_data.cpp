#include "sdrlab/adv_data.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "sdrlab/error.hpp"

namespace sdrlab::adv {

namespace {

constexpr std::array<const char*, 14> kExpansions = {
    ".com/", ".org/", ".edu/", ".net/", ".info/", ".biz/", ".gov/",
    ".com",  ".org",  ".edu",  ".net",  ".info",  ".biz",  ".gov",
};

constexpr std::array<const char*, 4> kSchemes = {"http://www.", "https://www.", "http://", "https://"};

constexpr std::array<std::uint8_t, 4> kIBeaconMarker = {0x4C, 0x00, 0x02, 0x15};
constexpr std::size_t kIBeaconValueBytes = 4 + 16 + 2 + 2 + 1;

bool starts_with(const std::string& s, std::size_t pos, const char* prefix) {
    return s.compare(pos, std::char_traits<char>::length(prefix), prefix) == 0;
}

}  // namespace

std::vector<AdStructure> parse_ad_structures(std::span<const std::uint8_t> adv_data) {
    std::vector<AdStructure> out;
    std::size_t i = 0;
    while (i < adv_data.size()) {
        const std::size_t len = adv_data[i];
        if (len == 0) break;
        if (i + 1 + len > adv_data.size()) {
            throw Error(Errc::Overrun, "AD structure at offset " + std::to_string(i) + " declares " +
                                           std::to_string(len) + " bytes, " +
                                           std::to_string(adv_data.size() - i - 1) + " remain");
        }
        AdStructure s;
        s.ad_type = adv_data[i + 1];
        s.value.assign(adv_data.begin() + static_cast<std::ptrdiff_t>(i + 2),
                       adv_data.begin() + static_cast<std::ptrdiff_t>(i + 1 + len));
        out.push_back(std::move(s));
        i += 1 + len;
    }
    return out;
}

std::vector<std::uint8_t> serialize_ad_structures(std::span<const AdStructure> structures) {
    std::vector<std::uint8_t> out;
    for (const auto& s : structures) {
        if (s.value.size() > 254) throw Error(Errc::PayloadTooLong, "AD value longer than 254 bytes");
        out.push_back(static_cast<std::uint8_t>(1 + s.value.size()));
        out.push_back(s.ad_type);
        out.insert(out.end(), s.value.begin(), s.value.end());
    }
    return out;
}

std::optional<IBeacon> parse_ibeacon(std::span<const AdStructure> structures) {
    for (const auto& s : structures) {
        if (s.ad_type != kAdManufacturerData || s.value.size() < kIBeaconMarker.size()) continue;
        if (!std::equal(kIBeaconMarker.begin(), kIBeaconMarker.end(), s.value.begin())) continue;
        if (s.value.size() != kIBeaconValueBytes) {
            throw Error(Errc::Malformed, "iBeacon marker followed by " + std::to_string(s.value.size() - 4) +
                                             " bytes, expected 21");
        }
        IBeacon b;
        const auto* p = s.value.data() + 4;
        std::copy_n(p, 16, b.proximity_uuid.begin());
        b.major = static_cast<std::uint16_t>(p[16] << 8 | p[17]);
        b.minor = static_cast<std::uint16_t>(p[18] << 8 | p[19]);
        b.measured_power = static_cast<std::int8_t>(p[20]);
        return b;
    }
    return std::nullopt;
}

std::vector<AdStructure> ibeacon_structures(const IBeacon& beacon) {
    AdStructure flags{kAdFlags, {0x06}};
    AdStructure mfg{kAdManufacturerData, {kIBeaconMarker.begin(), kIBeaconMarker.end()}};
    mfg.value.insert(mfg.value.end(), beacon.proximity_uuid.begin(), beacon.proximity_uuid.end());
    mfg.value.push_back(static_cast<std::uint8_t>(beacon.major >> 8));
    mfg.value.push_back(static_cast<std::uint8_t>(beacon.major));
    mfg.value.push_back(static_cast<std::uint8_t>(beacon.minor >> 8));
    mfg.value.push_back(static_cast<std::uint8_t>(beacon.minor));
    mfg.value.push_back(static_cast<std::uint8_t>(beacon.measured_power));
    return {flags, mfg};
}

const char* eddystone_expansion(std::uint8_t code) noexcept {
    return code < kExpansions.size() ? kExpansions[code] : nullptr;
}

const char* url_scheme_prefix(UrlScheme scheme) noexcept {
    const auto i = static_cast<std::size_t>(scheme);
    return i < kSchemes.size() ? kSchemes[i] : "";
}

std::string EddystoneUrl::url() const {
    std::string out = url_scheme_prefix(scheme);
    for (auto c : encoded_body) {
        if (const char* ex = eddystone_expansion(c)) {
            out += ex;
        } else {
            out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

std::optional<EddystoneUrl> parse_eddystone_url(std::span<const AdStructure> structures) {
    for (const auto& s : structures) {
        if (s.ad_type != kAdServiceData16 || s.value.size() < 2) continue;
        const auto service = static_cast<std::uint16_t>(s.value[0] | s.value[1] << 8);
        if (service != kEddystoneService) continue;
        if (s.value.size() < 3) throw Error(Errc::Malformed, "Eddystone service data without a frame type");
        const std::uint8_t frame = s.value[2];
        if (frame != kEddystoneUrlFrame) {
            char hex[8];
            std::snprintf(hex, sizeof hex, "0x%02x", frame);
            throw Error(Errc::UnknownFrameType, std::string("Eddystone frame type ") + hex + " is not a URL frame");
        }
        if (s.value.size() < 5) throw Error(Errc::Malformed, "Eddystone-URL frame too short");
        if (s.value[4] >= kSchemes.size()) {
            throw Error(Errc::Malformed, "unknown URL scheme code " + std::to_string(s.value[4]));
        }
        EddystoneUrl e;
        e.tx_power = static_cast<std::int8_t>(s.value[3]);
        e.scheme = static_cast<UrlScheme>(s.value[4]);
        e.encoded_body.assign(s.value.begin() + 5, s.value.end());
        return e;
    }
    return std::nullopt;
}

EddystoneUrl encode_eddystone_url(const std::string& url, std::int8_t tx_power) {
    EddystoneUrl e;
    e.tx_power = tx_power;
    // Longest scheme first so "https://www." beats "https://".
    std::size_t pos = std::string::npos;
    for (auto idx : {1, 0, 3, 2}) {
        if (starts_with(url, 0, kSchemes[static_cast<std::size_t>(idx)])) {
            e.scheme = static_cast<UrlScheme>(idx);
            pos = std::char_traits<char>::length(kSchemes[static_cast<std::size_t>(idx)]);
            break;
        }
    }
    if (pos == std::string::npos) throw Error(Errc::BadSpec, "URL must start with http:// or https://");

    while (pos < url.size()) {
        std::size_t best_len = 0;
        std::uint8_t best_code = 0;
        for (std::uint8_t code = 0; code < kExpansions.size(); ++code) {
            const std::size_t len = std::char_traits<char>::length(kExpansions[code]);
            if (len > best_len && starts_with(url, pos, kExpansions[code])) {
                best_len = len;
                best_code = code;
            }
        }
        if (best_len > 0) {
            e.encoded_body.push_back(best_code);
            pos += best_len;
            continue;
        }
        const auto c = static_cast<unsigned char>(url[pos]);
        if (c <= 0x20 || c >= 0x7F) throw Error(Errc::BadSpec, "URL character outside printable ASCII");
        e.encoded_body.push_back(c);
        ++pos;
    }
    return e;
}

std::vector<AdStructure> eddystone_structures(const EddystoneUrl& frame) {
    const auto lo = static_cast<std::uint8_t>(kEddystoneService & 0xFF);
    const auto hi = static_cast<std::uint8_t>(kEddystoneService >> 8);
    AdStructure uuids{kAdComplete16BitUuids, {lo, hi}};
    AdStructure data{kAdServiceData16,
                     {lo, hi, kEddystoneUrlFrame, static_cast<std::uint8_t>(frame.tx_power),
                      static_cast<std::uint8_t>(frame.scheme)}};
    data.value.insert(data.value.end(), frame.encoded_body.begin(), frame.encoded_body.end());
    return {uuids, data};
}

std::array<std::uint8_t, 16> parse_uuid(const std::string& text) {
    std::string digits;
    for (char c : text) {
        if (c == '-') continue;
        if (!std::isxdigit(static_cast<unsigned char>(c))) throw Error(Errc::BadSpec, "bad UUID '" + text + "'");
        digits.push_back(c);
    }
    if (digits.size() != 32) throw Error(Errc::BadSpec, "UUID needs 32 hex digits: '" + text + "'");
    std::array<std::uint8_t, 16> out{};
    for (std::size_t i = 0; i < 16; ++i) {
        out[i] = static_cast<std::uint8_t>(std::stoul(digits.substr(2 * i, 2), nullptr, 16));
    }
    return out;
}

std::string format_uuid(const std::array<std::uint8_t, 16>& uuid) {
    std::string out;
    char buf[3];
    for (std::size_t i = 0; i < 16; ++i) {
        if (i == 4 || i == 6 || i == 8 || i == 10) out.push_back('-');
        std::snprintf(buf, sizeof buf, "%02x", uuid[i]);
        out += buf;
    }
    return out;
}

}  // namespace sdrlab::adv
