#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sdrlab/ble_link.hpp"

namespace support {

// The advertising packet from the reference capture.
inline constexpr const char* kCaptureAdvA = "41e0302e6669";
inline constexpr const char* kCaptureData = "0303aafe0e16aafe10bb0074616a64696e690a";

inline sdrlab::ble::AdvPdu capture_pdu() {
    sdrlab::ble::AdvPdu pdu;
    pdu.pdu_type = sdrlab::ble::ADV_NONCONN_IND;
    pdu.tx_add = true;
    const auto a = sdrlab::ble::from_hex(kCaptureAdvA);
    std::copy(a.begin(), a.end(), pdu.adv_a.begin());
    pdu.adv_data = sdrlab::ble::from_hex(kCaptureData);
    return pdu;
}

inline std::vector<std::uint8_t> random_bytes(std::mt19937_64& rng, std::size_t n) {
    std::uniform_int_distribution<int> d(0, 255);
    std::vector<std::uint8_t> out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(d(rng));
    return out;
}

inline std::vector<std::uint8_t> random_bits(std::mt19937_64& rng, std::size_t n) {
    std::uniform_int_distribution<int> d(0, 1);
    std::vector<std::uint8_t> out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(d(rng));
    return out;
}

inline sdrlab::ble::AdvPdu random_pdu(std::mt19937_64& rng) {
    sdrlab::ble::AdvPdu pdu;
    std::uniform_int_distribution<int> type(0, 15), flag(0, 1), len(0, 31);
    pdu.pdu_type = static_cast<std::uint8_t>(type(rng));
    pdu.tx_add = flag(rng) != 0;
    pdu.rx_add = flag(rng) != 0;
    const auto a = random_bytes(rng, 6);
    std::copy(a.begin(), a.end(), pdu.adv_a.begin());
    pdu.adv_data = random_bytes(rng, static_cast<std::size_t>(len(rng)));
    return pdu;
}

/// Fresh directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("sdrlab_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(SDRLAB_FIXTURE_DIR) / name;
}

}  // namespace support
