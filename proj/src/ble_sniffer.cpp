#include "sdrlab/ble_sniffer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sdrlab/burst.hpp"
#include "sdrlab/error.hpp"

namespace sdrlab::ble {

AdvSniffer::AdvSniffer(SnifferConfig config) : config_(std::move(config)), sync_(adv_sync_bits()) {
    config_.modem.validate();
    channel_to_freq(config_.channel);
}

std::vector<DecodedAdv> AdvSniffer::push(std::span<const iq::Sample> chunk) {
    window_.insert(window_.end(), chunk.begin(), chunk.end());
    consumed_ += chunk.size();
    return process(false);
}

std::vector<DecodedAdv> AdvSniffer::finish() {
    return process(true);
}

std::optional<DecodedAdv> AdvSniffer::decode(std::span<const float> freq, const modem::SyncHit& hit) {
    const auto burst =
        modem::recover_burst(freq, config_.modem, hit, sync_, config_.max_sync_errors, kMaxBitsAfterSync);
    if (!burst) return std::nullopt;

    const auto& bits = burst->bits.bits;
    const std::size_t sync_len = sync_.size();
    const double sps = config_.modem.samples_per_symbol;

    DecodedAdv out;
    out.sync_errors = burst->sync_errors;
    const auto finish_span = [&](std::size_t n_bits) {
        out.air_bits.assign(bits.begin(), bits.begin() + static_cast<std::ptrdiff_t>(n_bits));
        const auto& offs = burst->bits.start_offsets;
        const double first = static_cast<double>(offs.front()) - sps / 2.0 + 1.0;
        out.first_sample = window_base_ + static_cast<std::uint64_t>(std::max(0.0, std::round(first)));
        out.end_sample = window_base_ + offs[n_bits - 1] + static_cast<std::uint64_t>(sps / 2.0 + 1.0);
        out.time_us = static_cast<std::uint64_t>(static_cast<double>(out.first_sample) * 1e6 /
                                                 config_.modem.sample_rate());
    };

    if (bits.size() < sync_len + 16) {
        out.error = "truncated before PDU header";
        finish_span(bits.size());
        return out;
    }
    const auto header = whiten(modem::bits_to_bytes(std::span(bits).subspan(sync_len, 16)), config_.channel);
    const std::size_t len = header[1] & 0x3F;
    if (len < kAdvAddressBytes || len > kMaxPayloadBytes) {
        out.error = "payload length " + std::to_string(len) + " outside 6..37";
        finish_span(sync_len + 16);
        return out;
    }
    const std::size_t body_bits = (2 + len + 3) * 8;
    if (bits.size() < sync_len + body_bits) {
        out.error = "truncated burst";
        finish_span(bits.size());
        return out;
    }
    finish_span(sync_len + body_bits);
    const auto body = whiten(modem::bits_to_bytes(std::span(bits).subspan(sync_len, body_bits)), config_.channel);
    try {
        out.parsed = parse_adv_pdu(body);
    } catch (const Error& e) {
        out.error = e.what();
    }
    return out;
}

std::vector<DecodedAdv> AdvSniffer::process(bool final) {
    std::vector<DecodedAdv> out;
    const int sps = config_.modem.samples_per_symbol;
    std::vector<float> freq;
    modem::demodulate_fm(window_, config_.modem.sample_rate(), freq);

    const double tail = (static_cast<double>(kMaxBitsAfterSync) + 3.0) * sps;
    const double base = static_cast<double>(window_base_);
    double deferred = std::numeric_limits<double>::infinity();
    double handled = scanned_until_;

    if (freq.size() >= static_cast<std::size_t>(sps)) {
        for (const auto& hit : modem::scan_for_sync(freq, sps, sync_, config_.max_sync_errors)) {
            const double abs = base + hit.last_symbol_center;
            if (abs < handled) continue;
            if (!final && hit.last_symbol_center + tail > static_cast<double>(freq.size())) {
                deferred = abs;
                break;
            }
            auto packet = decode(freq, hit);
            if (!packet) {
                handled = abs + sps;
                continue;
            }
            packet->packet_number = next_packet_++;
            handled = std::max(abs + sps, static_cast<double>(packet->end_sample));
            out.push_back(std::move(*packet));
        }
    }

    if (final) {
        window_base_ += window_.size();
        window_.clear();
        scanned_until_ = static_cast<double>(window_base_);
        return out;
    }

    const double limit = base + static_cast<double>(freq.size()) - tail;
    scanned_until_ = std::max({scanned_until_, handled, std::min(deferred, limit) - sps});
    // Keep enough history for the sync register and timing recovery of any
    // burst whose sync ends at or after scanned_until_.
    const double keep_from = scanned_until_ - static_cast<double>(sync_.size() + 4) * sps;
    const auto drop = static_cast<std::size_t>(std::clamp(std::floor(keep_from - base), 0.0,
                                                          static_cast<double>(window_.size())));
    window_.erase(window_.begin(), window_.begin() + static_cast<std::ptrdiff_t>(drop));
    window_base_ += drop;
    return out;
}

std::vector<DecodedAdv> decode_advertising(const iq::IqBuffer& buf, const SnifferConfig& config) {
    AdvSniffer sniffer(config);
    const double rate = config.modem.sample_rate();
    std::vector<DecodedAdv> out;
    if (std::abs(buf.sample_rate - rate) > 1e-6 * rate) {
        const auto matched = iq::resample(buf, rate);
        out = sniffer.push(matched.samples);
    } else {
        out = sniffer.push(buf.samples);
    }
    auto rest = sniffer.finish();
    out.insert(out.end(), std::make_move_iterator(rest.begin()), std::make_move_iterator(rest.end()));
    return out;
}

}  // namespace sdrlab::ble
