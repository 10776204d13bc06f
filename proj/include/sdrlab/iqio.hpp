#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdrlab::iq {

using Sample = std::complex<float>;

/// Complex baseband recording plus the metadata needed to interpret it.
/// center_freq is informational only; all processing happens at baseband.
struct IqBuffer {
    std::vector<Sample> samples;
    double sample_rate = 4e6;
    double center_freq = 0.0;
    std::string origin;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    double duration_s() const noexcept { return static_cast<double>(samples.size()) / sample_rate; }
};

enum class IqFormat {
    Int8Interleaved,     // .cs8, HackRF native
    Float32Interleaved,  // .cf32, little-endian file-sink layout
};

std::size_t pair_size(IqFormat format) noexcept;
std::string format_name(IqFormat format);
IqFormat parse_format(const std::string& name);
/// Guess from ".cs8" / ".cf32" extension; nullopt if unrecognised.
std::optional<IqFormat> format_from_extension(const std::filesystem::path& path);

/// Working rate used when a capture carries no rate of its own.
inline constexpr double kDefaultSampleRate = 4e6;
/// HackRF One ceiling.
inline constexpr double kMaxHackRfRate = 20e6;

// Int8 samples are value/128 (two's complement, no DC offset).
IqBuffer read_iq(std::span<const std::uint8_t> bytes, IqFormat format, double sample_rate,
                 double center_freq);
std::vector<std::uint8_t> write_iq(const IqBuffer& buf, IqFormat format);

/// Decode without constructing a buffer; appends to `out`.  Used by the
/// chunked reader where allocating an IqBuffer per chunk would be wasteful.
void decode_samples(std::span<const std::uint8_t> bytes, IqFormat format, std::vector<Sample>& out);

struct ResampleWarnings {
    /// Fraction of input power that lies beyond the output Nyquist band and
    /// is removed by the anti-alias filter.
    double out_of_band_fraction = 0.0;
    bool aliasing_risk = false;
};

/// Rational-ratio polyphase resampler (windowed-sinc, Kaiser window).
/// Throws IrrationalRatio unless new_rate/old_rate = L/M with L, M <= 64.
IqBuffer resample(const IqBuffer& buf, double new_rate, ResampleWarnings* warnings = nullptr);

/// Reduced L/M for the rate pair, or nullopt when no small-term ratio fits.
std::optional<std::pair<int, int>> rational_ratio(double from_rate, double to_rate, int max_term = 64);

// Sidecar: "<data-file>.meta" with key=value lines.
struct Sidecar {
    double sample_rate = kDefaultSampleRate;
    double center_freq = 0.0;
    IqFormat format = IqFormat::Int8Interleaved;
};

std::filesystem::path sidecar_path(const std::filesystem::path& data_file);
void write_sidecar(const std::filesystem::path& data_file, const Sidecar& meta);
std::optional<Sidecar> read_sidecar(const std::filesystem::path& data_file);

IqBuffer load_iq_file(const std::filesystem::path& path, IqFormat format, double sample_rate,
                      double center_freq = 0.0);
/// Writes the samples and the sidecar next to them.
void save_iq_file(const std::filesystem::path& path, const IqBuffer& buf, IqFormat format);

/// Sequential chunk reader for captures too large to hold in memory.
class IqFileReader {
public:
    IqFileReader(const std::filesystem::path& path, IqFormat format);

    /// Reads up to max_samples; returns false at end of file.  Throws
    /// OddLength if the file ends inside an IQ pair.
    bool read(std::size_t max_samples, std::vector<Sample>& out);
    std::size_t samples_read() const noexcept { return samples_read_; }
    std::uintmax_t file_size() const noexcept { return file_size_; }

private:
    std::ifstream in_;
    IqFormat format_;
    std::vector<std::uint8_t> scratch_;
    std::size_t samples_read_ = 0;
    std::uintmax_t file_size_ = 0;
};

}  // namespace sdrlab::iq
