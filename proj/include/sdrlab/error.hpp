#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdrlab {

enum class Errc {
    EmptyInput,
    OddLength,
    SampleOutOfRange,
    IrrationalRatio,
    BadRate,
    BadParams,
    EmptyBits,
    TooShort,
    NoSymbols,
    PatternTooShort,
    BadThreshold,
    BadChannel,
    LengthOutOfRange,
    LengthMismatch,
    PayloadTooLong,
    Overrun,
    Malformed,
    UnknownFrameType,
    EmptyBuffer,
    ConfigInvalid,
    EmptyRecording,
    BadSpec,
    Io,
};

std::string_view errc_name(Errc code) noexcept;

// Every failure raised by the library carries one of the codes above so
// callers (and tests) can dispatch on the condition rather than the text.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace sdrlab
