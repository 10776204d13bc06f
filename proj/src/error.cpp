#include "sdrlab/error.hpp"

namespace sdrlab {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::OddLength: return "OddLength";
        case Errc::SampleOutOfRange: return "SampleOutOfRange";
        case Errc::IrrationalRatio: return "IrrationalRatio";
        case Errc::BadRate: return "BadRate";
        case Errc::BadParams: return "BadParams";
        case Errc::EmptyBits: return "EmptyBits";
        case Errc::TooShort: return "TooShort";
        case Errc::NoSymbols: return "NoSymbols";
        case Errc::PatternTooShort: return "PatternTooShort";
        case Errc::BadThreshold: return "BadThreshold";
        case Errc::BadChannel: return "BadChannel";
        case Errc::LengthOutOfRange: return "LengthOutOfRange";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::PayloadTooLong: return "PayloadTooLong";
        case Errc::Overrun: return "Overrun";
        case Errc::Malformed: return "Malformed";
        case Errc::UnknownFrameType: return "UnknownFrameType";
        case Errc::EmptyBuffer: return "EmptyBuffer";
        case Errc::ConfigInvalid: return "ConfigInvalid";
        case Errc::EmptyRecording: return "EmptyRecording";
        case Errc::BadSpec: return "BadSpec";
        case Errc::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace sdrlab
