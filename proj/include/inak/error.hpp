#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace inak {

/// Failure categories reported by the analysis routines.
enum class ErrorKind {
    StepSizeUnderflow,
    MaxTimeExceeded,
    NoConvergence,
    BranchEscapedBox,
    Inconclusive,
    NoRecurrence,
    NewtonDiverged,
    BranchLost,
    CurveFitFailed,
    WindowTooShort,
    ConfigInvalid,
    AnalysisFailed,
};

constexpr std::string_view to_string(ErrorKind k)
{
    switch (k) {
    case ErrorKind::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorKind::MaxTimeExceeded: return "MaxTimeExceeded";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::BranchEscapedBox: return "BranchEscapedBox";
    case ErrorKind::Inconclusive: return "Inconclusive";
    case ErrorKind::NoRecurrence: return "NoRecurrence";
    case ErrorKind::NewtonDiverged: return "NewtonDiverged";
    case ErrorKind::BranchLost: return "BranchLost";
    case ErrorKind::CurveFitFailed: return "CurveFitFailed";
    case ErrorKind::WindowTooShort: return "WindowTooShort";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::AnalysisFailed: return "AnalysisFailed";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {
    }

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace inak
