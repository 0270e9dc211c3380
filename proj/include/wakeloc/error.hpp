#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wakeloc {

enum class Errc {
    InvalidArgument,
    ImplausibleRange,
    DegenerateGeometry,
    NoConvergence,
    MissingReference,
    AllWeightsZero,
    OverlappingIntervals,
    EmptyInput,
    ParseError,
    ValidationError,
    InfeasibleSpec,
    PlacementExhausted,
    Io,
};

std::string_view to_string(Errc code);

// Library-wide exception. `details` carries one entry per violation when a
// check collects several (config validation reports all of them at once).
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message, std::vector<std::string> details = {});

    Errc code() const noexcept { return code_; }
    const std::vector<std::string>& details() const noexcept { return details_; }

private:
    Errc code_;
    std::vector<std::string> details_;
};

}  // namespace wakeloc
