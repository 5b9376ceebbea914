#pragma once

#include <stdexcept>
#include <string>

namespace qkdv {

enum class ErrorKind {
    Domain,
    SingularityOnPath,
    ToleranceFailure,
    NearSingularity,
    Index,
    NotASingularity,
    CollidedSites,
    DegenerateDiscriminant,
    Resonance,
    OutOfConvergenceRegion,
    OutOfDomain,
    IllConditioned,
    InsufficientGrid,
    VanishingQAtZero,
    Evaluation,
    Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace qkdv
