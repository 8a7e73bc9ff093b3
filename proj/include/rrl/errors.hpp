#pragma once

#include <stdexcept>
#include <string>

namespace rrl {

/// Chain is reducible or has no unique stationary distribution.
struct NotErgodic : std::runtime_error {
    explicit NotErgodic(const std::string& what) : std::runtime_error(what) {}
};

/// Ergodicity or invertibility of (I - P_pi^T Gamma) does not hold.
struct AssumptionViolated : std::runtime_error {
    explicit AssumptionViolated(const std::string& what) : std::runtime_error(what) {}
};

/// Target policy puts mass on an action the behavior policy never takes.
struct CoverageViolation : std::runtime_error {
    explicit CoverageViolation(const std::string& what) : std::runtime_error(what) {}
};

/// Feature matrix does not have linearly independent columns.
struct RankDeficientFeatures : std::runtime_error {
    explicit RankDeficientFeatures(const std::string& what) : std::runtime_error(what) {}
};

/// Atom count of a discrete distribution exceeded its configured cap.
struct SupportExplosion : std::runtime_error {
    explicit SupportExplosion(const std::string& what) : std::runtime_error(what) {}
};

/// A linear solve failed (singular or numerically unusable system).
struct SingularSystem : std::runtime_error {
    explicit SingularSystem(const std::string& what) : std::runtime_error(what) {}
};

/// A tuning grid is missing (lambda, alpha) cells.
struct IncompleteGrid : std::runtime_error {
    explicit IncompleteGrid(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rrl
