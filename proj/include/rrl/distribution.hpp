#pragma once

#include <cstddef>
#include <vector>

#include "rrl/errors.hpp"

namespace rrl {

struct AtomMergePolicy {
    /// Atoms with values closer than this are merged (mass-weighted value).
    double merge_eps = 1e-9;
    /// Atoms with mass below this are dropped and the rest renormalized.
    double drop_eps = 1e-12;
};

/// Finite discrete probability distribution: sorted atoms with strictly
/// increasing values and masses summing to 1.
class DiscreteDistribution {
public:
    struct Atom {
        double value = 0.0;
        double mass = 0.0;
    };

    DiscreteDistribution() = default;

    static DiscreteDistribution point_mass(double value) {
        DiscreteDistribution d;
        d.atoms_ = {{value, 1.0}};
        return d;
    }

    /// Builds from unsorted, possibly duplicated raw atoms: sorts, merges nearby
    /// values, drops negligible mass, renormalizes.
    static DiscreteDistribution from_atoms(std::vector<Atom> raw,
                                           const AtomMergePolicy& policy = {});

    const std::vector<Atom>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }
    bool empty() const { return atoms_.empty(); }

    double mean() const;
    double variance() const;

    /// F(x) = P[X <= x]
    double cdf(double x) const;

    /// Generalized inverse CDF: inf { x : F(x) >= tau }.
    double quantile(double tau) const;

private:
    std::vector<Atom> atoms_;
};

/// Cramer distance l2(a, b) = sqrt( integral (F_a - F_b)^2 dx ) over the merged
/// support. Symmetric, nonnegative, zero iff the distributions coincide.
double cramer_distance(const DiscreteDistribution& a, const DiscreteDistribution& b);

}  // namespace rrl
