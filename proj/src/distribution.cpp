#include "rrl/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rrl {

DiscreteDistribution DiscreteDistribution::from_atoms(std::vector<Atom> raw,
                                                      const AtomMergePolicy& policy) {
    if (raw.empty()) throw std::invalid_argument("distribution needs at least one atom");
    std::sort(raw.begin(), raw.end(),
              [](const Atom& x, const Atom& y) { return x.value < y.value; });

    DiscreteDistribution out;
    out.atoms_.reserve(raw.size());
    for (const Atom& a : raw) {
        if (a.mass < 0.0) throw std::invalid_argument("negative atom mass");
        if (!out.atoms_.empty() && a.value - out.atoms_.back().value <= policy.merge_eps) {
            Atom& last = out.atoms_.back();
            const double total = last.mass + a.mass;
            if (total > 0.0)
                last.value = (last.value * last.mass + a.value * a.mass) / total;
            last.mass = total;
        } else {
            out.atoms_.push_back(a);
        }
    }

    out.atoms_.erase(std::remove_if(out.atoms_.begin(), out.atoms_.end(),
                                    [&](const Atom& a) { return a.mass < policy.drop_eps; }),
                     out.atoms_.end());
    if (out.atoms_.empty())
        throw std::invalid_argument("all atom mass below the drop threshold");

    double total = 0.0;
    for (const Atom& a : out.atoms_) total += a.mass;
    for (Atom& a : out.atoms_) a.mass /= total;
    return out;
}

double DiscreteDistribution::mean() const {
    double m = 0.0;
    for (const Atom& a : atoms_) m += a.value * a.mass;
    return m;
}

double DiscreteDistribution::variance() const {
    const double m = mean();
    double v = 0.0;
    for (const Atom& a : atoms_) v += (a.value - m) * (a.value - m) * a.mass;
    return v;
}

double DiscreteDistribution::cdf(double x) const {
    double f = 0.0;
    for (const Atom& a : atoms_) {
        if (a.value > x) break;
        f += a.mass;
    }
    return f;
}

double DiscreteDistribution::quantile(double tau) const {
    if (atoms_.empty()) throw std::logic_error("quantile of empty distribution");
    double f = 0.0;
    for (const Atom& a : atoms_) {
        f += a.mass;
        if (f >= tau) return a.value;
    }
    return atoms_.back().value;
}

double cramer_distance(const DiscreteDistribution& a, const DiscreteDistribution& b) {
    const auto& xs = a.atoms();
    const auto& ys = b.atoms();

    // Walk the merged support; between consecutive support points both CDFs are
    // constant, so the integral is a finite sum of (F_a - F_b)^2 * gap.
    std::size_t i = 0, j = 0;
    double fa = 0.0, fb = 0.0;
    double prev = 0.0;
    bool have_prev = false;
    double integral = 0.0;

    while (i < xs.size() || j < ys.size()) {
        double v;
        if (j >= ys.size() || (i < xs.size() && xs[i].value <= ys[j].value)) {
            v = xs[i].value;
        } else {
            v = ys[j].value;
        }
        if (have_prev && v > prev) {
            const double diff = fa - fb;
            integral += diff * diff * (v - prev);
        }
        while (i < xs.size() && xs[i].value == v) fa += xs[i++].mass;
        while (j < ys.size() && ys[j].value == v) fb += ys[j++].mass;
        prev = v;
        have_prev = true;
    }
    return std::sqrt(std::max(integral, 0.0));
}

}  // namespace rrl
