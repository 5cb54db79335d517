#pragma once

#include "nht/models.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace nht {

// Quantities at Γ. g, f and p1 are ranges over the samples; every inequality below is
// linear (or concave) in each of them, so checking the corners covers the whole range.
struct ThresholdInput {
    double nu_u = 0.0, nu_s = 0.0;
    double beta = 0.0;
    double g_lo = 0.0, g_hi = 0.0;
    double f_lo = 1.0, f_hi = 1.0;
    double p1_lo = 0.0, p1_hi = 0.0;
    int m = 2;
    double mu = 1.0;
    std::optional<double> l;
    std::optional<double> s;

    static ThresholdInput constant(double nu_u, double nu_s, double g, double f, double p1,
                                   int m, double mu);
    double nu() const { return nu_u < nu_s ? nu_u : nu_s; }
    void validate(bool needs_f) const;  // throws std::invalid_argument
};

constexpr double kInf = std::numeric_limits<double>::infinity();

// Open interval (lo, hi); empty when lo >= hi.
struct Interval {
    double lo = -kInf, hi = kInf;
    bool empty() const { return !(lo < hi); }
    bool contains(double x) const { return lo < x && x < hi; }
    Interval intersect(const Interval& o) const;
};

// Solution set of a s + b > 0.
Interval solve_linear(double a, double b);

struct Condition {
    std::string name;
    std::string formula;
    Interval s_range;               // where it holds, worst case over the input ranges
    std::optional<double> slack;    // at the supplied (s, l), worst case
};

struct ThresholdReport {
    std::string theorem;
    std::string verdict;  // "unconstrained", "s > <s0>", "s in (a, b)", "infeasible", ...
    bool feasible = false;
    Interval s_range;
    std::optional<double> s0;  // infimum; empty means -inf
    std::optional<double> l_max;
    std::vector<Condition> conditions;
    std::vector<std::string> notes;
    // satisfied at the supplied (s, l), when both are given
    std::optional<bool> holds;
};

// (2 nu_u - 2 p1 - (2s - m + 3) g) > 0 and (nu_s - 2 p1 - (2s - m + 1) g) > 0.
ThresholdReport closed_thresholds(const ThresholdInput& in);

struct BThresholds {
    ThresholdReport with_tau;    // 2 min(nu_u, f mu) in the first condition
    ThresholdReport stationary;  // min(nu_s, 2 nu_u) instead
    // sup of l at the supplied s (or at g = 0 when s is absent), P alone and with P^dagger
    std::optional<double> l_sup, l_sup_stationary, l_sup_with_adjoint;
};

// l defaults to 0 when absent.
BThresholds b_thresholds(const ThresholdInput& in);

struct DecayThreshold {
    double theorem_form = 0.0;    // min(mu, nu/2) - p1/f
    double remark_form = 0.0;     // min(nu/(2f), mu) - p1
    double kerr_text_form = 0.0;  // (min(mu, nu/2) - p1)/f
    bool disagree = false;
    std::optional<bool> l_ok_theorem, l_ok_remark, l_ok_kerr_text;  // strict, at in.l
};

DecayThreshold decay_threshold(const ThresholdInput& in);

enum class RadialKind { Source, Sink, Saddle };

struct RadialBound {
    RadialKind kind{};
    int sign = 1;  // +1 for the source (upper sign), -1 for the sink
    double g = 0.0;
    double bound = 0.0;
    // the control estimate holds for s above the bound when g > 0, below it when g < 0
    bool lower = true;
    std::string formula;
    std::optional<bool> control_at_s;
    std::optional<bool> control_at_s_minus_2;
};

// (s - (m-1)/2) g + l f -/+ p1 > 0, with -l f for saddles. Throws on g = 0.
RadialBound radial_threshold(double g, double f, double p1, int m, double l, RadialKind kind,
                             int sign, std::optional<double> s = std::nullopt);

struct KerrSaddleSide {
    std::string name;  // "L-" or "L+"
    double r = 0.0;
    double dmu = 0.0;
    double bound = 0.0;
};

struct KerrSaddleReport {
    std::vector<KerrSaddleSide> sides;
    double worst = 0.0;
    std::optional<bool> holds;
};

// s > 5/2 + 2(1 + lambda)(r^2 + a^2) l/|mu'(r)| -/+ (r^2 + a^2 cos^2 theta) p1/|mu'(r)|
// at r = r_-/+. Throws ModelError on non-subextremal parameters.
KerrSaddleReport kerr_saddle_condition(const KerrDSParams& k, double l, double p1, double theta,
                                       std::optional<double> s = std::nullopt);

struct ClosedFredholm {
    double slack1 = 0.0;  // nu/2 - (p1 + (s - (m-1)/2) g)
    double slack2 = 0.0;  // nu - (p1 + (s - (m-3)/2) g)
    double slack1_prev = 0.0, slack2_prev = 0.0;  // same at s - 1
    bool holds = false;
    bool holds_prev = false;
    Interval s_range;
};

ClosedFredholm closed_fredholm_conditions(const ThresholdInput& in, double s);

std::string format_bound(double v);

}  // namespace nht
