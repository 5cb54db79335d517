#include "nht/thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>

namespace nht {

namespace {

struct Corner {
    double g, f, p1;
};

std::vector<Corner> corners(const ThresholdInput& in) {
    std::vector<Corner> out;
    for (double g : {in.g_lo, in.g_hi})
        for (double f : {in.f_lo, in.f_hi})
            for (double p : {in.p1_lo, in.p1_hi}) out.push_back({g, f, p});
    return out;
}

// a s + b > 0 at every corner
Condition linear_condition(const ThresholdInput& in, const std::string& name,
                           const std::string& formula,
                           const std::function<std::pair<double, double>(const Corner&)>& ab) {
    Condition c;
    c.name = name;
    c.formula = formula;
    for (const auto& k : corners(in)) {
        auto [a, b] = ab(k);
        c.s_range = c.s_range.intersect(solve_linear(a, b));
        if (in.s) {
            double v = a * *in.s + b;
            c.slack = c.slack ? std::min(*c.slack, v) : v;
        }
    }
    return c;
}

void summarize(ThresholdReport& r, const ThresholdInput& in) {
    r.s_range = Interval{};
    for (const auto& c : r.conditions) r.s_range = r.s_range.intersect(c.s_range);
    r.feasible = !r.s_range.empty();
    const bool lo = std::isfinite(r.s_range.lo), hi = std::isfinite(r.s_range.hi);
    if (lo) r.s0 = r.s_range.lo;
    if (!r.feasible) r.verdict = "infeasible";
    else if (!lo && !hi) r.verdict = "unconstrained";
    else if (lo && !hi) r.verdict = "s > " + format_bound(r.s_range.lo);
    else if (!lo) r.verdict = "unconstrained below, s < " + format_bound(r.s_range.hi);
    else r.verdict = format_bound(r.s_range.lo) + " < s < " + format_bound(r.s_range.hi);
    if (in.s) {
        bool ok = true;
        for (const auto& c : r.conditions) ok = ok && c.slack && *c.slack > 0;
        r.holds = ok;
    }
    if (in.g_lo != in.g_hi) r.notes.push_back("g varies over Γ; conditions hold on the whole range");
}

std::optional<double> min_opt(std::optional<double> a, std::optional<double> b) {
    if (!a) return b;
    if (!b) return a;
    return std::min(*a, *b);
}

}  // namespace

ThresholdInput ThresholdInput::constant(double nu_u, double nu_s, double g, double f, double p1,
                                        int m, double mu) {
    ThresholdInput in;
    in.nu_u = nu_u;
    in.nu_s = nu_s;
    in.g_lo = in.g_hi = g;
    in.f_lo = in.f_hi = f;
    in.p1_lo = in.p1_hi = p1;
    in.m = m;
    in.mu = mu;
    return in;
}

void ThresholdInput::validate(bool needs_f) const {
    auto fin = [](double v) { return std::isfinite(v); };
    if (!(nu_u > 0) || !(nu_s > 0) || !fin(nu_u) || !fin(nu_s))
        throw std::invalid_argument("nu_u and nu_s must be finite and > 0");
    if (!(mu > 0) || !fin(mu)) throw std::invalid_argument("mu must be finite and > 0");
    if (!(g_lo <= g_hi) || !fin(g_lo) || !fin(g_hi)) throw std::invalid_argument("bad g range");
    if (!(p1_lo <= p1_hi) || !fin(p1_lo) || !fin(p1_hi))
        throw std::invalid_argument("bad p1 range");
    if (!(f_lo <= f_hi) || !fin(f_lo) || !fin(f_hi)) throw std::invalid_argument("bad f range");
    if (needs_f && !(f_lo > 0)) throw std::invalid_argument("f must be > 0 for b-thresholds");
    if (m < 1) throw std::invalid_argument("m must be >= 1");
    if (l && !fin(*l)) throw std::invalid_argument("l must be finite");
    if (s && !fin(*s)) throw std::invalid_argument("s must be finite");
}

Interval Interval::intersect(const Interval& o) const {
    return {std::max(lo, o.lo), std::min(hi, o.hi)};
}

Interval solve_linear(double a, double b) {
    if (a > 0) return {-b / a, kInf};
    if (a < 0) return {-kInf, -b / a};
    return b > 0 ? Interval{} : Interval{0.0, 0.0};
}

std::string format_bound(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ThresholdReport closed_thresholds(const ThresholdInput& in) {
    in.validate(false);
    ThresholdReport r;
    r.theorem = "closed";
    const double m = in.m;
    r.conditions.push_back(linear_condition(
        in, "unstable", "2 nu_u - 2 p1 - (2s - m + 3) g > 0",
        [&](const Corner& k) {
            return std::make_pair(-2 * k.g, 2 * in.nu_u - 2 * k.p1 - (3 - m) * k.g);
        }));
    r.conditions.push_back(linear_condition(
        in, "stable", "nu_s - 2 p1 - (2s - m + 1) g > 0", [&](const Corner& k) {
            return std::make_pair(-2 * k.g, in.nu_s - 2 * k.p1 - (1 - m) * k.g);
        }));
    summarize(r, in);
    return r;
}

BThresholds b_thresholds(const ThresholdInput& in) {
    in.validate(true);
    const double m = in.m;
    const double l = in.l.value_or(0.0);
    auto build = [&](bool stationary, double nu_u, double nu_s) {
        ThresholdReport r;
        r.theorem = stationary ? "b-stationary" : "b";
        r.conditions.push_back(linear_condition(
            in, "unstable",
            stationary ? "min(nu_s, 2 nu_u) - 2 p1 - 2 l f - (2s - m + 3) g > 0"
                       : "2 min(nu_u, f mu) - 2 p1 - 2 l f - (2s - m + 3) g > 0",
            [&](const Corner& k) {
                double lead = stationary ? std::min(nu_s, 2 * nu_u)
                                         : 2 * std::min(nu_u, k.f * in.mu);
                return std::make_pair(-2 * k.g, lead - 2 * k.p1 - 2 * l * k.f - (3 - m) * k.g);
            }));
        r.conditions.push_back(linear_condition(
            in, "stable", "nu_s - 2 p1 - 2 l f - (2s - m + 1) g > 0", [&](const Corner& k) {
                return std::make_pair(-2 * k.g, nu_s - 2 * k.p1 - 2 * l * k.f - (1 - m) * k.g);
            }));
        summarize(r, in);
        return r;
    };
    // sup of l: each condition is B - 2 l f > 0
    auto lsup = [&](bool stationary, double nu_u, double nu_s) -> std::optional<double> {
        if (!in.s && (in.g_lo != 0.0 || in.g_hi != 0.0)) return std::nullopt;
        const double s = in.s.value_or(0.0);
        std::optional<double> out;
        for (const auto& k : corners(in)) {
            double lead = stationary ? std::min(nu_s, 2 * nu_u) : 2 * std::min(nu_u, k.f * in.mu);
            double B1 = lead - 2 * k.p1 - (2 * s - m + 3) * k.g;
            double B2 = nu_s - 2 * k.p1 - (2 * s - m + 1) * k.g;
            out = min_opt(out, std::min(B1, B2) / (2 * k.f));
        }
        return out;
    };
    BThresholds b;
    b.with_tau = build(false, in.nu_u, in.nu_s);
    b.stationary = build(true, in.nu_u, in.nu_s);
    b.l_sup = lsup(false, in.nu_u, in.nu_s);
    b.l_sup_stationary = lsup(true, in.nu_u, in.nu_s);
    // the adjoint swaps the roles of nu_u and nu_s
    b.l_sup_with_adjoint = min_opt(b.l_sup, lsup(false, in.nu_s, in.nu_u));
    b.with_tau.l_max = b.l_sup;
    b.stationary.l_max = b.l_sup_stationary;
    return b;
}

DecayThreshold decay_threshold(const ThresholdInput& in) {
    in.validate(true);
    DecayThreshold d;
    const double nu = in.nu();
    bool first = true;
    for (const auto& k : corners(in)) {
        double t = std::min(in.mu, nu / 2) - k.p1 / k.f;
        double r = std::min(nu / (2 * k.f), in.mu) - k.p1;
        double e = (std::min(in.mu, nu / 2) - k.p1) / k.f;
        if (first) {
            d.theorem_form = t;
            d.remark_form = r;
            d.kerr_text_form = e;
            first = false;
        } else {
            d.theorem_form = std::min(d.theorem_form, t);
            d.remark_form = std::min(d.remark_form, r);
            d.kerr_text_form = std::min(d.kerr_text_form, e);
        }
    }
    const double hi = std::max({d.theorem_form, d.remark_form, d.kerr_text_form});
    const double lo = std::min({d.theorem_form, d.remark_form, d.kerr_text_form});
    d.disagree = hi - lo > 1e-12 * (1.0 + std::fabs(hi));
    if (in.l) {
        d.l_ok_theorem = *in.l < d.theorem_form;
        d.l_ok_remark = *in.l < d.remark_form;
        d.l_ok_kerr_text = *in.l < d.kerr_text_form;
    }
    return d;
}

RadialBound radial_threshold(double g, double f, double p1, int m, double l, RadialKind kind,
                             int sign, std::optional<double> s) {
    if (g == 0.0 || !std::isfinite(g))
        throw std::invalid_argument("not a radial set: g = 0 gives degenerate estimates");
    if (sign != 1 && sign != -1) throw std::invalid_argument("sign must be +1 or -1");
    RadialBound r;
    r.kind = kind;
    r.sign = sign;
    r.g = g;
    const double lf = kind == RadialKind::Saddle ? -l * f : l * f;
    // a s + b > 0 with a = g
    const double b = -(m - 1) / 2.0 * g + lf - sign * p1;
    r.bound = -b / g;
    r.lower = g > 0;
    r.formula = std::string("(s - (m-1)/2) g ") + (kind == RadialKind::Saddle ? "- " : "+ ") +
                "l f " + (sign > 0 ? "- " : "+ ") + "p1 > 0";
    if (s) {
        r.control_at_s = g * *s + b > 0;
        r.control_at_s_minus_2 = g * (*s - 2) + b > 0;
    }
    return r;
}

KerrSaddleReport kerr_saddle_condition(const KerrDSParams& k, double l, double p1, double theta,
                                       std::optional<double> s) {
    KerrHorizons h = kerr_ds_horizons(k);
    if (!h.subextremal) throw ModelError("kerr saddle: " + h.verdict);
    KerrSaddleReport rep;
    const double lam = k.lambda();
    const double c2 = std::cos(theta) * std::cos(theta);
    // upper sign at L+, lower at L-
    for (int side : {-1, 1}) {
        KerrSaddleSide d;
        d.name = side < 0 ? "L-" : "L+";
        d.r = side < 0 ? h.r_minus : h.r_plus;
        d.dmu = kerr_dmu(d.r, k);
        const double adm = std::fabs(d.dmu);
        const double r2 = d.r * d.r;
        d.bound = 2.5 + 2 * (1 + lam) * (r2 + k.a * k.a) * l / adm -
                  side * (r2 + k.a * k.a * c2) * p1 / adm;
        rep.sides.push_back(d);
    }
    rep.worst = std::max(rep.sides[0].bound, rep.sides[1].bound);
    if (s) rep.holds = *s > rep.worst;
    return rep;
}

ClosedFredholm closed_fredholm_conditions(const ThresholdInput& in, double s) {
    in.validate(false);
    ClosedFredholm c;
    const double nu = in.nu();
    const double m = in.m;
    bool first = true;
    auto eval = [&](double ss, const Corner& k) {
        return std::make_pair(nu / 2 - (k.p1 + (ss - (m - 1) / 2) * k.g),
                              nu - (k.p1 + (ss - (m - 3) / 2) * k.g));
    };
    for (const auto& k : corners(in)) {
        auto [a, b] = eval(s, k);
        auto [ap, bp] = eval(s - 1, k);
        if (first) {
            c.slack1 = a, c.slack2 = b, c.slack1_prev = ap, c.slack2_prev = bp;
            first = false;
        } else {
            c.slack1 = std::min(c.slack1, a);
            c.slack2 = std::min(c.slack2, b);
            c.slack1_prev = std::min(c.slack1_prev, ap);
            c.slack2_prev = std::min(c.slack2_prev, bp);
        }
        c.s_range = c.s_range
                        .intersect(solve_linear(-k.g, nu / 2 - k.p1 + (m - 1) / 2 * k.g))
                        .intersect(solve_linear(-k.g, nu - k.p1 + (m - 3) / 2 * k.g));
    }
    c.holds = c.slack1 > 0 && c.slack2 > 0;
    c.holds_prev = c.slack1_prev > 0 && c.slack2_prev > 0;
    return c;
}

}  // namespace nht
