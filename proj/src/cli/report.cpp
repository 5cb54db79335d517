#include "nht/run.hpp"

#include <cmath>

namespace nht {

namespace {

// JSON has no inf/nan; they become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <class T>
json opt(const std::optional<T>& v) {
    if (!v) return nullptr;
    if constexpr (std::is_same_v<T, double>) return num(*v);
    else return json(*v);
}

json nums(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

json interval(const Interval& i) { return {{"lo", num(i.lo)}, {"hi", num(i.hi)}}; }

json complex_list(const std::vector<std::complex<double>>& v) {
    json a = json::array();
    for (const auto& c : v) a.push_back({num(c.real()), num(c.imag())});
    return a;
}

json matrix(const Mat& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(num(m(i, k)));
        a.push_back(row);
    }
    return a;
}

json escape_json(const EscapeReport& e) {
    json v = json::array();
    for (std::size_t i = 0; i < e.violations.size() && i < 20; ++i)
        v.push_back({{"z", to_json(e.violations[i].z)},
                     {"Hf", num(e.violations[i].Hf)},
                     {"H2f", num(e.violations[i].H2f)},
                     {"patch", e.violations[i].patch}});
    return {{"degenerate", e.degenerate},
            {"diagnosis", e.diagnosis},
            {"degenerate_fraction", num(e.degenerate_fraction)},
            {"requested", e.requested},
            {"checked", e.checked},
            {"projection_failures", e.projection_failures},
            {"near_omega", e.near_omega},
            {"uncovered", e.uncovered},
            {"per_patch", e.per_patch},
            {"min_H2f", num(e.min_H2f)},
            {"violation_count", e.violations.size()},
            {"violations", v},
            {"eps0", num(e.options.eps0)},
            {"eps1", num(e.options.eps1)},
            {"omega_radius", num(e.options.omega_radius)}};
}

json lin_json(const NormalLinearization& l) {
    return {{"valid", l.valid},
            {"error", l.error},
            {"frame", l.frame},
            {"frame_functions", l.frame_str},
            {"A", matrix(l.A)},
            {"eigenvalues", complex_list(l.eigenvalues)},
            {"fit_residual", num(l.fit_residual)},
            {"rho_alternate", l.rho_alternate}};
}

json defining_side(const DefiningSide& s) {
    return {{"phi", s.phi},
            {"max_residual", num(s.max_residual)},
            {"mean_residual", num(s.mean_residual)},
            {"w_min", num(s.w_min)},
            {"w_max", num(s.w_max)},
            {"max_supplied_residual", s.has_supplied ? num(s.max_supplied_residual) : json(nullptr)},
            {"checked", s.checked},
            {"failures", s.failures},
            {"invalid", s.invalid},
            {"diagnosis", s.diagnosis}};
}

json rates_json(const Rates& r) {
    json normal = json::array();
    for (const auto& n : r.normal_checks)
        normal.push_back({{"z", to_json(n.z)},
                          {"T", num(n.T)},
                          {"exponents", nums(n.exponents)},
                          {"eigenvalues", nums(n.eigenvalues)},
                          {"max_rel_diff", num(n.max_rel_diff)}});
    json tang = json::array();
    for (const auto& t : r.tangential)
        tang.push_back({{"z", to_json(t.z)}, {"T", nums(t.T)}, {"beta", nums(t.beta)}});
    return {{"nu_u", num(r.nu_u)},
            {"nu_s", num(r.nu_s)},
            {"nu", num(std::min(r.nu_u, r.nu_s))},
            {"eig_spread", num(r.eig_spread)},
            {"flow_constant", r.flow_constant},
            {"dim_u", r.dim_u},
            {"dim_s", r.dim_s},
            {"normal_checks", normal},
            {"normal_max_rel_diff", num(r.normal_max_rel_diff)},
            {"tangential", tang},
            {"T_beta", nums(r.T_beta)},
            {"beta", nums(r.beta)},
            {"beta_extrapolated", num(r.beta_extrapolated)},
            {"beta_decreasing", r.beta_decreasing},
            {"beta_samples", r.beta_samples},
            {"error", r.error}};
}

const char* kind_name(RadialKind k) {
    switch (k) {
        case RadialKind::Source: return "source";
        case RadialKind::Sink: return "sink";
        case RadialKind::Saddle: return "saddle";
    }
    return "?";
}

// value or [lo, hi]
std::pair<double, double> numrange(const json& j) {
    if (j.is_array()) return {j[0].get<double>(), j[1].get<double>()};
    return {j.get<double>(), j.get<double>()};
}

}  // namespace

json to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
    return a;
}

json to_json(const TrappingCertificate& c, const ModelBundle& b) {
    json j;
    j["model"] = {{"id", c.model_id},
                  {"kind", b.kind},
                  {"coordinates", b.model.chart.coords()},
                  {"degree", b.model.m},
                  {"mu", num(b.model.mu)}};
    j["verdict"] = c.verdict;
    j["notes"] = c.notes;
    j["all_r"] = c.all_r;
    j["r_max"] = opt(c.r_max);
    j["escape"] = c.escape ? escape_json(*c.escape) : json(nullptr);

    const LocateReport& L = c.located;
    json pts = json::array();
    for (std::size_t i = 0; i < L.points.size(); ++i)
        pts.push_back({{"z", to_json(L.points[i])},
                       {"residual", num(L.residuals[i])},
                       {"label", i < c.classes.samples.size() ? c.classes.samples[i].label : ""},
                       {"g", i < c.classes.samples.size() ? num(c.classes.samples[i].g) : json(nullptr)}});
    j["invariant"] = {{"seeds", L.seeds},
                      {"converged", L.converged},
                      {"nonconvergent", L.nonconvergent},
                      {"singular", L.singular},
                      {"out_of_domain", L.out_of_domain},
                      {"merged", L.merged},
                      {"points", pts}};

    json comps = json::array();
    for (const auto& comp : c.classes.components) {
        json cj = {{"kind", comp.kind},
                   {"size", comp.members.size()},
                   {"diagnosis", comp.diagnosis},
                   {"g_min", num(comp.g_min)},
                   {"g_max", num(comp.g_max)}};
        if (!comp.members.empty()) {
            const SampleClass& s = c.classes.samples[comp.members.front()];
            cj["representative"] = {{"z", to_json(L.points[comp.members.front()])},
                                    {"frequency_weight", num(s.frequency_weight)},
                                    {"linearization", lin_json(s.lin)}};
        }
        comps.push_back(cj);
    }
    j["components"] = comps;
    j["trapped_component"] = c.trapped_component;
    j["gamma_samples"] = c.gamma.size();
    j["rates"] = c.rates ? rates_json(*c.rates) : json(nullptr);
    j["g_max"] = num(c.g_max);
    j["f_transversal"] = {{"min", opt(c.f_transversal_min)}, {"max", opt(c.f_transversal_max)}};
    json sym = json::array();
    for (const auto& s : c.symplectic)
        sym.push_back({{"dim", s.dim},
                       {"rank", s.rank},
                       {"bracket_rank", s.bracket_rank},
                       {"bracket_min_sv", num(s.bracket_min_sv)},
                       {"symplectic", s.symplectic}});
    j["symplectic"] = {{"ok", c.symplectic_ok}, {"checks", sym}};
    if (c.defining)
        j["defining"] = {{"u", defining_side(c.defining->u)},
                         {"s", defining_side(c.defining->s)},
                         {"requested", c.defining->requested},
                         {"rejected_off_char", c.defining->rejected_off_char}};
    else
        j["defining"] = nullptr;
    j["max_residual"] = num(c.max_residual);
    return j;
}

json to_json(const ThresholdReport& r) {
    json conds = json::array();
    for (const auto& c : r.conditions)
        conds.push_back({{"name", c.name},
                         {"formula", c.formula},
                         {"s_range", interval(c.s_range)},
                         {"slack", opt(c.slack)}});
    return {{"theorem", r.theorem},
            {"verdict", r.verdict},
            {"feasible", r.feasible},
            {"s_range", interval(r.s_range)},
            {"s0", opt(r.s0)},
            {"l_max", opt(r.l_max)},
            {"conditions", conds},
            {"notes", r.notes},
            {"holds", opt(r.holds)}};
}

json to_json(const BThresholds& b) {
    return {{"with_tau", to_json(b.with_tau)},
            {"stationary", to_json(b.stationary)},
            {"l_sup", opt(b.l_sup)},
            {"l_sup_stationary", opt(b.l_sup_stationary)},
            {"l_sup_with_adjoint", opt(b.l_sup_with_adjoint)}};
}

json to_json(const DecayThreshold& d) {
    return {{"theorem_form", num(d.theorem_form)},
            {"remark_form", num(d.remark_form)},
            {"kerr_text_form", num(d.kerr_text_form)},
            {"disagree", d.disagree},
            {"l_ok_theorem", opt(d.l_ok_theorem)},
            {"l_ok_remark", opt(d.l_ok_remark)},
            {"l_ok_kerr_text", opt(d.l_ok_kerr_text)}};
}

json to_json(const RadialBound& r) {
    return {{"kind", kind_name(r.kind)},
            {"sign", r.sign},
            {"g", num(r.g)},
            {"bound", num(r.bound)},
            {"direction", r.lower ? "s > bound" : "s < bound"},
            {"formula", r.formula},
            {"control_at_s", opt(r.control_at_s)},
            {"control_at_s_minus_2", opt(r.control_at_s_minus_2)}};
}

json to_json(const KerrSaddleReport& k) {
    json sides = json::array();
    for (const auto& s : k.sides)
        sides.push_back({{"name", s.name}, {"r", num(s.r)}, {"dmu", num(s.dmu)}, {"bound", num(s.bound)}});
    return {{"sides", sides}, {"worst", num(k.worst)}, {"holds", opt(k.holds)}};
}

json to_json(const ClosedFredholm& c) {
    return {{"slack1", num(c.slack1)},
            {"slack2", num(c.slack2)},
            {"slack1_prev", num(c.slack1_prev)},
            {"slack2_prev", num(c.slack2_prev)},
            {"holds", c.holds},
            {"holds_prev", c.holds_prev},
            {"s_range", interval(c.s_range)}};
}

json to_json(const ThresholdInput& in) {
    return {{"nu_u", num(in.nu_u)},
            {"nu_s", num(in.nu_s)},
            {"beta", num(in.beta)},
            {"g", {num(in.g_lo), num(in.g_hi)}},
            {"f", {num(in.f_lo), num(in.f_hi)}},
            {"p1", {num(in.p1_lo), num(in.p1_hi)}},
            {"m", in.m},
            {"mu", num(in.mu)},
            {"l", opt(in.l)},
            {"s", opt(in.s)}};
}

ThresholdInput threshold_input_from(const TrappingCertificate& c, const ModelBundle& b) {
    if (!c.rates || c.trapped_component < 0)
        throw std::invalid_argument("certificate has no trapped component with rates");
    ThresholdInput in;
    in.nu_u = c.rates->nu_u;
    in.nu_s = c.rates->nu_s;
    in.beta = c.rates->beta_extrapolated;
    const Component& comp = c.classes.components[c.trapped_component];
    in.g_lo = comp.g_min;
    in.g_hi = comp.g_max;
    if (c.f_transversal_min) {
        in.f_lo = *c.f_transversal_min;
        in.f_hi = *c.f_transversal_max;
    }
    // p1 enters rescaled to degree zero: p1 / rho^(m-1)
    if (b.model.p1) {
        Compiled p1 = b.model.compile(*b.model.p1);
        Compiled rho = b.model.compile(b.model.rho);
        bool first = true;
        for (const Vec& z : c.gamma) {
            const double v = p1(z) / std::pow(rho(z), b.model.m - 1);
            in.p1_lo = first ? v : std::min(in.p1_lo, v);
            in.p1_hi = first ? v : std::max(in.p1_hi, v);
            first = false;
        }
    }
    in.m = b.model.m;
    in.mu = b.model.mu;
    return in;
}

ThresholdBundle evaluate_thresholds(const ThresholdInput& in0, const ModelBundle& b,
                                    const json& extra) {
    ThresholdInput in = in0;
    if (extra.contains("l")) in.l = extra["l"].get<double>();
    if (extra.contains("s")) in.s = extra["s"].get<double>();

    ThresholdBundle out;
    json& r = out.report;
    r["input"] = to_json(in);
    const bool b_model = b.model.chart.has_boundary();
    const bool f_ok = in.f_lo > 0;

    if (b_model) {
        BThresholds bt = b_thresholds(in);
        r["b"] = to_json(bt);
        out.feasible = bt.with_tau.feasible;
        out.verdict = bt.with_tau.verdict;
        if (bt.with_tau.holds && !*bt.with_tau.holds) out.feasible = false;
    } else {
        ThresholdReport ct = closed_thresholds(in);
        r["closed"] = to_json(ct);
        out.feasible = ct.feasible;
        out.verdict = ct.verdict;
        if (ct.holds && !*ct.holds) out.feasible = false;
        if (in.s) r["closed_fredholm"] = to_json(closed_fredholm_conditions(in, *in.s));
    }
    if (f_ok) r["decay"] = to_json(decay_threshold(in));
    else r["decay"] = nullptr;

    json radial = json::array();
    if (extra.contains("radial"))
        for (const auto& rj : extra["radial"]) {
            const std::string k = rj["kind"].get<std::string>();
            const RadialKind kind = k == "source" ? RadialKind::Source
                                    : k == "sink" ? RadialKind::Sink
                                                  : RadialKind::Saddle;
            const auto g = rj["g"].get<double>();
            if (g == 0) throw ConfigError("/options/thresholds/radial", "g must be nonzero at a radial set");
            RadialBound rb = radial_threshold(g, rj.value("f", in.f_lo), rj.value("p1", in.p1_lo), in.m,
                                              in.l.value_or(0.0), kind, rj["sign"].get<int>(), in.s);
            json rjson = to_json(rb);
            rjson["name"] = rj.value("name", k);
            radial.push_back(rjson);
        }
    r["radial"] = radial;

    if (b.kerr) {
        const json ks = extra.value("kerr_saddle", json::object());
        const double l = ks.value("l", in.l.value_or(0.0));
        const double p1 = ks.value("p1", 0.0);
        const double theta = ks.value("theta", 1.5707963267948966);
        KerrSaddleReport k = kerr_saddle_condition(*b.kerr, l, p1, theta, in.s);
        r["kerr_saddle"] = to_json(k);
        if (k.holds && !*k.holds) out.feasible = false;
    } else {
        r["kerr_saddle"] = nullptr;
    }
    r["feasible"] = out.feasible;
    r["verdict"] = out.verdict;
    return out;
}

ThresholdInput manual_threshold_input(const json& t, const ModelBundle& b) {
    const std::string P = "/options/thresholds";
    if (!t.contains("nu_u") || !t.contains("nu_s"))
        throw ConfigError(P + (t.contains("nu_u") ? "/nu_s" : "/nu_u"),
                          "required when thresholds come from manual input");
    ThresholdInput in;
    in.nu_u = t["nu_u"].get<double>();
    in.nu_s = t["nu_s"].get<double>();
    in.beta = t.value("beta", 0.0);
    if (t.contains("g")) std::tie(in.g_lo, in.g_hi) = numrange(t["g"]);
    if (t.contains("f")) std::tie(in.f_lo, in.f_hi) = numrange(t["f"]);
    if (t.contains("p1")) std::tie(in.p1_lo, in.p1_hi) = numrange(t["p1"]);
    for (const char* k : {"g", "f", "p1"})
        if (t.contains(k) && t[k].is_array() && t[k][0].get<double>() > t[k][1].get<double>())
            throw ConfigError(P + "/" + k, "range needs lo <= hi");
    if (in.f_lo <= 0) throw ConfigError(P + "/f", "f must be positive");
    in.m = t.value("m", b.model.m);
    in.mu = b.model.mu;
    return in;
}

std::vector<std::string> threshold_table(const json& report) {
    struct Row {
        std::string cond, formula, range, slack;
    };
    std::vector<Row> rows{{"condition", "formula", "s range", "slack"}};
    auto fmt = [](const json& v) { return v.is_null() ? std::string("inf") : format_bound(v.get<double>()); };
    auto add = [&](const std::string& prefix, const json& tr) {
        for (const auto& c : tr["conditions"])
            rows.push_back({prefix + c["name"].get<std::string>(), c["formula"].get<std::string>(),
                            "(" + (c["s_range"]["lo"].is_null() ? std::string("-inf") : fmt(c["s_range"]["lo"])) +
                                ", " + fmt(c["s_range"]["hi"]) + ")",
                            c["slack"].is_null() ? "-" : format_bound(c["slack"].get<double>())});
    };
    if (report.contains("closed")) add("", report["closed"]);
    if (report.contains("b")) {
        add("with_tau/", report["b"]["with_tau"]);
        add("stationary/", report["b"]["stationary"]);
    }
    std::size_t w[3] = {0, 0, 0};
    for (const auto& r : rows) {
        w[0] = std::max(w[0], r.cond.size());
        w[1] = std::max(w[1], r.formula.size());
        w[2] = std::max(w[2], r.range.size());
    }
    std::vector<std::string> out;
    for (const auto& r : rows)
        out.push_back(r.cond + std::string(w[0] - r.cond.size() + 2, ' ') + r.formula +
                      std::string(w[1] - r.formula.size() + 2, ' ') + r.range +
                      std::string(w[2] - r.range.size() + 2, ' ') + r.slack);
    return out;
}

}  // namespace nht
