#include "nht/run.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace nht {

namespace {

namespace fs = std::filesystem;

struct Context {
    json cfg;
    json options;
    ModelBundle b;
    std::uint64_t seed = 0;
    fs::path out;
    bool portrait = true;
    bool trajectories = true;
    RunResult* res = nullptr;
    std::map<std::string, std::string> reports;

    void write(const std::string& name, const std::string& content) {
        fs::create_directories(out);
        const fs::path p = out / name;
        std::ofstream os(p, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + p.string());
        os << content;
        if (!os) throw std::runtime_error("write failed: " + p.string());
        res->written.push_back(p.string());
    }
    void write_json(const std::string& name, const json& j) {
        const std::string text = j.dump(2) + "\n";
        write(name, text);
        reports[name] = text;
    }
    void log(const std::string& s) { res->log.push_back(s); }
    json sub(const char* key) const { return options.value(key, json::object()); }
};

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json header(const Context& c, const std::string& task) {
    return {{"task", task},
            {"tool", version_string()},
            {"seed", c.seed},
            {"model", {{"id", c.b.model.id},
                       {"kind", c.b.kind},
                       {"coordinates", c.b.model.chart.coords()},
                       {"symbol", c.b.model.p.str()},
                       {"degree", c.b.model.m},
                       {"mu", c.b.model.mu}}}};
}

// ---- portraits ----

std::vector<std::array<double, 2>> curve_of(const ModelBundle& b, const std::string& kind,
                                            const Trajectory& tr) {
    std::vector<std::array<double, 2>> out;
    out.reserve(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i) out.push_back(portrait_coords(b, kind, tr.z[i], tr.t[i]));
    return out;
}

FlowOptions sketch_flow_options(const ModelBundle& b) {
    FlowOptions o;
    o.renormalize = true;
    o.events = exit_regions(b);
    o.sample_dt = 0.05;
    return o;
}

// Short orbits leaving the neighbourhood of Ω, both directions, for the sketch.
std::vector<std::vector<std::array<double, 2>>> sketch_curves(const ModelBundle& b,
                                                              const std::string& kind,
                                                              const std::vector<Vec>& omega,
                                                              std::uint64_t seed) {
    std::vector<std::vector<std::array<double, 2>>> out;
    if (omega.empty()) return out;
    HamiltonianField H(b.model, true, momentum_norm(b.model.chart));
    CharSampler sampler(b, seed);
    std::normal_distribution<double> nd(0.0, 1e-2);
    const FlowOptions o = sketch_flow_options(b);
    const std::size_t n = std::min<std::size_t>(omega.size(), 12);
    const auto mask = b.pinned_mask();
    for (std::size_t i = 0; i < n; ++i) {
        Vec z = omega[i * omega.size() / n];
        for (int k = 0; k < z.size(); ++k)
            if (!mask[k]) z[k] += nd(sampler.rng());
        auto p = sampler.project(z);
        if (!p) continue;
        for (double T : {8.0, -8.0}) {
            try {
                out.push_back(curve_of(b, kind, integrate(H, *p, 0, T, o)));
            } catch (const std::exception&) {
                // an orbit that cannot be continued is left out of the sketch
            }
        }
    }
    return out;
}

void emit_portrait(Context& c, const std::string& title, std::vector<std::vector<std::array<double, 2>>> curves,
                   const std::vector<Vec>& gamma, const std::vector<Vec>& other) {
    if (!c.portrait || c.b.portrait.empty()) return;
    PortraitData p;
    p.kind = c.b.portrait;
    p.title = title;
    p.curves = std::move(curves);
    for (const Vec& z : gamma) p.gamma.push_back(portrait_coords(c.b, p.kind, z, 0.0));
    for (const Vec& z : other) p.radial.push_back(portrait_coords(c.b, p.kind, z, 0.0));
    c.write("portrait.svg", render_svg(p));
}

// ---- parse-check ----

int task_parse_check(Context& c) {
    json rep = header(c, "parse-check");
    json rows = json::array();
    bool ok = true;
    std::vector<std::string> exprs;
    const json pc = c.sub("parse_check");
    if (pc.contains("expressions")) exprs = pc["expressions"].get<std::vector<std::string>>();
    for (const auto& text : exprs) {
        json row = {{"text", text}};
        try {
            Expr e = Expr::parse(text);
            row["ok"] = true;
            row["canonical"] = e.str();
            try {
                (void)c.b.model.compile(e);
            } catch (const BindError& be) {
                row["ok"] = false;
                row["error"] = be.what();
                row["unbound"] = be.name();
                ok = false;
            }
        } catch (const SyntaxError& e) {
            ok = false;
            row["ok"] = false;
            row["error"] = e.what();
            row["offset"] = e.offset();
            row["expected"] = e.expected();
        }
        rows.push_back(row);
    }
    rep["expressions"] = rows;
    // model expressions were parsed while loading; report the homogeneity of p
    CharSampler s(c.b, c.seed);
    std::vector<Vec> pts;
    for (int i = 0; i < 32; ++i) pts.push_back(s.raw());
    const double defect = homogeneity_defect(c.b.model, pts);
    rep["homogeneity_defect"] = defect;
    rep["ok"] = ok;
    c.write_json("parse_check.json", rep);
    c.log("parse-check: " + std::to_string(rows.size()) + " expressions, " + (ok ? "all ok" : "errors found"));
    c.log("homogeneity defect of p: " + g17(defect));
    c.res->verdict = ok ? "ok" : "parse errors";
    if (!ok) {
        c.res->error = "parse-check failed";
        for (const auto& r : rows)
            if (!r["ok"].get<bool>())
                c.res->error += "\n  '" + r["text"].get<std::string>() + "': " + r["error"].get<std::string>();
    }
    return ok ? 0 : 1;
}

// ---- flow ----

int task_flow(Context& c) {
    const json fo = c.sub("flow");
    const double T = fo.value("T", 10.0);
    const Chart& ch = c.b.model.chart;
    const std::string rescale = fo.value("rescale", std::string("momentum-norm"));
    std::unique_ptr<HamiltonianField> H;
    if (rescale == "momentum-norm") H = std::make_unique<HamiltonianField>(c.b.model, true, momentum_norm(ch));
    else H = std::make_unique<HamiltonianField>(c.b.model, rescale == "model");

    std::vector<Vec> starts;
    if (fo.contains("points")) {
        for (std::size_t i = 0; i < fo["points"].size(); ++i) {
            const auto v = fo["points"][i].get<std::vector<double>>();
            if (static_cast<int>(v.size()) != ch.dim())
                throw ConfigError("/options/flow/points/" + std::to_string(i),
                                  "needs " + std::to_string(ch.dim()) + " coordinates");
            starts.push_back(Eigen::Map<const Vec>(v.data(), ch.dim()));
        }
    } else {
        CharSampler s(c.b, c.seed);
        const int n = fo.value("starts", 4);
        for (int i = 0; i < n; ++i) {
            auto z = s.sample();
            if (z) starts.push_back(*z);
        }
        if (starts.empty()) throw std::runtime_error("flow: no starting points on Char(p)");
    }

    FlowOptions o;
    o.rtol = fo.value("rtol", o.rtol);
    o.atol = fo.value("atol", o.atol);
    o.renormalize = rescale != "none";
    o.monitor = c.b.model.compile(c.b.model.p);
    o.monitor_degree = c.b.model.m;
    o.events = exit_regions(c.b);
    o.sample_dt = fo.value("sample_dt", 0.05);
    const bool backward = fo.value("backward", false);

    json rep = header(c, "flow");
    rep["T"] = T;
    rep["rescale"] = rescale;
    json runs = json::array();
    std::vector<std::vector<std::array<double, 2>>> curves;
    int failed = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k < starts.size(); ++k) {
        json rj = {{"k", k}, {"start", to_json(starts[k])}};
        try {
            Trajectory tr = integrate(*H, starts[k], 0, T, o);
            const double p0 = std::fabs(o.monitor->operator()(starts[k]));
            rj["t_end"] = tr.t.back();
            rj["end"] = to_json(tr.back());
            rj["steps"] = tr.steps;
            rj["rejected"] = tr.rejected;
            rj["max_drift"] = tr.max_drift;
            rj["drift_bound"] = 1e-8 * (1 + p0);
            worst = std::max(worst, tr.max_drift / (1 + p0));
            json ev = json::array();
            for (const auto& e : tr.events) ev.push_back({{"region", e.region}, {"t", e.t}, {"z", to_json(e.z)}});
            rj["events"] = ev;
            if (backward) {
                FlowOptions ob = o;
                ob.monitor.reset();
                ob.events.clear();
                ob.sample_dt = 0;
                Trajectory back = integrate(*H, tr.back(), tr.t.back(), 0, ob);
                rj["return_error"] = (back.back() - starts[k]).head(ch.n()).cwiseAbs().maxCoeff();
            }
            if (c.trajectories) {
                std::ostringstream os;
                write_csv(os, tr, ch.coords());
                c.write("trajectory_" + std::to_string(k) + ".csv", os.str());
            }
            if (!c.b.portrait.empty()) curves.push_back(curve_of(c.b, c.b.portrait, tr));
        } catch (const std::exception& e) {
            ++failed;
            rj["error"] = e.what();
        }
        runs.push_back(rj);
    }
    rep["trajectories"] = runs;
    rep["max_relative_drift"] = worst;
    c.write_json("flow.json", rep);
    emit_portrait(c, c.b.model.id + ": trajectories", std::move(curves), {}, {});
    c.log("flow: " + std::to_string(starts.size() - failed) + "/" + std::to_string(starts.size()) +
          " trajectories, max relative p drift " + g17(worst));
    c.res->verdict = failed == static_cast<int>(starts.size()) ? "all trajectories failed" : "ok";
    return failed == static_cast<int>(starts.size()) ? 1 : 0;
}

// ---- find-invariant ----

struct Located {
    LocateReport rep;
    Classification cls;
    int trapped = -1;
};

Located locate_and_classify(const Context& c) {
    const CertifyOptions co = certify_options_from(c.options, c.seed);
    Located L;
    L.rep = locate_invariant_set(c.b, co.locate);
    L.cls = classify_invariant_set(c.b, L.rep.points, co.classify);
    for (std::size_t i = 0; i < L.cls.components.size(); ++i)
        if (L.cls.components[i].kind == "trapped") {
            L.trapped = static_cast<int>(i);
            break;
        }
    return L;
}

std::vector<Vec> members(const Located& L, int comp) {
    std::vector<Vec> out;
    if (comp < 0) return out;
    for (int i : L.cls.components[comp].members) out.push_back(L.rep.points[i]);
    return out;
}

int task_find_invariant(Context& c) {
    Located L = locate_and_classify(c);
    json rep = header(c, "find-invariant");
    json pts = json::array();
    for (std::size_t i = 0; i < L.rep.points.size(); ++i)
        pts.push_back({{"z", to_json(L.rep.points[i])},
                       {"residual", L.rep.residuals[i]},
                       {"label", L.cls.samples[i].label},
                       {"g", L.cls.samples[i].g}});
    rep["seeds"] = L.rep.seeds;
    rep["converged"] = L.rep.converged;
    rep["nonconvergent"] = L.rep.nonconvergent;
    rep["singular"] = L.rep.singular;
    rep["out_of_domain"] = L.rep.out_of_domain;
    rep["merged"] = L.rep.merged;
    rep["points"] = pts;
    json comps = json::array();
    for (const auto& comp : L.cls.components)
        comps.push_back({{"kind", comp.kind},
                         {"size", comp.members.size()},
                         {"g_min", comp.g_min},
                         {"g_max", comp.g_max},
                         {"diagnosis", comp.diagnosis}});
    rep["components"] = comps;
    rep["trapped_component"] = L.trapped;
    const int ri = c.b.model.chart.index("r");
    if (c.b.kerr && ri >= 0 && L.trapped >= 0) {
        double lo = INFINITY, hi = -INFINITY;
        for (const Vec& z : members(L, L.trapped)) lo = std::min(lo, z[ri]), hi = std::max(hi, z[ri]);
        rep["trapped_r"] = {{"min", lo}, {"max", hi}};
        c.log("trapped r in [" + g17(lo) + ", " + g17(hi) + "]");
    }
    c.write_json("invariant.json", rep);

    std::vector<Vec> others;
    for (std::size_t i = 0; i < L.cls.components.size(); ++i)
        if (static_cast<int>(i) != L.trapped)
            for (const Vec& z : members(L, static_cast<int>(i))) others.push_back(z);
    if (c.portrait && !c.b.portrait.empty())
        emit_portrait(c, c.b.model.id + ": invariant set", sketch_curves(c.b, c.b.portrait, L.rep.points, c.seed),
                      members(L, L.trapped), others);
    c.log("find-invariant: " + std::to_string(L.rep.points.size()) + " points, " +
          std::to_string(L.cls.components.size()) + " components");
    if (L.rep.points.empty()) {
        c.res->verdict = "no invariant points located";
        return 2;
    }
    c.res->verdict = L.trapped >= 0 ? "trapped component located" : "no trapped component";
    return 0;
}

// ---- certify ----

bool certified(const std::string& verdict) { return verdict.rfind("NHT-certified", 0) == 0; }

int task_certify(Context& c) {
    const CertifyOptions co = certify_options_from(c.options, c.seed);
    TrappingCertificate cert = certify_nht(c.b, co);
    json rep = header(c, "certify");
    json body = to_json(cert, c.b);
    for (auto it = body.begin(); it != body.end(); ++it)
        if (it.key() != "model") rep[it.key()] = it.value();
    c.log("verdict: " + cert.verdict);
    if (cert.rates) c.log("nu_u = " + g17(cert.rates->nu_u) + ", nu_s = " + g17(cert.rates->nu_s));

    if (cert.trapped_component >= 0 && cert.rates && cert.rates->error.empty()) {
        ThresholdInput in = threshold_input_from(cert, c.b);
        ThresholdBundle tb = evaluate_thresholds(in, c.b, c.sub("thresholds"));
        rep["thresholds"] = tb.report;
        json tj = header(c, "thresholds");
        tj["source"] = "certificate";
        for (auto it = tb.report.begin(); it != tb.report.end(); ++it) tj[it.key()] = it.value();
        c.write_json("thresholds.json", tj);
        for (const auto& line : threshold_table(tb.report)) c.log(line);
        c.log("thresholds: " + tb.verdict);
    } else {
        rep["thresholds"] = nullptr;
    }
    c.write_json("certificate.json", rep);

    std::vector<Vec> others;
    for (std::size_t i = 0; i < cert.located.points.size(); ++i)
        if (cert.classes.samples[i].label.rfind("radial", 0) == 0 || cert.classes.samples[i].label == "saddle")
            others.push_back(cert.located.points[i]);
    if (c.portrait && !c.b.portrait.empty())
        emit_portrait(c, c.b.model.id + ": " + cert.verdict,
                      sketch_curves(c.b, c.b.portrait, cert.located.points, c.seed), cert.gamma, others);
    c.res->verdict = cert.verdict;
    return certified(cert.verdict) ? 0 : 2;
}

// ---- thresholds ----

int task_thresholds(Context& c) {
    const json t = c.sub("thresholds");
    const std::string from = t.value("from", std::string(t.contains("nu_u") ? "manual" : "certificate"));
    ThresholdInput in;
    json rep = header(c, "thresholds");
    rep["source"] = from;
    if (from == "manual") {
        in = manual_threshold_input(t, c.b);
    } else {
        TrappingCertificate cert = certify_nht(c.b, certify_options_from(c.options, c.seed));
        rep["certificate_verdict"] = cert.verdict;
        if (cert.trapped_component < 0 || !cert.rates || !cert.rates->error.empty()) {
            rep["feasible"] = false;
            rep["verdict"] = "inconclusive: " + cert.verdict;
            c.write_json("thresholds.json", rep);
            c.res->verdict = rep["verdict"];
            return 2;
        }
        in = threshold_input_from(cert, c.b);
    }
    try {
        in.validate(true);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("/options/thresholds", e.what());
    }
    ThresholdBundle tb = evaluate_thresholds(in, c.b, t);
    for (auto it = tb.report.begin(); it != tb.report.end(); ++it) rep[it.key()] = it.value();
    c.write_json("thresholds.json", rep);
    for (const auto& line : threshold_table(tb.report)) c.log(line);
    c.log("thresholds: " + tb.verdict);
    c.res->verdict = tb.verdict;
    return tb.feasible ? 0 : 2;
}

// ---- compare-paper ----

struct Row {
    std::string quantity;
    double computed, reference, tolerance;
};

int task_compare(Context& c) {
    const json co = c.sub("compare");
    const bool tol_override = co.contains("tolerance");
    auto tol = [&](double d) { return tol_override ? co["tolerance"].get<double>() : d; };
    std::vector<Row> rows;

    if (c.b.kind == "scattering") {
        Located L = locate_and_classify(c);
        if (L.trapped < 0) throw std::runtime_error("compare-paper: trapped set not located");
        const ScatteringReference ref = scattering_reference_data();
        const int n = c.b.model.chart.n();
        // eigenvalues at Γ, worst sample
        double e_hi = ref.gamma_eigenvalues[0], e_lo = ref.gamma_eigenvalues[1], f_worst = ref.f_transversal;
        for (int i : L.cls.components[L.trapped].members) {
            const auto& s = L.cls.samples[i];
            if (!s.lin.valid) throw std::runtime_error("compare-paper: linearization failed at Γ: " + s.lin.error);
            const double hi = s.lin.eigenvalues.front().real(), lo = s.lin.eigenvalues.back().real();
            if (std::fabs(hi - ref.gamma_eigenvalues[0]) > std::fabs(e_hi - ref.gamma_eigenvalues[0])) e_hi = hi;
            if (std::fabs(lo - ref.gamma_eigenvalues[1]) > std::fabs(e_lo - ref.gamma_eigenvalues[1])) e_lo = lo;
            if (s.has_transversal && std::fabs(-s.transversal - ref.f_transversal) > std::fabs(f_worst - ref.f_transversal))
                f_worst = -s.transversal;
        }
        rows.push_back({"Gamma eigenvalue (unstable)", e_hi, ref.gamma_eigenvalues[0], tol(1e-6)});
        rows.push_back({"Gamma eigenvalue (stable)", e_lo, ref.gamma_eigenvalues[1], tol(1e-6)});
        // R spectrum times sgn(sin 2 theta)
        const int th = c.b.model.chart.index("theta");
        double r_hi = ref.radial_spectrum[0], r_lo = ref.radial_spectrum[1];
        int radial = 0;
        for (std::size_t i = 0; i < L.rep.points.size(); ++i) {
            const auto& s = L.cls.samples[i];
            if (s.label.rfind("radial", 0) != 0 || !s.lin.valid) continue;
            ++radial;
            const double sg = std::sin(2 * L.rep.points[i][th]) > 0 ? 1.0 : -1.0;
            double a = sg * s.lin.eigenvalues.front().real(), b = sg * s.lin.eigenvalues.back().real();
            if (a < b) std::swap(a, b);
            if (std::fabs(a - ref.radial_spectrum[0]) > std::fabs(r_hi - ref.radial_spectrum[0])) r_hi = a;
            if (std::fabs(b - ref.radial_spectrum[1]) > std::fabs(r_lo - ref.radial_spectrum[1])) r_lo = b;
        }
        (void)n;
        if (radial == 0) throw std::runtime_error("compare-paper: radial set not located");
        rows.push_back({"R spectrum sgn(sin 2theta) (larger)", r_hi, ref.radial_spectrum[0], tol(1e-6)});
        rows.push_back({"R spectrum sgn(sin 2theta) (smaller)", r_lo, ref.radial_spectrum[1], tol(1e-6)});
        rows.push_back({"f at Gamma", f_worst, ref.f_transversal, tol(1e-8)});
        const double nu = std::min(std::fabs(e_hi), std::fabs(e_lo));
        const DecayThreshold d =
            decay_threshold(ThresholdInput::constant(nu, nu, 0, 1, 0, c.b.model.m, c.b.model.mu));
        rows.push_back({"l_max at p1 = 0", d.theorem_form, ref.l_max(c.b.model.mu, 0.0), tol(1e-6)});
    } else if (c.b.kind == "kerr-ds") {
        const KerrDSParams& k = *c.b.kerr;
        if (k.a == 0) {
            Located L = locate_and_classify(c);
            if (L.trapped < 0) throw std::runtime_error("compare-paper: trapped set not located");
            const int ri = c.b.model.chart.index("r");
            double worst = 3 * k.M;
            for (const Vec& z : members(L, L.trapped))
                if (std::fabs(z[ri] - 3 * k.M) > std::fabs(worst - 3 * k.M)) worst = z[ri];
            rows.push_back({"trapped radius (photon sphere)", worst, 3 * k.M, tol(1e-6)});
        }
        const KerrSaddleReport ks = kerr_saddle_condition(k, 0, 0, std::numbers::pi / 2);
        for (const auto& s : ks.sides) rows.push_back({"saddle threshold at l = 0, " + s.name, s.bound, 2.5, tol(1e-12)});
    } else if (c.b.kind == "torus") {
        CertifyOptions co2 = certify_options_from(c.options, c.seed);
        co2.check_escape = false;
        co2.check_defining = false;
        TrappingCertificate cert = certify_nht(c.b, co2);
        if (!cert.rates) throw std::runtime_error("compare-paper: " + cert.verdict);
        rows.push_back({"nu_u", cert.rates->nu_u, 1.0, tol(1e-8)});
        rows.push_back({"nu_s", cert.rates->nu_s, 1.0, tol(1e-8)});
        const Component& comp = cert.classes.components[cert.trapped_component];
        const double g = std::fabs(comp.g_min) > std::fabs(comp.g_max) ? comp.g_min : comp.g_max;
        rows.push_back({"g at Gamma", g, 0.0, tol_override ? tol(0) : 0.0});
    } else {
        throw std::runtime_error("compare-paper: no reference data for model kind '" + c.b.kind + "'");
    }

    json rep = header(c, "compare-paper");
    json rj = json::array();
    bool all = true;
    std::size_t w = 0;
    for (const auto& r : rows) w = std::max(w, r.quantity.size());
    for (const auto& r : rows) {
        const double err = std::fabs(r.computed - r.reference);
        const bool pass = err <= r.tolerance;
        all = all && pass;
        rj.push_back({{"quantity", r.quantity},
                      {"computed", r.computed},
                      {"reference", r.reference},
                      {"abs_error", err},
                      {"tolerance", r.tolerance},
                      {"pass", pass}});
        c.log(r.quantity + std::string(w - r.quantity.size() + 2, ' ') + g17(r.computed) + "  ref " +
              g17(r.reference) + "  err " + g17(err) + "  " + (pass ? "PASS" : "FAIL"));
    }
    rep["rows"] = rj;
    rep["pass"] = all;
    c.write_json("compare.json", rep);
    c.res->verdict = all ? "all rows pass" : "mismatch";
    return all ? 0 : 2;
}

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read config '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

const char* version_string() { return "nhtcert 1.0.0"; }

RunResult run(const RunRequest& req) {
    RunResult res;
    try {
        std::string text;
        if (req.config_text) text = *req.config_text;
        else if (req.config_path) text = read_file(*req.config_path);
        else throw std::runtime_error("no configuration given");

        json cfg;
        try {
            cfg = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError("", std::string("invalid JSON: ") + e.what());
        }
        if (req.task && cfg.is_object()) cfg["task"] = *req.task;
        const auto errs = validate_json(config_schema(), cfg);
        if (!errs.empty()) {
            std::string msg = "schema violation";
            for (const auto& e : errs) msg += "\n  " + (e.pointer.empty() ? std::string("/") : e.pointer) + ": " + e.message;
            res.error = msg;
            res.exit_code = 1;
            return res;
        }

        Context c;
        c.res = &res;
        c.cfg = cfg;
        c.options = cfg.value("options", json::object());
        c.seed = req.seed ? *req.seed : cfg.value("seed", std::uint64_t{0});
        const json out = cfg.value("output", json::object());
        c.out = req.out_dir ? fs::path(*req.out_dir) : fs::path(out.value("dir", std::string(".")));
        c.portrait = out.value("portrait", true);
        c.trajectories = out.value("trajectories", true);
        c.b = bundle_from_config(cfg["model"]);

        const std::string task = cfg["task"].get<std::string>();
        if (task == "parse-check") res.exit_code = task_parse_check(c);
        else if (task == "flow") res.exit_code = task_flow(c);
        else if (task == "find-invariant") res.exit_code = task_find_invariant(c);
        else if (task == "certify") res.exit_code = task_certify(c);
        else if (task == "thresholds") res.exit_code = task_thresholds(c);
        else res.exit_code = task_compare(c);

        static const std::map<std::string, std::string> main_report{
            {"parse-check", "parse_check.json"}, {"flow", "flow.json"},
            {"find-invariant", "invariant.json"}, {"certify", "certificate.json"},
            {"thresholds", "thresholds.json"},    {"compare-paper", "compare.json"}};
        auto it = c.reports.find(main_report.at(task));
        if (it != c.reports.end()) res.report = it->second;
    } catch (const ConfigError& e) {
        res.exit_code = 1;
        res.error = std::string("config error at ") + e.what();
    } catch (const std::exception& e) {
        res.exit_code = 1;
        res.error = e.what();
    }
    return res;
}

}  // namespace nht
