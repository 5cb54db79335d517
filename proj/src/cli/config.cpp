#include "nht/run.hpp"

#include <set>

namespace nht {

namespace {

Expr parse_at(const json& j, const std::string& ptr) {
    const std::string text = j.get<std::string>();
    try {
        return Expr::parse(text);
    } catch (const SyntaxError& e) {
        throw ConfigError(ptr, std::string(e.what()) + " at offset " + std::to_string(e.offset()) +
                                   " (expected " + e.expected() + ")");
    }
}

// Every name must be a coordinate, a parameter or a builtin constant.
void check_bound(const Expr& e, const SymbolModel& m, const std::string& ptr) {
    try {
        (void)m.compile(e);
    } catch (const BindError& b) {
        throw ConfigError(ptr, b.what());
    }
}

Expr model_expr(const json& j, const SymbolModel& m, const std::string& ptr) {
    Expr e = parse_at(j, ptr);
    check_bound(e, m, ptr);
    return e;
}

std::vector<std::string> strings(const json& j) { return j.get<std::vector<std::string>>(); }

std::map<std::string, double> parameters(const json& j) {
    std::map<std::string, double> out;
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value().get<double>();
    return out;
}

ModelBundle custom_bundle(const json& j) {
    const std::string P = "/model";
    ModelBundle b;
    b.kind = "custom";
    SymbolModel& m = b.model;
    m.id = j.value("id", std::string("custom"));
    m.chart.positions = strings(j["positions"]);
    m.chart.momenta = strings(j["momenta"]);
    if (m.chart.positions.size() != m.chart.momenta.size())
        throw ConfigError(P + "/momenta", "needs one momentum per position");
    std::set<std::string> bpos;
    if (j.contains("b_positions"))
        for (const auto& s : j["b_positions"]) bpos.insert(s.get<std::string>());
    for (const auto& p : m.chart.positions) m.chart.bflags.push_back(bpos.count(p) > 0);
    for (const auto& p : bpos)
        if (m.chart.index(p) < 0 ||
            m.chart.index(p) >= m.chart.n())
            throw ConfigError(P + "/b_positions", "'" + p + "' is not a position");
    if (j.contains("parameters")) m.params = parameters(j["parameters"]);
    for (const auto& kv : m.params) m.chart.params.push_back(kv.first);
    try {
        m.chart.validate();
    } catch (const std::exception& e) {
        throw ConfigError(P + "/positions", e.what());
    }
    m.mu = j["mu"].get<double>();
    m.m = j["degree"].get<int>();
    m.p = model_expr(j["symbol"], m, P + "/symbol");
    m.rho = model_expr(j["rho"], m, P + "/rho");
    if (j.contains("rho_alt")) m.rho_alt = model_expr(j["rho_alt"], m, P + "/rho_alt");
    if (j.contains("p1")) m.p1 = model_expr(j["p1"], m, P + "/p1");
    if (j.contains("q")) m.q = model_expr(j["q"], m, P + "/q");
    try {
        m.validate();
    } catch (const std::exception& e) {
        throw ConfigError(P, e.what());
    }

    const json& dom = j["domain"];
    for (auto it = dom.begin(); it != dom.end(); ++it) {
        if (m.chart.index(it.key()) < 0 || m.chart.index(it.key()) >= m.chart.n())
            throw ConfigError(P + "/domain/" + it.key(), "not a position");
        CoordRange r{it.value()["lo"].get<double>(), it.value()["hi"].get<double>(),
                     it.value().value("periodic", false)};
        if (r.hi < r.lo) throw ConfigError(P + "/domain/" + it.key(), "hi < lo");
        if (r.periodic && r.pinned())
            throw ConfigError(P + "/domain/" + it.key(), "periodic range of zero length");
        b.domain[it.key()] = r;
    }
    for (const auto& p : m.chart.positions)
        if (!b.domain.count(p)) throw ConfigError(P + "/domain", "missing range for '" + p + "'");

    for (std::size_t i = 0; i < j["seed"].size(); ++i)
        b.seed.push_back(model_expr(j["seed"][i], m, P + "/seed/" + std::to_string(i)));
    if (j.contains("patches")) {
        const auto coords = m.chart.coords();
        for (std::size_t i = 0; i < j["patches"].size(); ++i) {
            const json& pj = j["patches"][i];
            const std::string pp = P + "/patches/" + std::to_string(i);
            EscapePatch patch{strings(pj["region"]), model_expr(pj["f"], m, pp + "/f")};
            try {
                (void)make_region("patch", patch.region, coords, m.params);
            } catch (const std::exception& e) {
                throw ConfigError(pp + "/region", e.what());
            }
            b.patches.push_back(std::move(patch));
        }
    }
    if (j.contains("phi_u") != j.contains("phi_s"))
        throw ConfigError(P + (j.contains("phi_u") ? "/phi_s" : "/phi_u"),
                          "phi_u and phi_s come in pairs");
    if (j.contains("phi_u")) {
        b.phi_u = make_function(model_expr(j["phi_u"], m, P + "/phi_u"), m);
        b.phi_s = make_function(model_expr(j["phi_s"], m, P + "/phi_s"), m);
    }
    if (j.contains("w_u")) b.w_u = model_expr(j["w_u"], m, P + "/w_u");
    if (j.contains("w_s")) b.w_s = model_expr(j["w_s"], m, P + "/w_s");
    if (j.contains("frames"))
        for (std::size_t i = 0; i < j["frames"].size(); ++i) {
            std::vector<Expr> fr;
            for (std::size_t k = 0; k < j["frames"][i].size(); ++k)
                fr.push_back(model_expr(j["frames"][i][k], m,
                                        P + "/frames/" + std::to_string(i) + "/" + std::to_string(k)));
            b.frames.push_back(std::move(fr));
        }
    const std::string portrait = j.value("portrait", std::string("none"));
    b.portrait = portrait == "none" ? "" : portrait;
    return b;
}

ModelBundle scattering_from(const json& j) {
    ScatteringParams s;
    s.mu = j["mu"].get<double>();
    const std::string cs = j.value("cross_section", std::string("round-sphere"));
    if (cs == "flat-torus") s.section = CrossSection::FlatTorus;
    else if (cs == "custom") s.section = CrossSection::Custom;
    if (s.section == CrossSection::Custom) {
        if (!j.contains("custom"))
            throw ConfigError("/model/custom", "required for cross_section \"custom\"");
        const json& c = j["custom"];
        s.positions = strings(c["positions"]);
        s.momenta = strings(c["momenta"]);
        s.h = c["h"].get<std::string>();
        if (c.contains("parameters")) s.params = parameters(c["parameters"]);
        (void)parse_at(c["h"], "/model/custom/h");
    } else if (j.contains("custom")) {
        throw ConfigError("/model/custom", "only allowed with cross_section \"custom\"");
    }
    try {
        return scattering_bundle(s);
    } catch (const BindError& e) {
        throw ConfigError("/model/custom/h", e.what());
    } catch (const std::exception& e) {
        throw ConfigError("/model", e.what());
    }
}

}  // namespace

ModelBundle bundle_from_config(const json& model) {
    const std::string kind = model.at("kind").get<std::string>();
    if (kind == "kerr-ds") {
        KerrDSParams k{model["M"].get<double>(), model["a"].get<double>(),
                       model["Lambda"].get<double>()};
        try {
            return kerr_ds_bundle(k, model["mu"].get<double>());
        } catch (const ModelError& e) {
            throw ConfigError("/model", e.what());
        }
    }
    if (kind == "scattering") return scattering_from(model);
    if (kind == "torus") {
        ModelBundle b = torus_bundle();
        b.model.mu = model["mu"].get<double>();
        return b;
    }
    if (kind == "custom") return custom_bundle(model);
    throw ConfigError("/model/kind", "unknown kind '" + kind + "'");
}

CertifyOptions certify_options_from(const json& o, std::uint64_t seed) {
    CertifyOptions c;
    c.escape.seed = seed;
    c.locate.seed = seed + 1;
    c.defining.seed = seed + 2;
    if (o.contains("escape")) {
        const json& e = o["escape"];
        c.escape.n_samples = e.value("samples", c.escape.n_samples);
        c.escape.eps0 = e.value("eps0", c.escape.eps0);
        c.escape.eps1 = e.value("eps1", c.escape.eps1);
        c.escape.omega_radius = e.value("omega_radius", c.escape.omega_radius);
    }
    if (o.contains("locate")) {
        const json& e = o["locate"];
        c.locate.n_seeds = e.value("seeds", c.locate.n_seeds);
        c.locate.tol = e.value("tol", c.locate.tol);
        c.locate.merge = e.value("merge", c.locate.merge);
        c.locate.quasi = e.value("quasi", c.locate.quasi);
    }
    if (o.contains("classify")) {
        const json& e = o["classify"];
        c.classify.g_tol = e.value("g_tol", c.classify.g_tol);
        c.classify.cluster_radius = e.value("cluster_radius", c.classify.cluster_radius);
    }
    if (o.contains("rates")) {
        const json& e = o["rates"];
        c.rates.T_normal = e.value("T_normal", c.rates.T_normal);
        c.rates.n_normal = e.value("n_normal", c.rates.n_normal);
        if (e.contains("T_beta")) c.rates.T_beta = e["T_beta"].get<std::vector<double>>();
        c.rates.n_beta = e.value("n_beta", c.rates.n_beta);
        c.rates.beta_tol = e.value("beta_tol", c.rates.beta_tol);
        c.rates.flow_rtol = e.value("rtol", c.rates.flow_rtol);
        for (std::size_t i = 1; i < c.rates.T_beta.size(); ++i)
            if (!(c.rates.T_beta[i] > c.rates.T_beta[i - 1]))
                throw ConfigError("/options/rates/T_beta/" + std::to_string(i), "horizons must increase");
    }
    if (o.contains("defining")) {
        const json& e = o["defining"];
        c.defining.n_samples = e.value("samples", c.defining.n_samples);
        c.defining.radius = e.value("radius", c.defining.radius);
        c.defining.char_tol = e.value("char_tol", c.defining.char_tol);
    }
    c.check_escape = o.value("check_escape", c.check_escape);
    c.check_defining = o.value("check_defining", c.check_defining);
    c.residual_tol = o.value("residual_tol", c.residual_tol);
    return c;
}

}  // namespace nht
