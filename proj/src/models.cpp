#include "nht/models.hpp"

#include "nht/solve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace nht {

namespace {

constexpr double kPi = std::numbers::pi;

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---- Kerr helpers ----

double kerr_d2mu(double r, const KerrDSParams& k) {
    return 2.0 - 4.0 * k.Lambda * r * r - 2.0 * k.lambda();
}

double kerr_G(double r, double xi_t, double xi_phi, const KerrDSParams& k) {
    double T = (r * r + k.a * k.a) * xi_t + k.a * xi_phi;
    return 4.0 * r * xi_t * kerr_mu(r, k) - T * kerr_dmu(r, k);
}

double kerr_dG(double r, double xi_t, double xi_phi, const KerrDSParams& k) {
    double T = (r * r + k.a * k.a) * xi_t + k.a * xi_phi;
    double mu = kerr_mu(r, k), dmu = kerr_dmu(r, k);
    return 4.0 * xi_t * mu + 4.0 * r * xi_t * dmu - 2.0 * r * xi_t * dmu - T * kerr_d2mu(r, k);
}

double kerr_F(double r, double xi_t, double xi_phi, const KerrDSParams& k) {
    double T = (r * r + k.a * k.a) * xi_t + k.a * xi_phi;
    return T * T / kerr_mu(r, k);
}

constexpr int kTaylorOrder = 14;
constexpr double kTaylorWindow = 1e-2;

// Taylor coefficients of F at r0, exact from the polynomial numerator and denominator.
std::array<double, kTaylorOrder + 1> kerr_F_taylor(double r0, double xi_t, double xi_phi,
                                                   const KerrDSParams& k) {
    constexpr int N = kTaylorOrder + 1;
    const double A = xi_t, B = k.a * k.a * xi_t + k.a * xi_phi;
    std::array<double, N> t{}, m{}, s{}, f{};
    t[0] = A * r0 * r0 + B;
    t[1] = 2 * A * r0;
    t[2] = A;
    m[0] = kerr_mu(r0, k);
    m[1] = kerr_dmu(r0, k);
    m[2] = kerr_d2mu(r0, k) / 2;
    m[3] = -4.0 * k.Lambda * r0 / 3.0;
    m[4] = -k.Lambda / 3.0;
    for (int n = 0; n < N; ++n)
        for (int i = 0; i <= std::min(n, 2); ++i)
            if (n - i <= 2) s[n] += t[i] * t[n - i];
    for (int n = 0; n < N; ++n) {
        double acc = s[n];
        for (int j = 1; j <= std::min(n, 4); ++j) acc -= m[j] * f[n - j];
        f[n] = acc / m[0];
    }
    return f;
}

std::pair<double, double> trapping_interval(const KerrHorizons& h, const KerrDSParams& k) {
    double hi = std::isfinite(h.exterior_hi) ? h.exterior_hi
                                              : h.exterior_lo + 10.0 * k.M + 10.0 * std::fabs(k.a);
    return {h.exterior_lo, hi};
}

TrappedRadius trapped_radius_on(double xi_t, double xi_phi, const KerrDSParams& k, double lo,
                                double hi, double grid) {
    TrappedRadius out;
    int n = std::max(8, static_cast<int>(std::ceil((hi - lo) / grid)));
    double h = (hi - lo) / n;
    double prev_r = lo + 0.5 * h;
    double prev = kerr_G(prev_r, xi_t, xi_phi, k);
    double br_lo = 0, br_hi = 0;
    for (int i = 1; i < n; ++i) {
        double r = lo + (i + 0.5) * h;
        double g = kerr_G(r, xi_t, xi_phi, k);
        if ((prev < 0 && g >= 0) || (prev > 0 && g <= 0)) {
            if (g == 0.0 && i + 1 < n) {
                // count the crossing once, at the next nonzero value
                double gn = kerr_G(r + h, xi_t, xi_phi, k);
                if ((prev < 0) == (gn < 0)) {
                    prev = gn;
                    prev_r = r + h;
                    ++i;
                    continue;
                }
            }
            ++out.sign_changes;
            br_lo = prev_r;
            br_hi = r;
        }
        if (g != 0.0) {
            prev = g;
            prev_r = r;
        }
    }
    if (out.sign_changes != 1) return out;

    double a = br_lo, b = br_hi;
    double ga = kerr_G(a, xi_t, xi_phi, k);
    double x = 0.5 * (a + b);
    for (int it = 0; it < 200; ++it) {
        double g = kerr_G(x, xi_t, xi_phi, k);
        if (g == 0.0) break;
        if ((g < 0) == (ga < 0)) {
            a = x;
            ga = g;
        } else {
            b = x;
        }
        double dg = kerr_dG(x, xi_t, xi_phi, k);
        double xn = dg != 0.0 ? x - g / dg : 0.5 * (a + b);
        if (!(xn > a && xn < b)) xn = 0.5 * (a + b);
        if (std::fabs(xn - x) <= 1e-15 * std::max(1.0, std::fabs(x)) || b - a <= 4e-16 * b) {
            x = xn;
            break;
        }
        x = xn;
    }
    out.r = x;
    double T = (x * x + k.a * k.a) * xi_t + k.a * xi_phi;
    double mu = kerr_mu(x, k);
    out.dF = T * kerr_G(x, xi_t, xi_phi, k) / (mu * mu);
    return out;
}

class KerrPhi : public PhaseFunction {
public:
    KerrPhi(const KerrDSParams& k, int sign) : k_(k), sign_(sign) {
        auto h = kerr_ds_horizons(k);
        std::tie(lo_, hi_) = trapping_interval(h, k);
    }
    int dim() const override { return 8; }
    std::string str() const override {
        return sign_ < 0 ? "xi_r - sgn(r - r_xi)*(1 + lambda)*sqrt((F(r) - F(r_xi))/mu)"
                         : "xi_r + sgn(r - r_xi)*(1 + lambda)*sqrt((F(r) - F(r_xi))/mu)";
    }
    double value(const double* z) const override {
        const double r = z[1], xi_t = z[4], xi_r = z[5], xi_phi = z[7];
        double mu = kerr_mu(r, k_);
        if (!(mu > 0)) throw ModelError("defining function queried where mu <= 0 (r = " + num(r) + ")");
        auto tr = trapped_radius_on(xi_t, xi_phi, k_, lo_, hi_, (hi_ - lo_) / 2000.0);
        if (!tr.r) throw ModelError("no trapped radius for this covector");
        double rx = *tr.r;
        double d = r - rx;
        double Q;
        if (std::fabs(d) < kTaylorWindow) {
            // (F(r) - F(r_xi)) / d^2 without cancellation
            auto f = kerr_F_taylor(rx, xi_t, xi_phi, k_);
            Q = 0.0;
            for (int n = kTaylorOrder; n >= 2; --n) Q = Q * d + f[n];
        } else {
            Q = (kerr_F(r, xi_t, xi_phi, k_) - kerr_F(rx, xi_t, xi_phi, k_)) / (d * d);
        }
        Q = std::max(Q, 0.0);
        double branch = (1.0 + k_.lambda()) * d * std::sqrt(Q / mu);
        return xi_r + sign_ * branch;
    }

private:
    KerrDSParams k_;
    int sign_;
    double lo_ = 0, hi_ = 0;
};

std::vector<double> poly_real_roots(std::vector<double> c /* descending */) {
    while (!c.empty() && c.front() == 0.0) c.erase(c.begin());
    const int deg = static_cast<int>(c.size()) - 1;
    std::vector<double> out;
    if (deg < 1) return out;
    Mat C = Mat::Zero(deg, deg);
    for (int j = 0; j < deg; ++j) C(0, j) = -c[j + 1] / c[0];
    for (int i = 1; i < deg; ++i) C(i, i - 1) = 1.0;
    Eigen::EigenSolver<Mat> es(C, false);
    auto ev = es.eigenvalues();
    for (int i = 0; i < deg; ++i) {
        double re = ev[i].real(), im = ev[i].imag();
        if (std::fabs(im) > 1e-9 * std::max(1.0, std::fabs(re))) continue;
        // polish on the polynomial
        for (int it = 0; it < 5; ++it) {
            double v = 0, dv = 0;
            for (double ck : c) {
                dv = dv * re + v;
                v = v * re + ck;
            }
            if (dv == 0.0) break;
            re -= v / dv;
        }
        out.push_back(re);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string kerr_mu_str() { return "((r^2 + a^2)*(1 - Lambda*r^2/3) - 2*M*r)"; }
std::string kerr_dmu_str() {
    return "(2*r*(1 - Lambda*r^2/3) - 2*Lambda*r*(r^2 + a^2)/3 - 2*M)";
}
std::string kerr_T_str() { return "((r^2 + a^2)*xi_t + a*xi_phi)"; }

}  // namespace

double kerr_mu(double r, const KerrDSParams& k) {
    return (r * r + k.a * k.a) * (1.0 - k.Lambda * r * r / 3.0) - 2.0 * k.M * r;
}

double kerr_dmu(double r, const KerrDSParams& k) {
    return 2.0 * r * (1.0 - k.Lambda * r * r / 3.0) -
           2.0 * k.Lambda * r * (r * r + k.a * k.a) / 3.0 - 2.0 * k.M;
}

KerrHorizons kerr_ds_horizons(const KerrDSParams& k) {
    KerrHorizons h;
    h.exterior_hi = std::numeric_limits<double>::infinity();
    if (!(k.M > 0)) throw ModelError("Kerr-de Sitter mass M must be > 0");
    if (!(k.Lambda >= 0)) throw ModelError("Kerr-de Sitter Lambda must be >= 0");
    std::vector<double> coeffs{-k.Lambda / 3.0, 0.0, 1.0 - k.lambda(), -2.0 * k.M, k.a * k.a};
    h.roots = poly_real_roots(coeffs);
    const std::size_t expected = k.Lambda > 0 ? 4 : 2;
    auto fail = [&](const std::string& why) {
        h.subextremal = false;
        h.verdict = "not subextremal: " + why;
        return h;
    };
    if (h.roots.size() != expected)
        return fail(std::to_string(expected) + " distinct real roots required, found " +
                    std::to_string(h.roots.size()) + " real");
    for (std::size_t i = 1; i < h.roots.size(); ++i)
        if (h.roots[i] - h.roots[i - 1] <= 1e-9 * std::max(1.0, std::fabs(h.roots[i])))
            return fail("repeated root near r = " + num(h.roots[i]));
    // a double root splits under rounding into a close real pair with mu' ~ 0
    for (double r : h.roots)
        if (std::fabs(kerr_dmu(r, k)) <= 1e-6 * std::max(1.0, k.M))
            return fail("degenerate root near r = " + num(r));
    if (k.Lambda > 0) {
        h.r_minus = h.roots[2];
        h.r_plus = h.roots[3];
        h.exterior_lo = h.r_minus;
        h.exterior_hi = h.r_plus;
        if (!(kerr_dmu(h.r_minus, k) > 0 && kerr_dmu(h.r_plus, k) < 0))
            return fail("mu is not positive between the two largest roots");
        if (!(h.r_minus > 0)) return fail("event horizon not at positive radius");
    } else {
        h.r_minus = h.roots[0];
        h.r_plus = h.roots[1];
        h.exterior_lo = h.r_plus;
        if (h.r_minus < -1e-12) return fail("inner root negative");
        if (!(kerr_dmu(h.r_minus, k) < 0 && kerr_dmu(h.r_plus, k) > 0))
            return fail("sign conditions on mu' fail");
    }
    h.subextremal = true;
    h.verdict = "subextremal";
    return h;
}

SymbolModel kerr_ds_model(const KerrDSParams& k, double mu_decay) {
    auto h = kerr_ds_horizons(k);
    if (!h.subextremal) throw ModelError("Kerr-de Sitter parameters rejected: " + h.verdict);
    SymbolModel m;
    m.id = "kerr-ds";
    m.chart.positions = {"t", "r", "theta", "phi"};
    m.chart.momenta = {"xi_t", "xi_r", "xi_theta", "xi_phi"};
    m.chart.bflags = {false, false, false, false};
    m.chart.params = {"M", "a", "Lambda", "lambda"};
    m.params = {{"M", k.M}, {"a", k.a}, {"Lambda", k.Lambda}, {"lambda", k.lambda()}};
    const std::string mu = kerr_mu_str();
    const std::string kappa = "(1 + lambda*cos(theta)^2)";
    const std::string sigma2 = "(r^2 + a^2*cos(theta)^2)";
    m.p = Expr::parse("(" + mu + "*xi_r^2 + " + kappa + "*xi_theta^2 + (1 + lambda)^2/(" + kappa +
                      "*sin(theta)^2)*(a*sin(theta)^2*xi_t + xi_phi)^2 - (1 + lambda)^2/" + mu +
                      "*" + kerr_T_str() + "^2)/" + sigma2);
    m.m = 2;
    m.rho = Expr::parse("xi_t");
    m.mu = mu_decay;
    m.validate();
    return m;
}

TrappedRadius kerr_ds_trapped_radius(double xi_t, double xi_phi, const KerrDSParams& k,
                                     double grid) {
    if (xi_t == 0.0 && xi_phi == 0.0)
        throw std::invalid_argument("trapped radius needs (xi_t, xi_phi) != (0, 0)");
    auto h = kerr_ds_horizons(k);
    if (!h.subextremal) throw ModelError("Kerr-de Sitter parameters rejected: " + h.verdict);
    auto [lo, hi] = trapping_interval(h, k);
    return trapped_radius_on(xi_t, xi_phi, k, lo, hi, grid);
}

DefiningPair kerr_ds_defining_functions(const KerrDSParams& k) {
    auto h = kerr_ds_horizons(k);
    if (!h.subextremal) throw ModelError("Kerr-de Sitter parameters rejected: " + h.verdict);
    return {std::make_shared<KerrPhi>(k, -1), std::make_shared<KerrPhi>(k, +1)};
}

// ---- scattering ----

namespace {

struct Section {
    std::vector<std::string> pos, mom;
    std::string h;
    std::map<std::string, double> params;
};

Section section_of(const ScatteringParams& s) {
    switch (s.section) {
    case CrossSection::RoundSphere:
        return {{"phiS", "thetaS"}, {"xi_phiS", "xi_thetaS"},
                "xi_thetaS^2 + xi_phiS^2/sin(thetaS)^2", {}};
    case CrossSection::FlatTorus:
        return {{"u", "v"}, {"xi_u", "xi_v"}, "xi_u^2 + xi_v^2", {}};
    case CrossSection::Custom:
        break;
    }
    if (s.positions.empty() || s.positions.size() != s.momenta.size())
        throw ModelError("custom cross-section needs matching position and momentum names");
    if (s.h.empty()) throw ModelError("custom cross-section needs an h expression");
    return {s.positions, s.momenta, s.h, s.params};
}

}  // namespace

SymbolModel scattering_model(const ScatteringParams& s) {
    Section sec = section_of(s);
    SymbolModel m;
    m.id = "scattering";
    m.chart.positions = {"tau", "theta"};
    m.chart.momenta = {"sigma", "eta"};
    m.chart.positions.insert(m.chart.positions.end(), sec.pos.begin(), sec.pos.end());
    m.chart.momenta.insert(m.chart.momenta.end(), sec.mom.begin(), sec.mom.end());
    m.chart.bflags.assign(m.chart.positions.size(), false);
    m.chart.bflags[0] = true;
    for (const auto& [name, v] : sec.params) {
        m.chart.params.push_back(name);
        m.params[name] = v;
    }
    Expr h = Expr::parse(sec.h);
    m.p = Expr::parse("(cos(2*theta)*(sigma^2 - eta^2) + 2*sin(2*theta)*sigma*eta + (" + h.str() +
                      "))/2");
    m.m = 2;
    m.rho = Expr::parse("sigma");
    m.rho_alt = Expr::parse("eta");
    m.mu = s.mu;
    m.validate();

    // h must be a positive-definite fiber quadratic on the cross-section
    Compiled hc(h, m.chart.coords(), m.params);
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> u(0.3, 2.8);
    std::normal_distribution<double> nd;
    const int n = m.chart.n();
    const int k = static_cast<int>(sec.pos.size());
    for (int trial = 0; trial < 50; ++trial) {
        Vec z = Vec::Zero(2 * n);
        for (int i = 0; i < n; ++i) z[i] = u(rng);
        z[0] = 0.0;
        for (int i = 0; i < n; ++i) z[n + i] = nd(rng);
        Vec g(2 * n);
        RowMat H(2 * n, 2 * n);
        hc.hess(z.data(), g.data(), H.data());
        Mat B(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) B(i, j) = H(n + 2 + i, n + 2 + j);
        Eigen::SelfAdjointEigenSolver<Mat> es(B);
        if (!(es.eigenvalues().minCoeff() > 1e-12))
            throw ModelError("cross-section h is not positive definite in the fiber at a sample");
    }
    return m;
}

double ScatteringReference::l_max(double mu, double p1) const {
    return std::min(mu, 1.0 / std::numbers::sqrt2) - p1;
}

ScatteringReference scattering_reference_data() {
    const double r2 = std::numbers::sqrt2;
    return {{r2, -r2}, {2.0, 1.0}, 1.0, {-1.0 - 1.0 / r2, -1.0 + 1.0 / r2}};
}

// ---- torus ----

SymbolModel torus_model() {
    SymbolModel m;
    m.id = "torus";
    m.chart.positions = {"x", "y", "z"};
    m.chart.momenta = {"xi_x", "xi_y", "xi_z"};
    m.chart.bflags = {false, false, false};
    m.p = Expr::parse("xi_y + sin(x)*xi_x");
    m.m = 1;
    m.rho = Expr::parse("xi_z");
    m.mu = 1.0;
    m.validate();
    return m;
}

// ---- bundles ----

std::vector<bool> ModelBundle::pinned_mask() const {
    const int n = model.chart.n();
    std::vector<bool> mask(2 * n, false);
    for (int i = 0; i < n; ++i) {
        auto it = domain.find(model.chart.positions[i]);
        if (it != domain.end() && it->second.pinned()) mask[i] = true;
    }
    return mask;
}

bool ModelBundle::in_domain(const Vec& z, double slack) const {
    const int n = model.chart.n();
    for (int i = 0; i < n; ++i) {
        auto it = domain.find(model.chart.positions[i]);
        if (it == domain.end()) continue;
        const CoordRange& c = it->second;
        if (c.periodic || c.pinned()) continue;
        if (z[i] < c.lo - slack || z[i] > c.hi + slack) return false;
    }
    return z.allFinite();
}

void ModelBundle::wrap(Vec& z) const {
    const int n = model.chart.n();
    for (int i = 0; i < n; ++i) {
        auto it = domain.find(model.chart.positions[i]);
        if (it == domain.end() || !it->second.periodic) continue;
        double L = it->second.hi - it->second.lo;
        z[i] = it->second.lo + std::fmod(std::fmod(z[i] - it->second.lo, L) + L, L);
    }
}

std::vector<Region> exit_regions(const ModelBundle& b) {
    std::vector<Region> out;
    const auto coords = b.model.chart.coords();
    for (const auto& name : b.model.chart.positions) {
        auto it = b.domain.find(name);
        if (it == b.domain.end() || it->second.periodic || it->second.pinned()) continue;
        out.push_back(make_region("exit " + name + " low", {name + " < " + num(it->second.lo)},
                                  coords, b.model.params));
        out.push_back(make_region("exit " + name + " high", {name + " > " + num(it->second.hi)},
                                  coords, b.model.params));
    }
    return out;
}

ModelBundle kerr_ds_bundle(const KerrDSParams& k, double mu_decay) {
    ModelBundle b;
    b.kind = "kerr-ds";
    b.model = kerr_ds_model(k, mu_decay);
    b.kerr = k;
    auto h = kerr_ds_horizons(k);
    double lo, hi;
    if (k.Lambda > 0) {
        double w = h.exterior_hi - h.exterior_lo;
        lo = h.exterior_lo + std::min(0.25 * k.M, 0.05 * w);
        hi = std::min(h.exterior_hi - 0.05 * w, h.exterior_lo + 8.0 * k.M);
    } else {
        lo = h.exterior_lo + 0.25 * k.M;
        hi = h.exterior_lo + 8.0 * k.M;
    }
    b.domain["t"] = {0.0, 0.0, false};
    b.domain["r"] = {lo, hi, false};
    b.domain["theta"] = {0.3, kPi - 0.3, false};
    b.domain["phi"] = {0.0, 2 * kPi, true};
    b.seed = {Expr::parse("r")};
    // sign of F'(r): H^2(r) has the sign of F' where H(r) = 0 on Char
    const std::string fp = kerr_T_str() + "*(4*r*xi_t*" + kerr_mu_str() + " - " + kerr_T_str() +
                           "*" + kerr_dmu_str() + ")";
    b.patches = {{{fp + " > 0"}, Expr::parse("r")}, {{fp + " < 0"}, Expr::parse("-r")}};
    // xi_r and F'(r) (up to the factor T/mu^2) cut out Γ inside Char
    b.frames = {{Expr::parse("xi_r/xi_t"),
                 Expr::parse("(4*r*xi_t*" + kerr_mu_str() + " - " + kerr_T_str() + "*" +
                             kerr_dmu_str() + ")/xi_t")}};
    auto d = kerr_ds_defining_functions(k);
    b.phi_u = d.phi_u;
    b.phi_s = d.phi_s;
    b.portrait = "r-t";
    return b;
}

ModelBundle scattering_bundle(const ScatteringParams& s) {
    ModelBundle b;
    b.kind = "scattering";
    b.model = scattering_model(s);
    b.domain["tau"] = {0.0, 0.0, false};
    b.domain["theta"] = {-kPi, kPi, true};
    Section sec = section_of(s);
    if (s.section == CrossSection::RoundSphere) {
        b.domain["phiS"] = {0.0, 2 * kPi, true};
        b.domain["thetaS"] = {0.3, kPi - 0.3, false};
    } else if (s.section == CrossSection::FlatTorus) {
        b.domain["u"] = {0.0, 2 * kPi, true};
        b.domain["v"] = {0.0, 2 * kPi, true};
    } else {
        for (const auto& p : sec.pos) b.domain[p] = {0.0, 1.0, false};
    }
    b.seed = {Expr::parse("theta")};
    b.patches = {{{"sin(4*theta) > 0"}, Expr::parse("theta")},
                 {{"sin(4*theta) < 0"}, Expr::parse("-theta")}};
    b.phi_u = make_function(Expr::parse("sin(2*theta) + (2 - sqrt(2))*eta/sigma"), b.model);
    b.phi_s = make_function(Expr::parse("sin(2*theta) + (2 + sqrt(2))*eta/sigma"), b.model);
    b.w_u = Expr::parse("sqrt(2)");
    b.w_s = Expr::parse("sqrt(2)");
    b.frames = {{Expr::parse("sin(2*theta)"), Expr::parse("eta/sigma")},
                {Expr::parse("cos(2*theta)"), Expr::parse("sigma/eta")}};
    b.portrait = "theta-eta";
    return b;
}

ModelBundle torus_bundle() {
    ModelBundle b;
    b.kind = "torus";
    b.model = torus_model();
    b.domain["x"] = {-kPi, kPi, true};
    b.domain["y"] = {0.0, 2 * kPi, true};
    b.domain["z"] = {0.0, 2 * kPi, true};
    b.seed = {Expr::parse("x"), Expr::parse("xi_x/abs(xi_z)")};
    b.patches = {{{"cos(x) > 0"}, Expr::parse("x")},
                 {{"cos(x) < 0", "x > 0"}, Expr::parse("x - pi")},
                 {{"cos(x) < 0", "x < 0"}, Expr::parse("x + pi")}};
    b.phi_u = make_function(Expr::parse("xi_x/abs(xi_z)"), b.model);
    b.phi_s = make_function(Expr::parse("x"), b.model);
    b.frames = {{Expr::parse("sin(x)"), Expr::parse("xi_x/abs(xi_z)")}};
    return b;
}

// ---- sampling ----

namespace {

double radical_inverse(std::uint64_t i, int base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                           41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};

}  // namespace

CharSampler::CharSampler(const ModelBundle& b, std::uint64_t seed, bool quasi)
    : b_(b), p_(b.model.compile(b.model.p)), rng_(seed), quasi_(quasi) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    shift_.resize(b.model.chart.dim());
    for (double& s : shift_) s = u(rng_);
}

double CharSampler::uniform(int k) {
    if (!quasi_) return std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    double v = radical_inverse(counter_ + 1, kPrimes[k % 24]) + shift_[k];
    return v - std::floor(v);
}

Vec CharSampler::raw() {
    const Chart& c = b_.model.chart;
    const int n = c.n();
    Vec z(2 * n);
    for (int i = 0; i < n; ++i) {
        auto it = b_.domain.find(c.positions[i]);
        double lo = 0.0, hi = 2 * kPi;
        if (it != b_.domain.end()) {
            lo = it->second.lo;
            hi = it->second.hi;
        }
        z[i] = lo + (hi - lo) * uniform(i);
    }
    if (quasi_) {
        for (int i = 0; i < n; ++i) z[n + i] = 2.0 * uniform(n + i) - 1.0;
        ++counter_;
    } else {
        std::normal_distribution<double> nd;
        for (int i = 0; i < n; ++i) z[n + i] = nd(rng_);
    }
    double norm = z.tail(n).norm();
    if (norm == 0.0) z[n] = norm = 1.0;
    z.tail(n) /= norm;
    return z;
}

std::optional<Vec> CharSampler::project(const Vec& z0) const {
    const int n = b_.model.chart.n();
    const Compiled& p = p_;
    Residuals F = [&p, n](const Vec& z) {
        Vec r(2);
        r[0] = p(z);
        r[1] = z.tail(n).squaredNorm() - 1.0;
        return r;
    };
    auto res = newton_solve(F, z0, b_.pinned_mask(), 1e-12);
    if (!res.converged) return std::nullopt;
    Vec z = res.z;
    b_.wrap(z);
    if (!b_.in_domain(z)) return std::nullopt;
    return z;
}

std::optional<Vec> CharSampler::sample(int max_tries) {
    for (int t = 0; t < max_tries; ++t) {
        auto z = project(raw());
        if (z) return z;
    }
    return std::nullopt;
}

}  // namespace nht
