#include "nht/trapping.hpp"

#include "nht/solve.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>

namespace nht {

namespace {

using Fn = PhaseFunctionPtr;

std::vector<Compiled> compile_all(const SymbolModel& m, const std::vector<Expr>& es) {
    std::vector<Compiled> out;
    for (const auto& e : es) out.push_back(m.compile(e));
    return out;
}

double momentum_sq(const Vec& z, int n) { return z.tail(n).squaredNorm(); }

// Rows dp and the unit rows of pinned positions, appended to G.
Mat with_constraints(const Mat& G, const Vec& dp, const std::vector<bool>& pinned) {
    int extra = 1;
    for (bool b : pinned) extra += b;
    Mat C(G.rows() + extra, G.cols());
    C.topRows(G.rows()) = G;
    C.row(G.rows()) = dp.transpose();
    int r = static_cast<int>(G.rows()) + 1;
    for (std::size_t j = 0; j < pinned.size(); ++j)
        if (pinned[j]) {
            C.row(r).setZero();
            C(r++, static_cast<int>(j)) = 1.0;
        }
    return C;
}

Vec gradient_of(const PhaseFunction& f, const Vec& z) {
    Vec g(z.size());
    f.gradient(z.data(), g.data());
    return g;
}

Vec gradient_of(const Compiled& f, const Vec& z) {
    Vec g(z.size());
    f.grad(z.data(), g.data());
    return g;
}

int sgn(double v) { return (v > 0) - (v < 0); }

// Function z -> H~^order(f)(z).
class LieFunction : public PhaseFunction {
public:
    LieFunction(std::shared_ptr<const HamiltonianField> H, Compiled f, int order)
        : H_(std::move(H)), f_(std::move(f)), order_(order) {}
    int dim() const override { return H_->dim(); }
    double value(const double* z) const override {
        LieJet j = lie_derivative(*H_, f_, z);
        return order_ == 1 ? j.Hf : j.H2f;
    }
    std::string str() const override {
        return std::string(order_ == 1 ? "H(" : "H^2(") + f_.expr().str() + ")";
    }

private:
    std::shared_ptr<const HamiltonianField> H_;
    Compiled f_;
    int order_;
};

std::vector<double> seed_periods(const ModelBundle& b) {
    std::vector<double> out;
    for (const auto& e : b.seed) {
        double L = 0.0;
        if (e.root().op == Op::Name) {
            auto it = b.domain.find(e.root().name);
            if (it != b.domain.end() && it->second.periodic) L = it->second.hi - it->second.lo;
        }
        out.push_back(L);
    }
    return out;
}

double wrapped_diff(double d, double L) {
    if (L <= 0) return d;
    d = std::fmod(d, L);
    if (d > L / 2) d -= L;
    if (d < -L / 2) d += L;
    return d;
}

// Residuals of Omega: H f_i, H^2 f_i, p, |xi|^2 - 1.
Residuals omega_residuals(const HamiltonianField& H, const std::vector<Compiled>& seeds,
                          const Compiled& p, int n) {
    return [&H, &seeds, &p, n](const Vec& z) {
        Vec r(2 * seeds.size() + 2);
        int k = 0;
        for (const auto& f : seeds) {
            LieJet j = lie_derivative(H, f, z.data());
            r[k++] = j.Hf;
            r[k++] = j.H2f;
        }
        r[k++] = p(z);
        r[k] = momentum_sq(z, n) - 1.0;
        return r;
    };
}

}  // namespace

// ---- escape function ----

EscapeFunction::EscapeFunction(const SymbolModel& model, const Expr& f)
    : H_(model, false), f_(model.compile(f)) {}

LieJet EscapeFunction::jet(const double* z) const { return lie_derivative(H_, f_, z); }

double EscapeFunction::F(const double* z) const {
    LieJet j = jet(z);
    return j.Hf * std::exp(j.f);
}

double EscapeFunction::HF(const double* z) const {
    LieJet j = jet(z);
    return (j.H2f + j.Hf * j.Hf) * std::exp(j.f);
}

double phase_distance(const ModelBundle& b, const Vec& x, const Vec& y) {
    const int n = b.model.chart.n();
    double s = 0.0;
    for (int i = 0; i < x.size(); ++i) {
        double d = x[i] - y[i];
        if (i < n) {
            auto it = b.domain.find(b.model.chart.positions[i]);
            if (it != b.domain.end() && it->second.periodic)
                d = wrapped_diff(d, it->second.hi - it->second.lo);
        }
        s += d * d;
    }
    return std::sqrt(s);
}

// ---- escape condition ----

EscapeReport verify_escape_condition(const ModelBundle& b, const EscapeOptions& opts) {
    EscapeReport rep;
    rep.options = opts;
    rep.requested = opts.n_samples;
    const SymbolModel& m = b.model;
    const int n = m.chart.n();
    const auto coords = m.chart.coords();
    HamiltonianField H(m, false);
    Compiled p = m.compile(m.p);
    if (b.seed.empty()) throw std::invalid_argument("bundle has no escape seed");
    Compiled f0 = m.compile(b.seed[0]);
    auto seeds = compile_all(m, b.seed);

    std::vector<Compiled> pf;
    std::vector<std::optional<Region>> pr;
    if (b.patches.empty()) {
        pf.push_back(f0);
        pr.emplace_back();
    } else {
        for (std::size_t k = 0; k < b.patches.size(); ++k) {
            pf.push_back(m.compile(b.patches[k].f));
            pr.emplace_back(make_region("patch " + std::to_string(k), b.patches[k].region, coords,
                                        m.params));
        }
    }
    rep.per_patch.assign(pf.size(), 0);

    CharSampler sampler(b, opts.seed);
    // degenerate seeds: H f vanishing on most of Char
    {
        const int nd = std::min(opts.n_samples, 200);
        int zero = 0, got = 0;
        for (int i = 0; i < nd; ++i) {
            auto z = sampler.sample();
            if (!z) continue;
            ++got;
            if (std::fabs(lie_derivative(H, f0, z->data()).Hf) <= opts.eps0) ++zero;
        }
        rep.degenerate_fraction = got ? static_cast<double>(zero) / got : 0.0;
        if (got && rep.degenerate_fraction > 0.5) {
            rep.degenerate = true;
            rep.diagnosis = "constant-of-motion seed: H(f) vanishes on " +
                            std::to_string(zero) + " of " + std::to_string(got) +
                            " Char samples";
            return rep;
        }
    }

    std::vector<Vec> raw(opts.n_samples);
    for (auto& r : raw) r = sampler.raw();
    const auto pinned = b.pinned_mask();

    struct Out {
        bool ok = false;
        Vec z;
        double Hf = 0, worst = 0;
        int patch = -1;
        bool uncovered = false;
        bool violation = false;
        bool near = false;
    };
    std::vector<Out> out(raw.size());
    Residuals proj = [&](const Vec& z) {
        Vec r(3);
        r[0] = lie_derivative(H, f0, z.data()).Hf;
        r[1] = p(z);
        r[2] = momentum_sq(z, n) - 1.0;
        return r;
    };
    Residuals omega = omega_residuals(H, seeds, p, n);

    parallel_for(raw.size(), [&](std::size_t i) {
        Out& o = out[i];
        auto res = newton_solve(proj, raw[i], pinned, 1e-12);
        if (!res.converged) return;
        Vec z = res.z;
        b.wrap(z);
        if (!b.in_domain(z)) return;
        o.ok = true;
        o.z = z;
        o.Hf = res.residual;
        std::vector<int> owners;
        for (std::size_t k = 0; k < pf.size(); ++k)
            if (!pr[k] || pr[k]->contains(z.data())) owners.push_back(static_cast<int>(k));
        if (owners.empty()) {
            o.uncovered = true;
            for (std::size_t k = 0; k < pf.size(); ++k) owners.push_back(static_cast<int>(k));
        }
        // a point passes if any owning patch gives H^2 f >= -eps1
        double best = -std::numeric_limits<double>::infinity();
        for (int k : owners) {
            double h2 = lie_derivative(H, pf[k], z.data()).H2f;
            if (h2 > best) {
                best = h2;
                o.patch = k;
            }
        }
        o.worst = best;
        if (best < -opts.eps1) {
            auto om = newton_solve(omega, z, pinned, 1e-10);
            if (om.converged && phase_distance(b, om.z, z) <= opts.omega_radius) o.near = true;
            else o.violation = true;
        }
    });

    rep.min_H2f = std::numeric_limits<double>::infinity();
    for (const auto& o : out) {
        if (!o.ok) {
            ++rep.projection_failures;
            continue;
        }
        ++rep.checked;
        if (o.uncovered) ++rep.uncovered;
        else ++rep.per_patch[o.patch];
        if (o.near) {
            ++rep.near_omega;
            continue;
        }
        rep.min_H2f = std::min(rep.min_H2f, o.worst);
        if (o.violation) rep.violations.push_back({o.z, o.Hf, o.worst, o.patch});
    }
    if (rep.checked == 0) rep.min_H2f = 0.0;
    return rep;
}

// ---- locating Omega ----

LocateReport locate_invariant_set(const ModelBundle& b, const LocateOptions& opts) {
    LocateReport rep;
    const SymbolModel& m = b.model;
    const int n = m.chart.n();
    HamiltonianField H(m, false);
    Compiled p = m.compile(m.p);
    auto seeds = compile_all(m, b.seed);
    Residuals F = omega_residuals(H, seeds, p, n);
    const auto pinned = b.pinned_mask();

    CharSampler sampler(b, opts.seed, opts.quasi);
    std::vector<Vec> starts(opts.n_seeds);
    for (auto& s : starts) s = sampler.raw();
    rep.seeds = opts.n_seeds;

    std::vector<NewtonResult> res(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) {
        res[i] = newton_solve(F, starts[i], pinned, opts.tol, 80);
    });

    for (auto& r : res) {
        if (!r.converged) {
            ++rep.nonconvergent;
            continue;
        }
        ++rep.converged;
        Vec z = r.z;
        b.wrap(z);
        if (!b.in_domain(z)) {
            ++rep.out_of_domain;
            continue;
        }
        if (r.singular) ++rep.singular;
        bool dup = false;
        for (const auto& q : rep.points)
            if (phase_distance(b, q, z) <= opts.merge) {
                dup = true;
                break;
            }
        if (dup) {
            ++rep.merged;
            continue;
        }
        rep.points.push_back(z);
        rep.residuals.push_back(r.residual);
    }
    return rep;
}

// ---- linearization ----

RescaledChoice rescaling_at(const SymbolModel& m, const Vec& z) {
    const int n = m.chart.n();
    if (m.rho_alt) {
        double r = m.compile(m.rho)(z);
        if (std::fabs(r) < 1e-3 * z.tail(n).norm()) return {*m.rho_alt, true};
    }
    return {m.rho, false};
}

std::vector<PhaseFunctionPtr> frame_functions(const ModelBundle& b, const Vec& z, int* index,
                                              bool* alternate) {
    const SymbolModel& m = b.model;
    RescaledChoice rc = rescaling_at(m, z);
    if (alternate) *alternate = rc.alternate;
    for (std::size_t k = 0; k < b.frames.size(); ++k) {
        std::vector<Fn> fs;
        bool ok = true;
        for (const auto& e : b.frames[k]) {
            Fn f = make_function(e, m);
            double v;
            try {
                v = f->value(z.data());
            } catch (const std::exception&) {
                ok = false;
                break;
            }
            if (!std::isfinite(v) || std::fabs(v) > 1e-8) {
                ok = false;
                break;
            }
            fs.push_back(f);
        }
        if (ok) {
            if (index) *index = static_cast<int>(k);
            return fs;
        }
    }
    if (index) *index = -1;
    auto H = std::make_shared<const HamiltonianField>(m, true, rc.rho);
    // keep H~ f_i, H~^2 f_i only while their differentials stay independent of dp,
    // the pinned directions and the functions already kept
    std::vector<Fn> fs;
    Compiled p = m.compile(m.p);
    Mat kept(0, z.size());
    auto rank_of = [&](const Mat& G) {
        Mat C = with_constraints(G, gradient_of(p, z), b.pinned_mask());
        for (int i = 0; i < C.rows(); ++i) {
            double nr = C.row(i).norm();
            if (nr > 0) C.row(i) /= nr;
        }
        Eigen::JacobiSVD<Mat> svd(C);
        svd.setThreshold(1e-8);
        return static_cast<int>(svd.rank());
    };
    int r0 = rank_of(kept);
    for (const auto& e : b.seed) {
        Compiled c = m.compile(e);
        for (int order : {1, 2}) {
            Fn f = std::make_shared<LieFunction>(H, c, order);
            Mat G(kept.rows() + 1, z.size());
            G.topRows(kept.rows()) = kept;
            G.row(kept.rows()) = gradient_of(*f, z).transpose();
            int r = rank_of(G);
            if (r > r0) {
                fs.push_back(f);
                kept = G;
                r0 = r;
            }
        }
    }
    return fs;
}

namespace {

// d(H~ v) at z: exact for expression frames, from a short tangent flow otherwise.
Mat lie_differentials(const HamiltonianField& X, const std::vector<Fn>& v, const Vec& z) {
    const int d = X.dim();
    const int k = static_cast<int>(v.size());
    Mat out(k, d);
    Vec Xz(d);
    RowMat DX(d, d);
    X.jacobian(z.data(), Xz.data(), DX.data());
    bool all_expr = true;
    for (const auto& f : v)
        if (!dynamic_cast<const ExprFunction*>(f.get())) all_expr = false;
    if (all_expr) {
        for (int i = 0; i < k; ++i) {
            const auto& c = static_cast<const ExprFunction&>(*v[i]).compiled();
            Vec g(d);
            RowMat Hs(d, d);
            c.hess(z.data(), g.data(), Hs.data());
            out.row(i) = (Hs * Xz + DX.transpose() * g).transpose();
        }
        return out;
    }
    // d/dt [dv(phi_t z) D phi_t] at t = 0, fourth-order stencil
    const double eps = 1e-3;
    auto G = [&](double t) {
        Mat Gt(k, d);
        if (t == 0.0) {
            for (int i = 0; i < k; ++i) Gt.row(i) = gradient_of(*v[i], z).transpose();
            return Gt;
        }
        TangentOptions to;
        to.reorth_dt = 1e9;
        to.flow.rtol = 1e-12;
        to.flow.atol = 1e-14;
        TangentFlow tf = tangent_flow(X, z, 0.0, t, to);
        for (int i = 0; i < k; ++i)
            Gt.row(i) = gradient_of(*v[i], tf.z_end).transpose() * Mat(tf.monodromy);
        return Gt;
    };
    out = (-G(2 * eps) + 8 * G(eps) - 8 * G(-eps) + G(-2 * eps)) / (12 * eps);
    return out;
}

}  // namespace

NormalLinearization normal_linearization(const ModelBundle& b, const Vec& z) {
    NormalLinearization L;
    const SymbolModel& m = b.model;
    const int d = m.chart.dim();
    bool alt = false;
    std::vector<Fn> v;
    try {
        v = frame_functions(b, z, &L.frame, &alt);
    } catch (const std::exception& e) {
        L.error = std::string("frame: ") + e.what();
        return L;
    }
    L.rho_alternate = alt;
    const int k = static_cast<int>(v.size());
    for (const auto& f : v) L.frame_str.push_back(f->str());
    try {
        for (const auto& f : v)
            if (!(std::fabs(f->value(z.data())) <= 1e-8)) {
                L.error = "invalid frame: " + f->str() + " does not vanish at the sample";
                return L;
            }
        HamiltonianField X(m, true, rescaling_at(m, z).rho);
        L.dv.resize(k, d);
        for (int i = 0; i < k; ++i) L.dv.row(i) = gradient_of(*v[i], z).transpose();
        Mat T = lie_differentials(X, v, z);
        Compiled p = m.compile(m.p);
        Mat C = with_constraints(L.dv, gradient_of(p, z), b.pinned_mask());
        // T_i = sum_j A_ij dv_j + (constraint terms)
        Eigen::JacobiSVD<Mat> svd(C.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-10);
        L.A.resize(k, k);
        double res = 0.0, scale = 0.0;
        for (int i = 0; i < k; ++i) {
            Vec coef = svd.solve(Vec(T.row(i).transpose()));
            L.A.row(i) = coef.head(k).transpose();
            res = std::max(res, (C.transpose() * coef - T.row(i).transpose()).norm());
            scale = std::max(scale, T.row(i).norm());
        }
        L.fit_residual = scale > 0 ? res / scale : res;
        Eigen::EigenSolver<Mat> es(L.A);
        auto ev = es.eigenvalues();
        Eigen::MatrixXcd R = es.eigenvectors();
        std::vector<int> order(k);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int c) { return ev[a].real() > ev[c].real(); });
        Eigen::MatrixXcd Rs(k, k);
        for (int i = 0; i < k; ++i) {
            L.eigenvalues.push_back(ev[order[i]]);
            Rs.col(i) = R.col(order[i]);
        }
        Eigen::MatrixXcd Ls = Rs.inverse();
        L.right = Rs.real();
        L.left = Ls.real();
        L.e_star = L.left * L.dv;
        L.valid = L.e_star.allFinite();
        if (!L.valid) L.error = "eigenvector basis is singular";
    } catch (const std::exception& e) {
        L.error = e.what();
        L.valid = false;
    }
    return L;
}

// ---- classification ----

Classification classify_invariant_set(const ModelBundle& b, const std::vector<Vec>& omega,
                                      const ClassifyOptions& opts) {
    Classification out;
    const SymbolModel& m = b.model;
    const int n = m.chart.n();
    out.samples.resize(omega.size());
    Compiled p = m.compile(m.p);
    int bpos = -1;
    for (int i = 0; i < n; ++i)
        if (m.chart.is_b(i)) bpos = i;

    parallel_for(omega.size(), [&](std::size_t i) {
        SampleClass& s = out.samples[i];
        const Vec& z = omega[i];
        RescaledChoice rc = rescaling_at(m, z);
        Compiled rho = m.compile(rc.rho);
        HamiltonianField X(m, true, rc.rho);
        const double r = rho(z);
        s.g = lie_derivative(X, rho, z.data()).Hf / r;
        s.frequency_weight = -s.g;
        const double scale = std::pow(r, 1 - m.m);
        if (bpos >= 0) {
            Vec g = gradient_of(p, z);
            s.transversal = scale * g[n + bpos];
            s.has_transversal = true;
        }
        s.lin = normal_linearization(b, z);
        const int orient_rho = m.m % 2 == 1 ? 1 : sgn(r);  // sign of rho^{m-1}
        if (!s.lin.valid) {
            s.label = "unresolved";
            return;
        }
        int pos = 0, neg = 0;
        double tiny = 1e-9;
        for (auto& e : s.lin.eigenvalues) {
            if (e.real() > tiny) ++pos;
            else if (e.real() < -tiny) ++neg;
        }
        const int k = static_cast<int>(s.lin.eigenvalues.size());
        if (std::fabs(s.g) > opts.g_tol) {
            if (pos == k || neg == k) {
                int orient = (pos == k ? 1 : -1) * orient_rho;
                if (s.has_transversal && std::fabs(s.transversal) > tiny &&
                    sgn(s.transversal) * orient_rho != orient)
                    s.label = "saddle";
                else
                    s.label = orient > 0 ? "radial-source" : "radial-sink";
            } else {
                s.label = "unresolved";
            }
        } else if (pos > 0 && neg > 0 && pos + neg == k) {
            s.label = "trapped-candidate";
        } else {
            s.label = "unresolved";
        }
    });

    // single-linkage clusters in seed values, within equal labels
    auto periods = seed_periods(b);
    auto seeds = compile_all(m, b.seed);
    std::vector<Vec> key(omega.size());
    for (std::size_t i = 0; i < omega.size(); ++i) {
        key[i].resize(seeds.size());
        for (std::size_t j = 0; j < seeds.size(); ++j) key[i][j] = seeds[j](omega[i]);
    }
    auto kdist = [&](std::size_t a, std::size_t c) {
        double s2 = 0;
        for (std::size_t j = 0; j < seeds.size(); ++j) {
            double d = wrapped_diff(key[a][j] - key[c][j], periods[j]);
            s2 += d * d;
        }
        return std::sqrt(s2);
    };
    std::vector<int> comp(omega.size(), -1);
    int nc = 0;
    for (std::size_t i = 0; i < omega.size(); ++i) {
        if (comp[i] >= 0) continue;
        comp[i] = nc;
        std::vector<std::size_t> stack{i};
        while (!stack.empty()) {
            std::size_t a = stack.back();
            stack.pop_back();
            for (std::size_t c = 0; c < omega.size(); ++c)
                if (comp[c] < 0 && out.samples[c].label == out.samples[i].label &&
                    kdist(a, c) <= opts.cluster_radius) {
                    comp[c] = nc;
                    stack.push_back(c);
                }
        }
        ++nc;
    }
    out.components.resize(nc);
    for (std::size_t i = 0; i < omega.size(); ++i) out.components[comp[i]].members.push_back(i);
    for (auto& c : out.components) {
        const std::string& lab = out.samples[c.members[0]].label;
        c.kind = lab == "trapped-candidate" ? "trapped" : lab;
        c.g_min = std::numeric_limits<double>::infinity();
        c.g_max = -std::numeric_limits<double>::infinity();
        for (int i : c.members) {
            c.g_min = std::min(c.g_min, out.samples[i].g);
            c.g_max = std::max(c.g_max, out.samples[i].g);
        }
        if (c.kind.rfind("radial", 0) == 0 && c.g_min < 0 && c.g_max > 0)
            c.diagnosis = "split component: g changes sign";
    }
    return out;
}

// ---- rates ----

namespace {

struct OrbitFrame {
    std::vector<Fn> v;
    std::shared_ptr<HamiltonianField> X;
    Compiled p;
};

OrbitFrame orbit_frame(const ModelBundle& b, const Vec& z) {
    OrbitFrame o;
    o.v = frame_functions(b, z, nullptr, nullptr);
    o.X = std::make_shared<HamiltonianField>(b.model, true, rescaling_at(b.model, z).rho);
    o.p = b.model.compile(b.model.p);
    return o;
}

Mat frame_gradients(const std::vector<Fn>& v, const Vec& z) {
    Mat G(v.size(), z.size());
    for (std::size_t i = 0; i < v.size(); ++i) G.row(i) = gradient_of(*v[i], z).transpose();
    return G;
}

bool exits(const ModelBundle& b, const HamiltonianField& X, const Vec& z, double T,
           double rtol) {
    FlowOptions fo;
    fo.rtol = rtol;
    fo.events = exit_regions(b);
    fo.renormalize = true;
    fo.sample_dt = T;
    try {
        auto tr = integrate(X, z, 0.0, T, fo);
        return !tr.events.empty();
    } catch (const std::exception&) {
        return true;
    }
}

}  // namespace

NormalBlockCheck normal_block_exponents(const ModelBundle& b, const Vec& z, double T,
                                        double rtol) {
    NormalBlockCheck out;
    out.z = z;
    out.T = T;
    OrbitFrame o = orbit_frame(b, z);
    const int k = static_cast<int>(o.v.size());
    const auto pinned = b.pinned_mask();
    TangentOptions to;
    to.flow.rtol = rtol;
    to.flow.atol = rtol * 1e-3;
    to.reorth_dt = 1.0;
    TangentFlow tf = tangent_flow(*o.X, z, 0.0, T, to);

    Mat G0 = frame_gradients(o.v, z);
    Mat C0 = with_constraints(G0, gradient_of(o.p, z), pinned);
    Mat rhs = Mat::Zero(C0.rows(), k);
    rhs.topRows(k) = Mat::Identity(k, k);
    Mat W = C0.completeOrthogonalDecomposition().solve(rhs);
    Mat GT = frame_gradients(o.v, tf.z_end);
    Mat D = GT * Mat(tf.monodromy) * W;

    NormalLinearization L0 = normal_linearization(b, z);
    NormalLinearization LT = normal_linearization(b, tf.z_end);
    Mat Dp = (LT.valid ? LT.left : L0.left) * D * L0.right;
    for (int i = 0; i < k; ++i) {
        out.exponents.push_back(std::log(std::fabs(Dp(i, i))) / T);
        out.eigenvalues.push_back(L0.eigenvalues[i].real());
        double rel = std::fabs(out.exponents[i] - out.eigenvalues[i]) /
                     std::max(1e-12, std::fabs(out.eigenvalues[i]));
        out.max_rel_diff = std::max(out.max_rel_diff, rel);
    }
    return out;
}

TangentialRate tangential_exponents(const ModelBundle& b, const Vec& z,
                                    const std::vector<double>& Ts, double rtol) {
    TangentialRate out;
    out.z = z;
    OrbitFrame o = orbit_frame(b, z);
    const auto pinned = b.pinned_mask();
    const double Tmax = *std::max_element(Ts.begin(), Ts.end());

    auto constraints = [&](const Vec& y) {
        return with_constraints(frame_gradients(o.v, y), gradient_of(o.p, y), pinned);
    };
    Mat basis = null_space(constraints(z));
    Residuals on_gamma = [&](const Vec& y) {
        Vec r(o.v.size() + 1);
        for (std::size_t i = 0; i < o.v.size(); ++i) r[i] = o.v[i]->value(y.data());
        r[o.v.size()] = o.p(y);
        return r;
    };
    TangentOptions to;
    to.flow.rtol = rtol;
    to.flow.atol = rtol * 1e-3;
    to.reorth_dt = 1.0;
    to.frame = RowMat(basis);
    struct LeftDomain {};
    to.on_step = [&](double, Vec& y, RowMat& V) {
        Vec w = y;
        b.wrap(w);
        if (!b.in_domain(w)) throw LeftDomain{};
        if (on_gamma(y).lpNorm<Eigen::Infinity>() > 1e-12) {
            auto r = newton_solve(on_gamma, y, pinned, 1e-13, 8);
            if (r.residual < on_gamma(y).lpNorm<Eigen::Infinity>()) y = r.z;
        }
        Mat C = constraints(y);
        Mat P = Mat::Identity(y.size(), y.size()) -
                C.completeOrthogonalDecomposition().pseudoInverse() * C;
        V = P * Mat(V);
    };
    TangentFlow tf;
    try {
        tf = tangent_flow(*o.X, z, 0.0, Tmax, to);
    } catch (const LeftDomain&) {
        return out;
    }

    double running = 0.0;
    std::size_t j = 0;
    for (double T : Ts) {
        double best_t = 0.0, at_T = 0.0;
        for (; j < tf.sample_t.size() && tf.sample_t[j] <= T + 1e-9; ++j) {
            double mx = tf.sample_log_stretch[j].cwiseAbs().maxCoeff();
            running = std::max(running, mx);
            best_t = tf.sample_t[j];
            at_T = mx;
        }
        out.T.push_back(T);
        out.beta.push_back(best_t > 0 ? at_T / best_t : 0.0);
        out.log_growth.push_back(running);
    }
    return out;
}

double extrapolated_rate(const std::vector<double>& T, const std::vector<double>& L) {
    const int k = static_cast<int>(T.size());
    if (k < 3) return k ? L.back() / T.back() : 0.0;
    Mat A(k, 3);
    Vec y(k);
    for (int i = 0; i < k; ++i) {
        A(i, 0) = T[i];
        A(i, 1) = std::log(T[i]);
        A(i, 2) = 1.0;
        y[i] = L[i];
    }
    Vec c = A.colPivHouseholderQr().solve(y);
    return std::max(0.0, c[0]);
}

Rates expansion_rates(const ModelBundle& b, const std::vector<Vec>& gamma,
                      const std::vector<SampleClass>& cls, const RateOptions& opts) {
    Rates R;
    R.nu_u = R.nu_s = std::numeric_limits<double>::infinity();
    std::vector<double> ref;
    for (std::size_t i = 0; i < cls.size(); ++i) {
        const auto& lin = cls[i].lin;
        if (!lin.valid) continue;
        int du = 0, ds = 0;
        std::vector<double> re;
        for (auto& e : lin.eigenvalues) {
            re.push_back(e.real());
            if (e.real() < 0) {
                ++du;
                R.nu_u = std::min(R.nu_u, -e.real());
            } else if (e.real() > 0) {
                ++ds;
                R.nu_s = std::min(R.nu_s, e.real());
            }
        }
        if (ref.empty()) {
            ref = re;
            R.dim_u = du;
            R.dim_s = ds;
        } else if (re.size() == ref.size()) {
            for (std::size_t k = 0; k < re.size(); ++k)
                R.eig_spread = std::max(R.eig_spread, std::fabs(re[k] - ref[k]) /
                                                          std::max(1e-12, std::fabs(ref[k])));
        }
    }
    if (ref.empty()) {
        R.error = "no valid normal linearization on Γ";
        R.nu_u = R.nu_s = 0.0;
        return R;
    }
    if (R.dim_u == 0 || R.dim_s == 0) {
        R.error = R.dim_u == 0 ? "empty unstable spectrum" : "empty stable spectrum";
        if (!std::isfinite(R.nu_u)) R.nu_u = 0.0;
        if (!std::isfinite(R.nu_s)) R.nu_s = 0.0;
        return R;
    }
    R.flow_constant = R.eig_spread <= 1e-6;

    // orbits that stay inside the chart
    auto pick = [&](double T, int want) {
        std::vector<int> idx;
        for (std::size_t i = 0; i < gamma.size() && static_cast<int>(idx.size()) < want; ++i) {
            OrbitFrame o = orbit_frame(b, gamma[i]);
            if (!exits(b, *o.X, gamma[i], T, opts.flow_rtol)) idx.push_back(static_cast<int>(i));
        }
        return idx;
    };
    if (opts.n_normal > 0) {
        auto idx = pick(opts.T_normal, opts.n_normal);
        R.normal_checks.resize(idx.size());
        parallel_for(idx.size(), [&](std::size_t j) {
            R.normal_checks[j] =
                normal_block_exponents(b, gamma[idx[j]], opts.T_normal, opts.flow_rtol);
        });
        for (auto& c : R.normal_checks) R.normal_max_rel_diff = std::max(R.normal_max_rel_diff, c.max_rel_diff);
        if (!R.flow_constant && !R.normal_checks.empty()) {
            // finite-time exponents replace the pointwise spectrum
            double nu = std::numeric_limits<double>::infinity(), ns = nu;
            for (auto& c : R.normal_checks)
                for (double e : c.exponents) {
                    if (e < 0) nu = std::min(nu, -e);
                    else ns = std::min(ns, e);
                }
            if (std::isfinite(nu)) R.nu_u = nu;
            if (std::isfinite(ns)) R.nu_s = ns;
        }
    }
    if (opts.n_beta > 0 && !opts.T_beta.empty()) {
        std::vector<int> cand;
        for (std::size_t i = 0; i < gamma.size() && cand.size() < static_cast<std::size_t>(4 * opts.n_beta + 8); ++i)
            cand.push_back(static_cast<int>(i));
        std::vector<TangentialRate> tr(cand.size());
        std::vector<char> ok(cand.size(), 0);
        std::size_t done = 0;
        // batches keep the work bounded once enough orbits stayed inside
        while (done < cand.size()) {
            std::size_t hi = std::min(cand.size(), done + static_cast<std::size_t>(opts.n_beta));
            parallel_for(hi - done, [&](std::size_t j) {
                tr[done + j] = tangential_exponents(b, gamma[cand[done + j]], opts.T_beta,
                                                    opts.flow_rtol);
                ok[done + j] = !tr[done + j].T.empty();
            });
            done = hi;
            int good = 0;
            for (std::size_t j = 0; j < done; ++j) good += ok[j];
            if (good >= opts.n_beta) break;
        }
        R.T_beta = opts.T_beta;
        R.beta.assign(opts.T_beta.size(), 0.0);
        for (std::size_t j = 0; j < done; ++j) {
            if (!ok[j] || R.beta_samples >= opts.n_beta) continue;
            ++R.beta_samples;
            for (std::size_t t = 0; t < opts.T_beta.size(); ++t)
                R.beta[t] = std::max(R.beta[t], tr[j].beta[t]);
            R.beta_extrapolated =
                std::max(R.beta_extrapolated, extrapolated_rate(tr[j].T, tr[j].log_growth));
            R.tangential.push_back(tr[j]);
        }
        R.beta_decreasing = R.beta_samples > 0;
        for (std::size_t t = 1; t < R.beta.size(); ++t)
            if (!(R.beta[t] < R.beta[t - 1])) R.beta_decreasing = false;
    }
    return R;
}

// ---- symplecticity ----

SymplecticCheck symplectic_check(const ModelBundle& b, const Vec& z) {
    SymplecticCheck out;
    const Chart& c = b.model.chart;
    auto v = frame_functions(b, z, nullptr, nullptr);
    const int d = c.dim();
    const int k = static_cast<int>(v.size());
    Mat G(k, d);
    for (int i = 0; i < k; ++i) {
        Vec g = gradient_of(*v[i], z);
        G.row(i) = b_gradient(c, z.data(), g.data()).transpose();
    }
    Mat N = null_space(G);
    out.dim = static_cast<int>(N.cols());
    std::vector<Vec> basis;
    for (int j = 0; j < N.cols(); ++j) basis.push_back(N.col(j));
    out.rank = symplectic_rank(c, z, basis, VectorFrame::BFrame);
    // bracket matrix of the frame in the b-form
    const int n = c.n();
    Mat J = Mat::Zero(d, d);
    for (int i = 0; i < n; ++i) {
        J(i, n + i) = 1.0;
        J(n + i, i) = -1.0;
    }
    Mat B = G * J * G.transpose();
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) B(i, j) /= std::max(1e-300, G.row(i).norm() * G.row(j).norm());
    Eigen::JacobiSVD<Mat> svd(B);
    const auto& s = svd.singularValues();
    out.bracket_min_sv = s.size() ? s[s.size() - 1] : 0.0;
    out.bracket_rank = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s[i] > 1e-9) ++out.bracket_rank;
    out.symplectic = out.dim % 2 == 0 && out.rank == out.dim && out.bracket_rank == k;
    return out;
}

// ---- defining functions ----

DefiningReport verify_defining_functions(const ModelBundle& b, const std::vector<Vec>& gamma,
                                         const DefiningOptions& opts) {
    if (!b.phi_u || !b.phi_s) throw std::invalid_argument("bundle has no defining functions");
    return verify_defining_functions(b, gamma, b.phi_u, b.phi_s, b.w_u, b.w_s, opts);
}

DefiningReport verify_defining_functions(const ModelBundle& b, const std::vector<Vec>& gamma,
                                         const PhaseFunctionPtr& phi_u,
                                         const PhaseFunctionPtr& phi_s,
                                         const std::optional<Expr>& w_u,
                                         const std::optional<Expr>& w_s,
                                         const DefiningOptions& opts) {
    DefiningReport rep;
    rep.requested = opts.n_samples;
    rep.u.phi = phi_u->str();
    rep.s.phi = phi_s->str();
    if (gamma.empty()) return rep;
    const SymbolModel& m = b.model;
    const int n = m.chart.n();
    const int d = m.chart.dim();
    const auto pinned = b.pinned_mask();
    Compiled p = m.compile(m.p);
    Compiled rho = m.compile(m.rho);
    Residuals to_char = [&](const Vec& z) {
        Vec r(2);
        r[0] = p(z);
        r[1] = momentum_sq(z, n) - 1.0;
        return r;
    };

    // samples near Γ on Char
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::vector<Vec> pts;
    std::vector<double> dist;
    int tries = 0;
    while (static_cast<int>(pts.size()) < opts.n_samples && tries < 20 * opts.n_samples) {
        ++tries;
        const Vec& a = gamma[tries % gamma.size()];
        Vec dir(d);
        for (int i = 0; i < d; ++i) dir[i] = pinned[i] ? 0.0 : nd(rng);
        dir.normalize();
        Vec z = a + opts.radius * ud(rng) * dir;
        auto r = newton_solve(to_char, z, pinned, 1e-13);
        if (!r.converged) continue;
        z = r.z;
        b.wrap(z);
        if (!b.in_domain(z)) continue;
        double dd = phase_distance(b, z, a);
        if (dd > opts.radius) continue;
        if (opts.rho_sign != 0.0 && sgn(rho(z)) != sgn(opts.rho_sign)) continue;
        if (std::fabs(p(z)) > opts.char_tol) {
            ++rep.rejected_off_char;
            continue;
        }
        pts.push_back(z);
        dist.push_back(dd);
    }
    rep.distance = dist;

    auto run_side = [&](DefiningSide& side, const PhaseFunctionPtr& phi, int sign,
                        const std::optional<Expr>& w) {
        // phi vanishing on all of Char is not a defining function of a proper subset
        int zero = 0;
        for (const auto& z : pts)
            if (std::fabs(phi->value(z.data())) <= 1e-10) ++zero;
        if (!pts.empty() && zero * 2 > static_cast<int>(pts.size())) {
            side.invalid = true;
            side.diagnosis = "vanishes on all sampled Char points; not a defining function of Γ_" +
                             std::string(sign < 0 ? "u" : "s");
            return;
        }
        std::optional<Compiled> wc;
        if (w) wc = m.compile(*w);
        side.has_supplied = w.has_value();
        struct R {
            bool ok = false;
            double res = 0, w = 0, sup = 0;
        };
        std::vector<R> rs(pts.size());
        parallel_for(pts.size(), [&](std::size_t i) {
            const Vec& z = pts[i];
            Residuals foot = [&](const Vec& y) {
                Vec r(3);
                r[0] = phi->value(y.data());
                r[1] = p(y);
                r[2] = momentum_sq(y, n) - 1.0;
                return r;
            };
            try {
                HamiltonianField X(m, true, rescaling_at(m, z).rho);
                auto hphi = [&](const Vec& y, Vec* grad) {
                    Vec g(d);
                    phi->gradient(y.data(), g.data());
                    if (grad) *grad = g;
                    return g.dot(X(y));
                };
                if (wc) {
                    Vec g;
                    double h = hphi(z, &g);
                    rs[i].sup = std::fabs(h - sign * (*wc)(z) * phi->value(z.data())) /
                                (g.norm() * X(z).norm());
                }
                auto r = newton_solve(foot, z, pinned, 1e-12);
                if (!r.converged || r.singular) return;
                Vec z0 = r.z;
                Vec g0;
                double h0 = hphi(z0, &g0);
                rs[i].res = std::fabs(h0) / (g0.norm() * X(z0).norm());
                // weight from a Char-projected stencil across {phi = 0}
                Vec nrm = g0;
                for (int j = 0; j < d; ++j)
                    if (pinned[j]) nrm[j] = 0.0;
                nrm.normalize();
                std::vector<double> xs{phi->value(z0.data())}, ys{h0};
                for (double t : {-2e-4, -1e-4, 1e-4, 2e-4}) {
                    auto q = newton_solve(to_char, z0 + t * nrm, pinned, 1e-13);
                    if (!q.converged) continue;
                    xs.push_back(phi->value(q.z.data()));
                    ys.push_back(hphi(q.z, nullptr));
                }
                if (xs.size() < 3) return;
                double mx = 0, my = 0;
                for (std::size_t k = 0; k < xs.size(); ++k) {
                    mx += xs[k];
                    my += ys[k];
                }
                mx /= xs.size();
                my /= xs.size();
                double sxy = 0, sxx = 0;
                for (std::size_t k = 0; k < xs.size(); ++k) {
                    sxy += (xs[k] - mx) * (ys[k] - my);
                    sxx += (xs[k] - mx) * (xs[k] - mx);
                }
                if (sxx <= 0) return;
                rs[i].w = sign * sxy / sxx;
                rs[i].ok = true;
            } catch (const std::exception&) {
            }
        });
        side.w_min = std::numeric_limits<double>::infinity();
        side.w_max = -std::numeric_limits<double>::infinity();
        double sum = 0;
        for (const auto& r : rs) {
            if (side.has_supplied) side.max_supplied_residual = std::max(side.max_supplied_residual, r.sup);
            if (!r.ok) {
                ++side.failures;
                continue;
            }
            ++side.checked;
            side.max_residual = std::max(side.max_residual, r.res);
            sum += r.res;
            side.w_min = std::min(side.w_min, r.w);
            side.w_max = std::max(side.w_max, r.w);
        }
        if (side.checked) side.mean_residual = sum / side.checked;
        else side.w_min = side.w_max = 0.0;
        if (side.failures * 2 > static_cast<int>(pts.size())) {
            side.invalid = true;
            side.diagnosis = "zero set of phi could not be reached transversally on Char";
        }
    };
    run_side(rep.u, phi_u, -1, w_u);
    run_side(rep.s, phi_s, +1, w_s);
    return rep;
}

// ---- flowout ----

FlowoutFunction::FlowoutFunction(PhaseFunctionPtr phi, std::shared_ptr<const VectorField> field,
                                 double T, std::vector<Region> exits, double rtol)
    : phi_(std::move(phi)), field_(std::move(field)), T_(T), exits_(std::move(exits)),
      rtol_(rtol) {
    if (!(T >= 0) || !std::isfinite(T)) throw std::invalid_argument("flowout time must be finite and >= 0");
}

std::string FlowoutFunction::str() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", T_);
    return phi_->str() + " flown out for T = " + buf;
}

Vec FlowoutFunction::pull_back(const Vec& z) const {
    if (T_ == 0.0) return z;
    std::string key(reinterpret_cast<const char*>(z.data()), sizeof(double) * z.size());
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    FlowOptions fo;
    fo.rtol = rtol_;
    fo.atol = rtol_ * 1e-2;
    fo.events = exits_;
    fo.sample_dt = T_;
    auto tr = integrate(*field_, z, 0.0, -T_, fo);
    if (!tr.events.empty())
        throw ModelError("backward trajectory left the chart (" + tr.events[0].region + ")");
    Vec out = tr.back();
    std::lock_guard<std::mutex> lk(mu_);
    cache_.emplace(key, out);
    return out;
}

double FlowoutFunction::value(const double* z) const {
    Vec v = Eigen::Map<const Vec>(z, dim());
    Vec w = pull_back(v);
    return phi_->value(w.data());
}

std::size_t FlowoutFunction::cache_size() const {
    std::lock_guard<std::mutex> lk(mu_);
    return cache_.size();
}

// ---- alpha ----

double alpha_profile(double F, double a, double eps) {
    if (F <= a - eps) return 1.0;
    if (F >= a) return 0.0;
    double s = (F - (a - eps)) / eps;
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

double alpha_profile_derivative(double F, double a, double eps) {
    if (F <= a - eps || F >= a) return 0.0;
    double s = (F - (a - eps)) / eps;
    return -30.0 * s * s * (1.0 - s) * (1.0 - s) / eps;
}

AlphaReport build_alpha(const EscapeFunction& F, double a, double eps,
                        const std::vector<Vec>& points) {
    if (!(a > eps && eps > 0)) throw std::invalid_argument("alpha needs a > eps > 0");
    AlphaReport rep;
    rep.max_H_alpha = -std::numeric_limits<double>::infinity();
    for (const auto& z : points) {
        double h = alpha_profile_derivative(F.F(z.data()), a, eps) * F.HF(z.data());
        rep.max_H_alpha = std::max(rep.max_H_alpha, h);
        if (h > 1e-10) ++rep.violations;
        ++rep.samples;
    }
    if (!rep.samples) rep.max_H_alpha = 0.0;
    return rep;
}

// ---- propagation time ----

PropagationBound propagation_time_bound(const std::vector<double>& F_inside,
                                        const std::vector<double>& HF_outside, double eps) {
    PropagationBound out;
    out.n_inside = static_cast<int>(F_inside.size());
    out.n_outside = static_cast<int>(HF_outside.size());
    if (F_inside.empty() || HF_outside.empty()) {
        out.error = "bound unavailable: empty sample set";
        return out;
    }
    out.sup_F = *std::max_element(F_inside.begin(), F_inside.end());
    out.inf_HF = *std::min_element(HF_outside.begin(), HF_outside.end());
    if (!(out.inf_HF > 0)) {
        out.error = "bound unavailable: inf H(F) <= 0 outside O";
        return out;
    }
    out.tau = (out.sup_F + eps) / out.inf_HF;
    out.available = true;
    return out;
}

PropagationBound propagation_time_bound(const EscapeFunction& F, const std::vector<Vec>& inside,
                                        const std::vector<Vec>& outside, double eps) {
    std::vector<double> a, c;
    for (const auto& z : inside) a.push_back(F.F(z.data()));
    for (const auto& z : outside) c.push_back(F.HF(z.data()));
    return propagation_time_bound(a, c, eps);
}

// ---- dual coefficients ----

DualCoefficients symplectic_dual_coefficients(const SymbolModel& m,
                                              const std::vector<PhaseFunctionPtr>& phi_u,
                                              const PhaseFunctionPtr& phi_s1,
                                              const std::vector<Vec>& gamma) {
    DualCoefficients out;
    if (phi_u.empty()) {
        out.error = "no unstable defining functions";
        return out;
    }
    Compiled rho = m.compile(m.rho);
    for (const auto& z : gamma) {
        RowMat J = poisson_tensor(m.chart, z.data());
        Vec gs = gradient_of(*phi_s1, z);
        Vec pair(phi_u.size());
        double scale = 0.0;
        for (std::size_t i = 0; i < phi_u.size(); ++i) {
            Vec gu = gradient_of(*phi_u[i], z);
            // H_{phi_u}(phi_s) = {phi_s, phi_u}
            pair[i] = gs.dot(J * gu);
            scale = std::max(scale, gu.norm() * gs.norm());
        }
        const double r = rho(z);
        if (!(pair.norm() > 1e-12 * scale) || r == 0.0) {
            out.error = "singular pairing: Γ_u and Γ_s are not transversal at a sample";
            out.f.clear();
            return out;
        }
        Vec f = pair / (r * pair.squaredNorm());
        out.f.emplace_back(f.data(), f.data() + f.size());
        out.max_residual = std::max(out.max_residual, std::fabs(r * f.dot(pair) - 1.0));
    }
    out.valid = true;
    return out;
}

// ---- certificate ----

TrappingCertificate certify_nht(const ModelBundle& b, const CertifyOptions& opts) {
    TrappingCertificate c;
    c.model_id = b.model.id;
    auto fail = [&](const std::string& why) {
        c.verdict = "inconclusive: " + why;
        return c;
    };

    if (opts.check_escape) {
        c.escape = verify_escape_condition(b, opts.escape);
        if (c.escape->degenerate) return fail("escape seed rejected (" + c.escape->diagnosis + ")");
    }
    c.located = locate_invariant_set(b, opts.locate);
    if (c.located.points.empty()) return fail("no invariant set located");
    c.classes = classify_invariant_set(b, c.located.points, opts.classify);

    std::vector<SampleClass> gcls;
    for (std::size_t k = 0; k < c.classes.components.size(); ++k) {
        const auto& comp = c.classes.components[k];
        if (comp.kind != "trapped") continue;
        if (c.trapped_component < 0) c.trapped_component = static_cast<int>(k);
        for (int i : comp.members) {
            c.gamma.push_back(c.located.points[i]);
            gcls.push_back(c.classes.samples[i]);
            c.max_residual = std::max(c.max_residual, c.located.residuals[i]);
        }
    }
    if (c.gamma.empty()) {
        c.verdict = "no trapped component";
        return c;
    }
    for (const auto& s : gcls) {
        c.g_max = std::max(c.g_max, std::fabs(s.g));
        if (s.has_transversal) {
            double f = -s.transversal;
            c.f_transversal_min = std::min(c.f_transversal_min.value_or(f), f);
            c.f_transversal_max = std::max(c.f_transversal_max.value_or(f), f);
        }
    }

    c.rates = expansion_rates(b, c.gamma, gcls, opts.rates);
    const Rates& R = *c.rates;

    c.symplectic_ok = true;
    const std::size_t nsym = std::min<std::size_t>(c.gamma.size(), 50);
    c.symplectic.resize(nsym);
    parallel_for(nsym, [&](std::size_t i) { c.symplectic[i] = symplectic_check(b, c.gamma[i]); });
    for (const auto& s : c.symplectic) c.symplectic_ok = c.symplectic_ok && s.symplectic;

    if (opts.check_defining && b.phi_u && b.phi_s) {
        DefiningOptions d = opts.defining;
        if (b.kerr) d.rho_sign = 1.0;
        // anchors on the component the pair defines
        std::vector<Vec> anchors;
        for (const auto& z : c.gamma)
            if (std::fabs(b.phi_u->value(z.data())) <= 1e-6 &&
                std::fabs(b.phi_s->value(z.data())) <= 1e-6)
                anchors.push_back(z);
        if (anchors.empty())
            c.notes.push_back("defining functions do not vanish on the located Γ");
        else
            c.defining = verify_defining_functions(b, anchors, d);
    }

    if (!R.error.empty()) return fail(R.error);
    if (!(R.nu_u > 0)) return fail("nu_u <= 0");
    if (!(R.nu_s > 0)) return fail("nu_s <= 0");
    if (c.max_residual > opts.residual_tol) return fail("Γ residual above tolerance");
    if (c.escape && !c.escape->violations.empty())
        return fail("escape condition violated at " + std::to_string(c.escape->violations.size()) +
                    " samples");
    if (!c.symplectic_ok) return fail("Γ not symplectic");
    if (R.dim_u != R.dim_s) return fail("dim E_u != dim E_s on a symplectic Γ");
    if (R.normal_max_rel_diff > opts.rate_discrepancy)
        c.notes.push_back("finite-time normal exponents differ from the spectrum by more than " +
                          std::to_string(opts.rate_discrepancy * 100) + "%");
    if (R.beta_samples == 0) return fail("no Γ orbit stayed inside the chart for the β horizon");

    const double nu = std::min(R.nu_u, R.nu_s);
    if (R.beta_extrapolated <= opts.rates.beta_tol) {
        c.all_r = true;
        c.verdict = "NHT-certified, all r";
    } else {
        double beta = R.beta.back();
        int r = static_cast<int>(std::ceil(nu / beta)) - 1;
        if (r * beta >= nu) --r;
        if (r < 1) return fail("r beta < nu fails for r = 1");
        c.r_max = r;
        c.verdict = "NHT-certified, r <= " + std::to_string(r);
    }
    return c;
}

}  // namespace nht
