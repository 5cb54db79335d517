#include "nht/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace nht {

std::vector<std::string> Chart::coords() const {
    std::vector<std::string> c = positions;
    c.insert(c.end(), momenta.begin(), momenta.end());
    return c;
}

int Chart::index(const std::string& name) const {
    auto c = coords();
    for (std::size_t i = 0; i < c.size(); ++i)
        if (c[i] == name) return static_cast<int>(i);
    return -1;
}

bool Chart::has_boundary() const {
    for (bool b : bflags)
        if (b) return true;
    return false;
}

void Chart::validate() const {
    if (positions.empty()) throw std::invalid_argument("chart has no coordinates");
    if (positions.size() != momenta.size())
        throw std::invalid_argument("chart needs one momentum per position");
    if (!bflags.empty() && bflags.size() != positions.size())
        throw std::invalid_argument("chart b-flags must match positions");
    std::set<std::string> seen;
    for (const auto& c : coords()) {
        if (!seen.insert(c).second) throw std::invalid_argument("duplicate coordinate '" + c + "'");
    }
    for (const auto& p : params) {
        if (seen.count(p)) throw std::invalid_argument("parameter '" + p + "' shadows a coordinate");
    }
}

void SymbolModel::validate() const {
    chart.validate();
    if (m < 1) throw std::invalid_argument("symbol degree m must be >= 1");
    if (!(mu > 0)) throw std::invalid_argument("decay exponent mu must be > 0");
    // binds every expression, so unknown names surface here
    compile(p);
    compile(rho);
    if (rho_alt) compile(*rho_alt);
    if (p1) compile(*p1);
    if (q) compile(*q);
}

void VectorField::jacobian(const double* z, double* dz, double* J) const {
    const int d = dim();
    eval(z, dz);
    Vec zp(d), fp(d), fm(d);
    for (int k = 0; k < d; ++k) {
        double h = 1e-6 * std::max(1.0, std::fabs(z[k]));
        zp = Eigen::Map<const Vec>(z, d);
        zp[k] = z[k] + h;
        eval(zp.data(), fp.data());
        zp[k] = z[k] - h;
        eval(zp.data(), fm.data());
        for (int i = 0; i < d; ++i) J[i * d + k] = (fp[i] - fm[i]) / (2 * h);
    }
}

RowMat VectorField::jacobian(const Vec& z) const {
    RowMat J(dim(), dim());
    Vec dz(dim());
    jacobian(z.data(), dz.data(), J.data());
    return J;
}

void LinearField::eval(const double* z, double* dz) const {
    Eigen::Map<Vec>(dz, dim()) = A_ * Eigen::Map<const Vec>(z, dim());
}

void LinearField::jacobian(const double* z, double* dz, double* J) const {
    eval(z, dz);
    Eigen::Map<RowMat>(J, dim(), dim()) = A_;
}

HamiltonianField::HamiltonianField(const SymbolModel& model, bool rescaled,
                                   const std::optional<Expr>& rho_override)
    : chart_(model.chart),
      p_(model.compile(model.p)),
      rho_(model.compile(rho_override ? *rho_override : model.rho)),
      m_(model.m),
      rescaled_(rescaled && model.m != 1) {}

double HamiltonianField::scale(const double* z, double* grad_scale) const {
    const int d = dim();
    if (!rescaled_) {
        if (grad_scale) std::fill(grad_scale, grad_scale + d, 0.0);
        return 1.0;
    }
    thread_local std::vector<double> g;
    g.resize(d);
    double r = rho_.grad(z, g.data());
    if (!(std::fabs(r) > 1e-12))
        throw RescalingError("rescaling singular: |rho| = " + std::to_string(std::fabs(r)) +
                             " below 1e-12");
    double s = std::pow(r, 1 - m_);
    if (grad_scale) {
        double ds = (1 - m_) * std::pow(r, -m_);
        for (int k = 0; k < d; ++k) grad_scale[k] = ds * g[k];
    }
    return s;
}

void HamiltonianField::eval(const double* z, double* dz) const {
    const int n = chart_.n();
    thread_local std::vector<double> g;
    g.resize(2 * n);
    p_.grad(z, g.data());
    double s = scale(z, nullptr);
    for (int i = 0; i < n; ++i) {
        double w = chart_.is_b(i) ? z[i] : 1.0;
        dz[i] = s * w * g[n + i];
        dz[n + i] = -s * w * g[i];
    }
}

void HamiltonianField::jacobian(const double* z, double* dz, double* J) const {
    const int n = chart_.n();
    const int d = 2 * n;
    thread_local std::vector<double> g, H, gs;
    g.resize(d);
    H.resize(d * d);
    gs.resize(d);
    p_.hess(z, g.data(), H.data());
    double s = scale(z, gs.data());
    // unscaled Y and DY, then X = s Y, DX = s DY + Y gs^T
    for (int i = 0; i < n; ++i) {
        bool b = chart_.is_b(i);
        double w = b ? z[i] : 1.0;
        double yi = w * g[n + i];
        double yni = -w * g[i];
        for (int k = 0; k < d; ++k) {
            double a = w * H[(n + i) * d + k];
            double c = -w * H[i * d + k];
            if (b && k == i) {
                a += g[n + i];
                c -= g[i];
            }
            J[i * d + k] = s * a + yi * gs[k];
            J[(n + i) * d + k] = s * c + yni * gs[k];
        }
        dz[i] = s * yi;
        dz[n + i] = s * yni;
    }
}

RowMat poisson_tensor(const Chart& chart, const double* z) {
    const int n = chart.n();
    RowMat J = RowMat::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        double w = chart.is_b(i) ? z[i] : 1.0;
        J(i, n + i) = w;
        J(n + i, i) = -w;
    }
    return J;
}

PoissonBracket::PoissonBracket(const Expr& a, const Expr& b, const Chart& chart,
                               const std::map<std::string, double>& params)
    : chart_(chart), a_(a, chart.coords(), params), b_(b, chart.coords(), params) {}

double PoissonBracket::operator()(const double* z) const {
    const int d = chart_.dim();
    Vec ga(d), gb(d);
    a_.grad(z, ga.data());
    b_.grad(z, gb.data());
    return ga.dot(poisson_tensor(chart_, z) * gb);
}

LieJet lie_derivative(const VectorField& field, const Compiled& f, const double* z) {
    const int d = field.dim();
    Vec X(d), g(d);
    RowMat DX(d, d), Hf(d, d);
    field.jacobian(z, X.data(), DX.data());
    LieJet out;
    out.f = f.hess(z, g.data(), Hf.data());
    out.Hf = g.dot(X);
    out.H2f = X.dot(Hf * X) + g.dot(DX * X);
    return out;
}

double PhaseFunction::gradient(const double* z, double* g) const {
    const int d = dim();
    Vec w = Eigen::Map<const Vec>(z, d);
    for (int k = 0; k < d; ++k) {
        double h = 1e-6 * std::max(1.0, std::fabs(z[k]));
        double x = w[k];
        w[k] = x + h;
        double fp = value(w.data());
        w[k] = x - h;
        double fm = value(w.data());
        w[k] = x;
        g[k] = (fp - fm) / (2 * h);
    }
    return value(z);
}

PhaseFunctionPtr make_function(const Expr& e, const SymbolModel& model) {
    return std::make_shared<ExprFunction>(model.compile(e));
}

double lie_derivative(const VectorField& field, const PhaseFunction& f, const double* z) {
    const int d = field.dim();
    Vec X(d), g(d);
    field.eval(z, X.data());
    f.gradient(z, g.data());
    return g.dot(X);
}

Vec b_gradient(const Chart& chart, const double* z, const double* grad) {
    Vec g = Eigen::Map<const Vec>(grad, chart.dim());
    for (int i = 0; i < chart.n(); ++i)
        if (chart.is_b(i)) g[i] *= z[i];
    return g;
}

Mat symplectic_gram(const Chart& chart, const std::vector<Vec>& basis) {
    const int n = chart.n();
    const int k = static_cast<int>(basis.size());
    Mat W(k, k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            double s = 0;
            for (int i = 0; i < n; ++i)
                s += basis[a][n + i] * basis[b][i] - basis[a][i] * basis[b][n + i];
            W(a, b) = s;
        }
    return W;
}

int symplectic_rank(const Chart& chart, const Vec& point, const std::vector<Vec>& basis,
                    VectorFrame frame, double rel_cut) {
    if (basis.empty()) return 0;
    std::vector<Vec> v = basis;
    if (frame == VectorFrame::Coordinate) {
        for (int i = 0; i < chart.n(); ++i) {
            if (!chart.is_b(i)) continue;
            if (point[i] == 0.0)
                throw std::invalid_argument("coordinate-frame vectors undefined at tau = 0");
            for (auto& x : v) x[i] /= point[i];
        }
    }
    Mat W = symplectic_gram(chart, v);
    Eigen::JacobiSVD<Mat> svd(W);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0) return 0;
    int r = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s[i] > rel_cut * s[0]) ++r;
    return r;
}

double homogeneity_defect(const SymbolModel& model, const std::vector<Vec>& points) {
    Compiled p = model.compile(model.p);
    const int n = model.chart.n();
    double worst = 0.0;
    for (const Vec& z : points) {
        double base = p(z);
        for (double lam : {2.0, 1.0 / 3.0}) {
            Vec w = z;
            w.tail(n) *= lam;
            double expect = std::pow(lam, model.m) * base;
            double err = std::fabs(p(w) - expect);
            double mag = std::pow(lam, model.m) *
                         std::max({std::fabs(base), std::pow(z.tail(n).norm(), model.m), 1e-300});
            worst = std::max(worst, err / mag);
        }
    }
    return worst;
}

Expr momentum_norm(const Chart& chart) {
    std::string s;
    for (const auto& m : chart.momenta) s += (s.empty() ? "" : " + ") + m + "^2";
    return Expr::parse("sqrt(" + s + ")");
}

}  // namespace nht
