#include "nht/expr.hpp"

#include <cmath>
#include <numbers>

namespace nht {

namespace {

std::string fmt_arg(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool integral(double c) { return std::isfinite(c) && std::floor(c) == c && std::fabs(c) <= 1024; }

// Value, first and second derivative of a scalar unary function at u.
struct Chain {
    double f0, f1, f2;
};

Chain unary_chain(Op op, double u, const Node* node, EvalStatus& st) {
    switch (op) {
    case Op::Neg: return {-u, -1.0, 0.0};
    case Op::Sin: return {std::sin(u), std::cos(u), -std::sin(u)};
    case Op::Cos: return {std::cos(u), -std::sin(u), -std::cos(u)};
    case Op::Tan: {
        double t = std::tan(u);
        return {t, 1 + t * t, 2 * t * (1 + t * t)};
    }
    case Op::Sqrt: {
        if (u < 0)
            throw DomainError("sqrt of negative argument " + fmt_arg(u), to_string(*node));
        double r = std::sqrt(u);
        return {r, 0.5 / r, -0.25 / (r * u)};
    }
    case Op::Exp: {
        double e = std::exp(u);
        return {e, e, e};
    }
    case Op::Log:
        if (u <= 0)
            throw DomainError("log of non-positive argument " + fmt_arg(u), to_string(*node));
        return {std::log(u), 1 / u, -1 / (u * u)};
    case Op::Abs:
        if (std::fabs(u) < kKinkDelta) st.kink = true;
        return {std::fabs(u), u < 0 ? -1.0 : 1.0, 0.0};
    case Op::Sign:
        if (std::fabs(u) < kKinkDelta) st.kink = true;
        return {static_cast<double>((u > 0) - (u < 0)), 0.0, 0.0};
    default: break;
    }
    return {0, 0, 0};
}

Chain powc_chain(double u, double c, const Node* node) {
    if (!integral(c) && u < 0)
        throw DomainError("non-integer power of negative base " + fmt_arg(u), to_string(*node));
    double f0 = std::pow(u, c);
    double f1 = c == 0 ? 0.0 : (c == 1 ? 1.0 : c * std::pow(u, c - 1));
    double f2 = (c == 0 || c == 1) ? 0.0 : (c == 2 ? 2.0 : c * (c - 1) * std::pow(u, c - 2));
    return {f0, f1, f2};
}

}  // namespace

Compiled::Compiled(const Expr& e, const std::vector<std::string>& vars,
                   const std::map<std::string, double>& params)
    : expr_(e), nvar_(static_cast<int>(vars.size())) {
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < vars.size(); ++i) index[vars[i]] = static_cast<int>(i);
    emit(e.ptr(), index, params);
}

int Compiled::emit(const NodePtr& n, const std::map<std::string, int>& vars,
                   const std::map<std::string, double>& params) {
    Ins ins;
    ins.op = n->op;
    ins.node = n.get();
    switch (n->op) {
    case Op::Const: ins.c = n->value; break;
    case Op::Name: {
        if (auto it = vars.find(n->name); it != vars.end()) {
            ins.var = it->second;
        } else if (auto jt = params.find(n->name); jt != params.end()) {
            ins.op = Op::Const;
            ins.c = jt->second;
        } else if (n->name == "pi") {
            ins.op = Op::Const;
            ins.c = std::numbers::pi;
        } else {
            throw BindError(n->name);
        }
        break;
    }
    case Op::Pow: {
        ins.a = emit(n->a, vars, params);
        ins.b = emit(n->b, vars, params);
        const Ins& eb = tape_[ins.b];
        if (eb.op == Op::Const) {
            ins.powc = true;
            ins.c = eb.c;
        } else if (eb.op == Op::Neg && tape_[eb.a].op == Op::Const) {
            ins.powc = true;
            ins.c = -tape_[eb.a].c;
        } else {
            // u^w = exp(w*log(u)); errors still name the pow node
            Ins lg{Op::Log, false, ins.a, -1, -1, 0.0, n.get()};
            tape_.push_back(lg);
            Ins mul{Op::Mul, false, ins.b, static_cast<int>(tape_.size()) - 1, -1, 0.0, n.get()};
            tape_.push_back(mul);
            Ins ex{Op::Exp, false, static_cast<int>(tape_.size()) - 1, -1, -1, 0.0, n.get()};
            tape_.push_back(ex);
            return static_cast<int>(tape_.size()) - 1;
        }
        break;
    }
    default:
        ins.a = emit(n->a, vars, params);
        if (n->b) ins.b = emit(n->b, vars, params);
    }
    tape_.push_back(ins);
    return static_cast<int>(tape_.size()) - 1;
}

EvalResult Compiled::eval(const double* x) const {
    thread_local std::vector<double> v;
    v.resize(tape_.size());
    EvalResult r;
    for (std::size_t i = 0; i < tape_.size(); ++i) {
        const Ins& in = tape_[i];
        switch (in.op) {
        case Op::Const: v[i] = in.c; break;
        case Op::Name: v[i] = x[in.var]; break;
        case Op::Add: v[i] = v[in.a] + v[in.b]; break;
        case Op::Sub: v[i] = v[in.a] - v[in.b]; break;
        case Op::Mul: v[i] = v[in.a] * v[in.b]; break;
        case Op::Div: v[i] = v[in.a] / v[in.b]; break;
        case Op::Pow: v[i] = powc_chain(v[in.a], in.c, in.node).f0; break;
        default: v[i] = unary_chain(in.op, v[in.a], in.node, r.status).f0;
        }
    }
    r.value = v.back();
    if (!std::isfinite(r.value)) r.status.nonfinite = true;
    return r;
}

// Forward-mode jets stored per tape slot: value, gradient, packed upper Hessian.
template <int Order>
double Compiled::jet(const double* x, double* gout, double* Hout, EvalStatus* stout) const {
    const int n = nvar_;
    const int K = Order == 2 ? n * (n + 1) / 2 : 0;
    const int W = 1 + n + K;
    thread_local std::vector<double> buf;
    buf.assign(tape_.size() * static_cast<std::size_t>(W), 0.0);
    EvalStatus st;
    auto slot = [&](int i) { return buf.data() + static_cast<std::size_t>(i) * W; };

    for (std::size_t i = 0; i < tape_.size(); ++i) {
        const Ins& in = tape_[i];
        double* o = slot(static_cast<int>(i));
        double* og = o + 1;
        double* oH = og + n;
        switch (in.op) {
        case Op::Const: o[0] = in.c; break;
        case Op::Name:
            o[0] = x[in.var];
            og[in.var] = 1.0;
            break;
        case Op::Add:
        case Op::Sub: {
            const double* a = slot(in.a);
            const double* b = slot(in.b);
            double s = in.op == Op::Add ? 1.0 : -1.0;
            for (int k = 0; k < W; ++k) o[k] = a[k] + s * b[k];
            break;
        }
        case Op::Mul: {
            const double* a = slot(in.a);
            const double* b = slot(in.b);
            const double *ag = a + 1, *bg = b + 1;
            o[0] = a[0] * b[0];
            for (int k = 0; k < n; ++k) og[k] = a[0] * bg[k] + b[0] * ag[k];
            if constexpr (Order == 2) {
                const double *aH = ag + n, *bH = bg + n;
                int idx = 0;
                for (int p = 0; p < n; ++p)
                    for (int q = p; q < n; ++q, ++idx)
                        oH[idx] = a[0] * bH[idx] + b[0] * aH[idx] + ag[p] * bg[q] + bg[p] * ag[q];
            }
            break;
        }
        case Op::Div: {
            const double* a = slot(in.a);
            const double* b = slot(in.b);
            const double *ag = a + 1, *bg = b + 1;
            double q0 = a[0] / b[0];
            o[0] = q0;
            for (int k = 0; k < n; ++k) og[k] = (ag[k] - q0 * bg[k]) / b[0];
            if constexpr (Order == 2) {
                const double *aH = ag + n, *bH = bg + n;
                int idx = 0;
                for (int p = 0; p < n; ++p)
                    for (int q = p; q < n; ++q, ++idx)
                        oH[idx] = (aH[idx] - q0 * bH[idx] - og[p] * bg[q] - bg[p] * og[q]) / b[0];
            }
            break;
        }
        default: {
            const double* a = slot(in.a);
            const double* ag = a + 1;
            Chain c = in.op == Op::Pow ? powc_chain(a[0], in.c, in.node)
                                       : unary_chain(in.op, a[0], in.node, st);
            o[0] = c.f0;
            for (int k = 0; k < n; ++k) og[k] = c.f1 * ag[k];
            if constexpr (Order == 2) {
                const double* aH = ag + n;
                int idx = 0;
                for (int p = 0; p < n; ++p)
                    for (int q = p; q < n; ++q, ++idx)
                        oH[idx] = c.f1 * aH[idx] + c.f2 * ag[p] * ag[q];
            }
        }
        }
    }
    const double* r = slot(static_cast<int>(tape_.size()) - 1);
    bool finite = std::isfinite(r[0]);
    for (int k = 0; k < n; ++k) {
        gout[k] = r[1 + k];
        finite = finite && std::isfinite(gout[k]);
    }
    if constexpr (Order == 2) {
        const double* rH = r + 1 + n;
        int idx = 0;
        for (int p = 0; p < n; ++p)
            for (int q = p; q < n; ++q, ++idx) {
                Hout[p * n + q] = rH[idx];
                Hout[q * n + p] = rH[idx];
                finite = finite && std::isfinite(rH[idx]);
            }
    }
    if (!finite) st.nonfinite = true;
    if (stout) *stout = st;
    return r[0];
}

double Compiled::grad(const double* x, double* g, EvalStatus* st) const {
    return jet<1>(x, g, nullptr, st);
}

double Compiled::hess(const double* x, double* g, double* H, EvalStatus* st) const {
    return jet<2>(x, g, H, st);
}

DualTower Compiled::jet2(const double* x) const {
    DualTower d;
    d.first.resize(nvar_);
    d.second.resize(nvar_, nvar_);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> H(nvar_, nvar_);
    d.value = hess(x, d.first.data(), H.data(), &d.status);
    d.second = H;
    return d;
}

EvalResult eval(const Expr& e, const std::map<std::string, double>& point,
                const std::map<std::string, double>& params) {
    std::vector<std::string> names;
    std::vector<double> x;
    for (const auto& [k, v] : point) {
        names.push_back(k);
        x.push_back(v);
    }
    return Compiled(e, names, params).eval(x.data());
}

DualTower eval_jet2(const Expr& e, const std::vector<std::string>& coords,
                    const std::vector<double>& point,
                    const std::map<std::string, double>& params) {
    return Compiled(e, coords, params).jet2(point.data());
}

}  // namespace nht
