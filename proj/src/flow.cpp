#include "nht/flow.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

namespace nht {

namespace {

// Dormand-Prince 5(4) tableau with Hairer's dense output coefficients.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

struct Dense {
    Vec r1, r2, r3, r4, r5;
    double t0 = 0, h = 0;

    Vec at(double t) const {
        double th = (t - t0) / h;
        double th1 = 1 - th;
        return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
    }
};

class Stepper {
public:
    Stepper(const VectorField& f, double rtol, double atol)
        : f_(f), rtol_(rtol), atol_(atol), d_(f.dim()) {
        for (auto* k : {&k2, &k3, &k4, &k5, &k6, &k7, &tmp, &ynew, &err}) k->resize(d_);
    }

    Vec deriv(const Vec& y) const {
        Vec out(d_);
        f_.eval(y.data(), out.data());
        return out;
    }

    double norm_scaled(const Vec& v, const Vec& y) const {
        double s = 0;
        for (int i = 0; i < d_; ++i) {
            double sc = atol_ + rtol_ * std::fabs(y[i]);
            s += (v[i] / sc) * (v[i] / sc);
        }
        return std::sqrt(s / d_);
    }

    double initial_step(const Vec& y, const Vec& k1, double dir) const {
        double dn0 = norm_scaled(y, y), dn1 = norm_scaled(k1, y);
        double h = (dn0 < 1e-10 || dn1 < 1e-10) ? 1e-6 : 0.01 * dn0 / dn1;
        Vec y1 = y + dir * h * k1;
        Vec f1 = deriv(y1);
        double dn2 = norm_scaled(f1 - k1, y) / h;
        double m = std::max(dn1, dn2);
        double h1 = m <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / m, 0.2);
        return std::min(100 * h, h1);
    }

    // One trial step; returns the scaled error estimate (inf on evaluation failure).
    double attempt(double t, const Vec& y, const Vec& k1, double h) {
        (void)t;
        try {
            tmp = y + h * a21 * k1;
            f_.eval(tmp.data(), k2.data());
            tmp = y + h * (a31 * k1 + a32 * k2);
            f_.eval(tmp.data(), k3.data());
            tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
            f_.eval(tmp.data(), k4.data());
            tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            f_.eval(tmp.data(), k5.data());
            tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            f_.eval(tmp.data(), k6.data());
            ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            f_.eval(ynew.data(), k7.data());
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity();
        }
        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double s = 0;
        for (int i = 0; i < d_; ++i) {
            double sc = atol_ + rtol_ * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
            s += (err[i] / sc) * (err[i] / sc);
        }
        double e = std::sqrt(s / d_);
        if (!ynew.allFinite() || !k7.allFinite()) return std::numeric_limits<double>::infinity();
        return e;
    }

    Dense dense(double t, const Vec& y, const Vec& k1, double h) const {
        Dense D;
        D.t0 = t;
        D.h = h;
        D.r1 = y;
        D.r2 = ynew - y;
        D.r3 = h * k1 - D.r2;
        D.r4 = D.r2 - h * k7 - D.r3;
        D.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        return D;
    }

    const VectorField& f_;
    double rtol_, atol_;
    int d_;
    Vec k2, k3, k4, k5, k6, k7, tmp, ynew, err;
};

std::string fmt_time(double t) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.10g", t);
    return buf;
}

}  // namespace

double Region::indicator(const double* z) const {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& g : parts) v = std::min(v, g(z));
    return v;
}

Region make_region(const std::string& name, const std::vector<std::string>& inequalities,
                   const std::vector<std::string>& coords,
                   const std::map<std::string, double>& params) {
    Region r;
    r.name = name;
    for (const auto& s : inequalities) {
        auto pos = s.find_first_of("<>");
        if (pos == std::string::npos)
            throw std::invalid_argument("region '" + name + "': inequality needs '<' or '>': " + s);
        std::size_t rhs = pos + 1;
        if (rhs < s.size() && s[rhs] == '=') ++rhs;
        Expr lhs = Expr::parse(s.substr(0, pos));
        Expr right = Expr::parse(s.substr(rhs));
        Expr g = s[pos] == '>' ? Expr::binary(Op::Sub, lhs, right) : Expr::binary(Op::Sub, right, lhs);
        r.parts.emplace_back(g, coords, params);
    }
    if (r.parts.empty()) throw std::invalid_argument("region '" + name + "' is empty");
    return r;
}

void FlowOptions::validate() const {
    if (!(rtol > 0) || !(atol > 0)) throw std::invalid_argument("tolerances must be positive");
    if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
    if (sample_dt < 0) throw std::invalid_argument("sample_dt must be >= 0");
}

Vec Trajectory::unnormalized(std::size_t i, int mo) const {
    Vec v = z[i];
    v.tail(v.size() - mo) *= std::exp(lognorm[i]);
    return v;
}

Trajectory integrate(const VectorField& field, const Vec& start, double t0, double t1,
                     const FlowOptions& opts) {
    opts.validate();
    const int d = field.dim();
    if (start.size() != d) throw std::invalid_argument("start point has wrong dimension");
    const int mo = opts.momentum_offset >= 0 ? opts.momentum_offset : d / 2;
    const double dir = t1 >= t0 ? 1.0 : -1.0;
    if (std::isfinite(opts.max_time)) t1 = t0 + dir * std::min(std::fabs(t1 - t0), opts.max_time);

    Stepper S(field, opts.rtol, opts.atol);
    Trajectory tr;
    Vec y = start;
    double t = t0, L = 0.0;
    Vec k1;
    try {
        k1 = S.deriv(y);
    } catch (const std::exception& e) {
        throw FlowError(std::string("field not evaluable at start: ") + e.what(), t0);
    }
    if (!y.allFinite() || !k1.allFinite()) throw FlowError("non-finite state or field at start", t0);

    double p0 = opts.monitor ? (*opts.monitor)(y.data()) : 0.0;
    // p of the unnormalized state against p(0), read on the unit cosphere:
    // |p(z) - p(0) e^{-m L}| / |xi(z)|^m, so that growth of the momenta does not swamp it
    double xi0 = std::pow(start.tail(d - mo).norm(), opts.monitor_degree);
    if (!(xi0 > 0)) xi0 = 1.0;
    auto drift_of = [&](const Vec& z, double ln) {
        if (!opts.monitor) return 0.0;
        double scale = std::pow(z.tail(d - mo).norm(), opts.monitor_degree) / xi0;
        return std::fabs((*opts.monitor)(z.data()) - p0 * std::exp(-opts.monitor_degree * ln)) /
               scale;
    };
    auto record = [&](double tt, const Vec& z, double ln) {
        tr.t.push_back(tt);
        tr.z.push_back(z);
        tr.lognorm.push_back(ln);
        double dr = drift_of(z, ln);
        tr.drift.push_back(dr);
        tr.max_drift = std::max(tr.max_drift, dr);
    };
    record(t, y, L);

    std::vector<double> prev(opts.events.size());
    for (std::size_t e = 0; e < opts.events.size(); ++e) {
        prev[e] = opts.events[e].indicator(y.data());
        if (prev[e] > 0) {
            tr.events.push_back({opts.events[e].name, t, y});
            if (opts.stop_on_event) return tr;
        }
    }
    if (t == t1) return tr;

    double h = opts.h_init > 0 ? opts.h_init : S.initial_step(y, k1, dir);
    double facold = 1e-4;
    double next_sample = t0 + dir * opts.sample_dt;
    long sample_idx = 1;

    while (dir * (t1 - t) > 0) {
        if (tr.steps + tr.rejected >= opts.max_steps)
            throw FlowError("max steps exceeded at t=" + fmt_time(t), t);
        double hh = std::min({h, opts.h_max, std::fabs(t1 - t)});
        if (hh < 1e-14 * std::max(1.0, std::fabs(t)))
            throw FlowError("step-size underflow at t=" + fmt_time(t), t);
        double step = dir * hh;
        double err = S.attempt(t, y, k1, step);
        if (!(err <= 1.0)) {
            ++tr.rejected;
            double fac11 = std::isfinite(err) ? std::pow(err, 0.17) : 10.0;
            h = hh / std::min(5.0, fac11 / 0.9);
            continue;
        }
        ++tr.steps;
        Dense D = S.dense(t, y, k1, step);
        double tnew = t + step;

        // events: first region entered, located by bisection on the dense output
        double hit_t = 0;
        int hit = -1;
        for (std::size_t e = 0; e < opts.events.size(); ++e) {
            double now = opts.events[e].indicator(S.ynew.data());
            if (prev[e] <= 0 && now > 0) {
                double lo = t, hi = tnew;
                while (std::fabs(hi - lo) > 1e-9) {
                    double mid = 0.5 * (lo + hi);
                    Vec zm = D.at(mid);
                    if (opts.events[e].indicator(zm.data()) > 0) hi = mid;
                    else lo = mid;
                }
                if (hit < 0 || dir * (hi - hit_t) < 0) {
                    hit = static_cast<int>(e);
                    hit_t = hi;
                }
            }
            prev[e] = now;
        }
        double emit_end = hit >= 0 && opts.stop_on_event ? hit_t : tnew;

        if (opts.sample_dt > 0) {
            while (dir * (emit_end - next_sample) >= 0) {
                record(next_sample, D.at(next_sample), L);
                ++sample_idx;
                next_sample = t0 + dir * opts.sample_dt * static_cast<double>(sample_idx);
            }
        }
        if (hit >= 0) {
            Vec zh = D.at(hit_t);
            tr.events.push_back({opts.events[hit].name, hit_t, zh});
            if (opts.stop_on_event) {
                if (tr.t.back() != hit_t) record(hit_t, zh, L);
                return tr;
            }
        }
        if (opts.sample_dt <= 0) {
            record(tnew, S.ynew, L);
        }

        t = tnew;
        y = S.ynew;
        k1 = S.k7;
        if (opts.monitor) tr.max_drift = std::max(tr.max_drift, drift_of(y, L));

        if (opts.renormalize) {
            double nrm = y.tail(d - mo).norm();
            if (nrm > 1e3 || nrm < 1e-3) {
                if (nrm == 0.0) throw FlowError("momenta vanished at t=" + fmt_time(t), t);
                y.tail(d - mo) /= nrm;
                L += std::log(nrm);
                k1 = S.deriv(y);
            }
        }
        if (opts.on_step) {
            opts.on_step(t, y);
            k1 = S.deriv(y);
            for (std::size_t e = 0; e < opts.events.size(); ++e)
                prev[e] = opts.events[e].indicator(y.data());
        }

        double fac11 = std::pow(std::max(err, 1e-300), 0.2 - 0.04 * 0.75);
        double fac = fac11 / std::pow(facold, 0.04);
        fac = std::max(0.1, std::min(5.0, fac / 0.9));
        h = hh / fac;
        facold = std::max(err, 1e-4);
    }
    if (tr.t.back() != t) record(t, y, L);
    return tr;
}

void write_csv(std::ostream& os, const Trajectory& tr, const std::vector<std::string>& coords) {
    os << 't';
    for (const auto& c : coords) os << ',' << c;
    os << ",lognorm\n";
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    };
    for (std::size_t i = 0; i < tr.size(); ++i) {
        put(tr.t[i]);
        for (int k = 0; k < tr.z[i].size(); ++k) {
            os << ',';
            put(tr.z[i][k]);
        }
        os << ',';
        put(tr.lognorm[i]);
        os << '\n';
    }
}

namespace {

// z' = X(z), V' = DX(z) V with V stored column-major after z.
class Variational : public VectorField {
public:
    Variational(const VectorField& f, int k) : f_(f), d_(f.dim()), k_(k) {}
    int dim() const override { return d_ + d_ * k_; }
    void eval(const double* y, double* dy) const override {
        thread_local RowMat J;
        J.resize(d_, d_);
        f_.jacobian(y, dy, J.data());
        Eigen::Map<const Mat> V(y + d_, d_, k_);
        Eigen::Map<Mat>(dy + d_, d_, k_) = J * V;
    }
private:
    const VectorField& f_;
    int d_, k_;
};

}  // namespace

TangentFlow tangent_flow(const VectorField& field, const Vec& start, double t0, double t1,
                         const TangentOptions& opts) {
    const int d = field.dim();
    Mat F = opts.frame ? Mat(*opts.frame) : Mat::Identity(d, d);
    const int k = static_cast<int>(F.cols());
    Variational var(field, k);

    TangentFlow out;
    out.T = std::fabs(t1 - t0);
    out.log_stretch = Vec::Zero(k);
    Mat Rtot = Mat::Identity(k, k);
    double last = t0;
    const double dir = t1 >= t0 ? 1.0 : -1.0;

    auto reorth = [&](double t, Vec& y) {
        Eigen::Map<Mat> V(y.data() + d, d, k);
        Eigen::HouseholderQR<Mat> qr(V);
        Mat R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
        Mat Q = qr.householderQ() * Mat::Identity(d, k);
        for (int i = 0; i < k; ++i) {
            if (R(i, i) < 0) {
                R.row(i) *= -1;
                Q.col(i) *= -1;
            }
            out.log_stretch[i] += std::log(R(i, i));
        }
        Rtot = R * Rtot;
        V = Q;
        out.sample_t.push_back(t);
        out.sample_log_stretch.push_back(out.log_stretch);
        last = t;
    };

    // trajectory records precede on_step, so keep the adjusted state here
    Vec y_last;
    double t_last = t0;
    FlowOptions fo = opts.flow;
    fo.renormalize = false;
    fo.monitor.reset();
    fo.events.clear();
    fo.sample_dt = std::max(out.T, 1e-300);
    fo.on_step = [&](double t, Vec& y) {
        if (opts.on_step) {
            Vec z = y.head(d);
            RowMat V = Eigen::Map<Mat>(y.data() + d, d, k);
            opts.on_step(t, z, V);
            y.head(d) = z;
            Eigen::Map<Mat>(y.data() + d, d, k) = V;
        }
        if (dir * (t - last) >= opts.reorth_dt) reorth(t, y);
        y_last = y;
        t_last = t;
    };

    Vec y0(d + d * k);
    y0.head(d) = start;
    Eigen::Map<Mat>(y0.data() + d, d, k) = F;
    Trajectory tr = integrate(var, y0, t0, t1, fo);
    Vec y = t_last == tr.t.back() && y_last.size() ? y_last : tr.back();
    if (last != tr.t.back()) reorth(tr.t.back(), y);

    out.z_end = y.head(d);
    Eigen::Map<Mat> Q(y.data() + d, d, k);
    out.monodromy = Q * Rtot;
    out.exponents = out.T > 0 ? Vec(out.log_stretch / out.T) : Vec(Vec::Zero(k));
    out.steps = tr.steps;
    return out;
}

EscapeOutcome escape_time(const VectorField& field, const Vec& start,
                          const std::vector<Region>& control, double T_max, FlowOptions opts) {
    opts.events = control;
    opts.stop_on_event = true;
    opts.sample_dt = std::max(std::fabs(T_max), 1e-300);
    Trajectory tr = integrate(field, start, 0.0, T_max, opts);
    EscapeOutcome o;
    if (!tr.events.empty()) {
        o.reached = true;
        o.region = tr.events.front().region;
        o.t = tr.events.front().t;
        o.z = tr.events.front().z;
    } else {
        o.t = tr.t.back();
        o.z = tr.back();
    }
    return o;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n || failed) return;
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace nht
