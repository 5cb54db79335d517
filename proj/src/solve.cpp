#include "nht/solve.hpp"

#include <cmath>

namespace nht {

namespace {

bool try_eval(const Residuals& F, const Vec& z, Vec& out) {
    try {
        out = F(z);
    } catch (const std::exception&) {
        return false;
    }
    return out.allFinite();
}

}  // namespace

Mat fd_jacobian(const Residuals& F, const Vec& z, const Vec& Fz) {
    const int d = static_cast<int>(z.size());
    Mat J(Fz.size(), d);
    Vec w = z, fp, fm;
    for (int k = 0; k < d; ++k) {
        double h = 1e-7 * std::max(1.0, std::fabs(z[k]));
        w[k] = z[k] + h;
        bool okp = try_eval(F, w, fp);
        w[k] = z[k] - h;
        bool okm = try_eval(F, w, fm);
        w[k] = z[k];
        if (okp && okm) {
            J.col(k) = (fp - fm) / (2 * h);
        } else if (okp) {
            J.col(k) = (fp - Fz) / h;
        } else if (okm) {
            J.col(k) = (Fz - fm) / h;
        } else {
            J.col(k).setZero();
        }
    }
    return J;
}

NewtonResult newton_solve(const Residuals& F, Vec z, const std::vector<bool>& frozen, double tol,
                          int max_iter, double max_step) {
    NewtonResult out;
    const int d = static_cast<int>(z.size());
    std::vector<int> free_idx;
    for (int k = 0; k < d; ++k)
        if (k >= static_cast<int>(frozen.size()) || !frozen[k]) free_idx.push_back(k);

    Vec Fz;
    if (!try_eval(F, z, Fz)) {
        out.z = z;
        return out;
    }
    double norm = Fz.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < max_iter; ++it) {
        out.iterations = it;
        if (norm <= tol) {
            out.converged = true;
            break;
        }
        Mat Jfull = fd_jacobian(F, z, Fz);
        Mat J(Jfull.rows(), free_idx.size());
        for (std::size_t c = 0; c < free_idx.size(); ++c) J.col(c) = Jfull.col(free_idx[c]);
        Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& s = svd.singularValues();
        int rank_needed = static_cast<int>(std::min(J.rows(), J.cols()));
        out.singular = s.size() == 0 || s[0] == 0.0 ||
                       s[rank_needed - 1] < 1e-10 * s[0];
        svd.setThreshold(1e-12);
        Vec step_free = svd.solve(Fz);
        double len = step_free.norm();
        if (!std::isfinite(len) || len == 0.0) break;
        if (len > max_step) step_free *= max_step / len;

        double lam = 1.0;
        bool accepted = false;
        Vec trial, Ft;
        while (lam >= 1.0 / 1024) {
            trial = z;
            for (std::size_t c = 0; c < free_idx.size(); ++c)
                trial[free_idx[c]] -= lam * step_free[c];
            if (try_eval(F, trial, Ft)) {
                double tn = Ft.lpNorm<Eigen::Infinity>();
                if (tn < norm || tn <= tol) {
                    z = trial;
                    Fz = Ft;
                    norm = tn;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if (!accepted) break;
    }
    out.z = z;
    out.residual = norm;
    if (norm <= tol) out.converged = true;
    return out;
}

Mat null_space(const Mat& G, double rel_cut) {
    const int d = static_cast<int>(G.cols());
    if (G.rows() == 0) return Mat::Identity(d, d);
    Eigen::JacobiSVD<Mat> svd(G, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < s.size(); ++i)
        if (s[i] > rel_cut * s[0]) ++rank;
    return svd.matrixV().rightCols(d - rank);
}

}  // namespace nht
