#pragma once

#include "nht/expr.hpp"

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nht {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Coordinates are ordered positions first, then momenta; momentum i is conjugate to
// position i. A b-flagged position is a boundary defining function tau whose momentum
// sigma is taken in the d tau / tau frame.
struct Chart {
    std::vector<std::string> positions;
    std::vector<std::string> momenta;
    std::vector<bool> bflags;
    std::vector<std::string> params;

    int n() const { return static_cast<int>(positions.size()); }
    int dim() const { return 2 * n(); }
    std::vector<std::string> coords() const;
    int index(const std::string& name) const;  // -1 when absent
    bool is_b(int pos) const { return pos < static_cast<int>(bflags.size()) && bflags[pos]; }
    bool has_boundary() const;
    void validate() const;
};

struct SymbolModel {
    std::string id;
    Chart chart;
    Expr p;
    int m = 2;
    Expr rho;
    std::optional<Expr> rho_alt;  // used where |rho| degenerates, e.g. radial sets
    std::optional<Expr> p1;
    std::optional<Expr> q;
    double mu = 1.0;
    std::map<std::string, double> params;

    Compiled compile(const Expr& e) const { return Compiled(e, chart.coords(), params); }
    void validate() const;
};

class RescalingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class VectorField {
public:
    virtual ~VectorField() = default;
    virtual int dim() const = 0;
    virtual void eval(const double* z, double* dz) const = 0;
    // dz and row-major Jacobian J (dim x dim)
    virtual void jacobian(const double* z, double* dz, double* J) const;

    Vec operator()(const Vec& z) const {
        Vec out(dim());
        eval(z.data(), out.data());
        return out;
    }
    RowMat jacobian(const Vec& z) const;
};

class LinearField : public VectorField {
public:
    explicit LinearField(Mat A) : A_(std::move(A)) {}
    int dim() const override { return static_cast<int>(A_.rows()); }
    void eval(const double* z, double* dz) const override;
    void jacobian(const double* z, double* dz, double* J) const override;
private:
    Mat A_;
};

// H_p, or the rescaled rho^{1-m} H_p when rescaled is set.
class HamiltonianField : public VectorField {
public:
    HamiltonianField(const SymbolModel& model, bool rescaled,
                     const std::optional<Expr>& rho_override = std::nullopt);

    int dim() const override { return chart_.dim(); }
    void eval(const double* z, double* dz) const override;
    void jacobian(const double* z, double* dz, double* J) const override;

    double symbol(const double* z) const { return p_(z); }
    double rho(const double* z) const { return rho_(z); }
    bool rescaled() const { return rescaled_; }
    int degree() const { return m_; }
    const Chart& chart() const { return chart_; }

private:
    double scale(const double* z, double* grad_scale) const;

    Chart chart_;
    Compiled p_;
    Compiled rho_;
    int m_;
    bool rescaled_;
};

// sqrt of the sum of squared momenta: a rescaling that never vanishes on the cosphere
Expr momentum_norm(const Chart& chart);

// Poisson tensor in coordinates: {a,b} = grad(a)^T J grad(b).
RowMat poisson_tensor(const Chart& chart, const double* z);

class PoissonBracket {
public:
    PoissonBracket(const Expr& a, const Expr& b, const Chart& chart,
                   const std::map<std::string, double>& params);
    double operator()(const double* z) const;
    double operator()(const Vec& z) const { return (*this)(z.data()); }
private:
    Chart chart_;
    Compiled a_, b_;
};

struct LieJet {
    double f = 0.0;
    double Hf = 0.0;
    double H2f = 0.0;
};

// H(f) from the gradient of f, H^2(f) from its Hessian and the field Jacobian.
LieJet lie_derivative(const VectorField& field, const Compiled& f, const double* z);

enum class VectorFrame { BFrame, Coordinate };

// Rank of omega(v_i, v_j). b-pair components are read in the (tau d/dtau, d/dsigma)
// frame; with VectorFrame::Coordinate the tau component is divided by tau first.
int symplectic_rank(const Chart& chart, const Vec& point, const std::vector<Vec>& basis,
                    VectorFrame frame = VectorFrame::BFrame, double rel_cut = 1e-9);
Mat symplectic_gram(const Chart& chart, const std::vector<Vec>& basis);

// Gradient in the b-frame: tau-components multiplied by tau.
Vec b_gradient(const Chart& chart, const double* z, const double* grad);

// Scalar function on phase space. Expressions are the common case; models may supply
// closed forms that are not expressible in the grammar.
class PhaseFunction {
public:
    virtual ~PhaseFunction() = default;
    virtual int dim() const = 0;
    virtual double value(const double* z) const = 0;
    // value, and gradient into g; central differences unless overridden
    virtual double gradient(const double* z, double* g) const;
    virtual std::string str() const = 0;

    double operator()(const Vec& z) const { return value(z.data()); }
};

using PhaseFunctionPtr = std::shared_ptr<const PhaseFunction>;

class ExprFunction : public PhaseFunction {
public:
    ExprFunction(const Expr& e, const Chart& chart, const std::map<std::string, double>& params)
        : c_(e, chart.coords(), params) {}
    explicit ExprFunction(Compiled c) : c_(std::move(c)) {}
    int dim() const override { return c_.dim(); }
    double value(const double* z) const override { return c_(z); }
    double gradient(const double* z, double* g) const override { return c_.grad(z, g); }
    std::string str() const override { return c_.expr().str(); }
    const Compiled& compiled() const { return c_; }
private:
    Compiled c_;
};

PhaseFunctionPtr make_function(const Expr& e, const SymbolModel& model);

// H(phi) for an arbitrary phase function: gradient dotted with the field.
double lie_derivative(const VectorField& field, const PhaseFunction& f, const double* z);

// max relative |p(x, lambda xi) - lambda^m p(x, xi)| over random points and lambda in {2, 1/3}.
double homogeneity_defect(const SymbolModel& model, const std::vector<Vec>& points);

}  // namespace nht
