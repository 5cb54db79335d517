#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nht {

enum class Op : std::uint8_t {
    Const, Name,
    Neg, Sin, Cos, Tan, Sqrt, Exp, Log, Abs, Sign,
    Add, Sub, Mul, Div, Pow
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Op op = Op::Const;
    double value = 0.0;
    std::string name;
    NodePtr a, b;
};

class SyntaxError : public std::runtime_error {
public:
    SyntaxError(std::size_t offset, std::string expected, const std::string& msg)
        : std::runtime_error(msg), offset_(offset), expected_(std::move(expected)) {}
    std::size_t offset() const { return offset_; }
    const std::string& expected() const { return expected_; }
private:
    std::size_t offset_;
    std::string expected_;
};

class BindError : public std::runtime_error {
public:
    explicit BindError(std::string name)
        : std::runtime_error("unbound name '" + name + "'"), name_(std::move(name)) {}
    const std::string& name() const { return name_; }
private:
    std::string name_;
};

class DomainError : public std::runtime_error {
public:
    DomainError(const std::string& msg, std::string subexpr)
        : std::runtime_error(msg + " in '" + subexpr + "'"), subexpr_(std::move(subexpr)) {}
    const std::string& subexpression() const { return subexpr_; }
private:
    std::string subexpr_;
};

// Immutable AST handle. Copies share the tree.
class Expr {
public:
    Expr();
    explicit Expr(NodePtr root) : root_(std::move(root)) {}

    static Expr parse(std::string_view text);
    static Expr constant(double v);
    static Expr name(std::string n);
    static Expr unary(Op op, const Expr& a);
    static Expr binary(Op op, const Expr& a, const Expr& b);

    std::string str() const;
    const Node& root() const { return *root_; }
    const NodePtr& ptr() const { return root_; }
    std::set<std::string> names() const;

    bool operator==(const Expr& o) const;
    bool operator!=(const Expr& o) const { return !(*this == o); }

private:
    NodePtr root_;
};

std::string to_string(const Node& n);
const char* op_name(Op op);

// abs/sign closer than this to their kink set the kink flag.
inline constexpr double kKinkDelta = 1e-8;

struct EvalStatus {
    bool nonfinite = false;
    bool kink = false;
};

struct EvalResult {
    double value = 0.0;
    EvalStatus status;
};

struct DualTower {
    double value = 0.0;
    Eigen::VectorXd first;
    Eigen::MatrixXd second;
    EvalStatus status;
};

// An Expr bound to an ordered variable list; parameters are substituted as constants.
class Compiled {
public:
    Compiled() = default;
    Compiled(const Expr& e, const std::vector<std::string>& vars,
             const std::map<std::string, double>& params);

    int dim() const { return nvar_; }
    const Expr& expr() const { return expr_; }
    bool valid() const { return !tape_.empty(); }

    double operator()(const double* x) const { return eval(x).value; }
    double operator()(const Eigen::VectorXd& x) const { return eval(x.data()).value; }
    EvalResult eval(const double* x) const;

    // value and gradient; g has dim() entries
    double grad(const double* x, double* g, EvalStatus* st = nullptr) const;
    // value, gradient and full Hessian (row-major dim()*dim())
    double hess(const double* x, double* g, double* H, EvalStatus* st = nullptr) const;
    DualTower jet2(const double* x) const;

private:
    struct Ins {
        Op op;
        bool powc = false;
        int a = -1, b = -1;
        int var = -1;
        double c = 0.0;
        const Node* node = nullptr;
    };
    template <int Order>
    double jet(const double* x, double* g, double* H, EvalStatus* st) const;
    int emit(const NodePtr& n, const std::map<std::string, int>& vars,
             const std::map<std::string, double>& params);

    Expr expr_;
    std::vector<Ins> tape_;
    int nvar_ = 0;
};

EvalResult eval(const Expr& e, const std::map<std::string, double>& point,
                const std::map<std::string, double>& params);
DualTower eval_jet2(const Expr& e, const std::vector<std::string>& coords,
                    const std::vector<double>& point,
                    const std::map<std::string, double>& params);

}  // namespace nht
