#pragma once

#include "nht/flow.hpp"
#include "nht/models.hpp"

#include <complex>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace nht {

// F = H(f) e^f and H(F) = (H^2 f + (H f)^2) e^f, H the unrescaled Hamilton field.
class EscapeFunction {
public:
    EscapeFunction(const SymbolModel& model, const Expr& f);

    double F(const double* z) const;
    double HF(const double* z) const;
    LieJet jet(const double* z) const;
    const Expr& seed() const { return f_.expr(); }

private:
    HamiltonianField H_;
    Compiled f_;
};

// Periodic-aware Euclidean distance between phase points of a bundle.
double phase_distance(const ModelBundle& b, const Vec& x, const Vec& y);

// ---- escape condition ----------------------------------------------------

struct EscapeOptions {
    int n_samples = 10000;
    double eps0 = 1e-6;   // |H f| treated as zero
    double eps1 = 1e-9;   // H^2 f below -eps1 is a violation
    double omega_radius = 1e-3;
    std::uint64_t seed = 0;
};

struct EscapeViolation {
    Vec z;
    double Hf = 0.0;
    double H2f = 0.0;
    int patch = -1;
};

struct EscapeReport {
    bool degenerate = false;
    std::string diagnosis;
    double degenerate_fraction = 0.0;
    int requested = 0;
    int checked = 0;             // samples on {H f = 0} inside the domain
    int projection_failures = 0;
    int near_omega = 0;          // flagged candidates inside a tol-ball of Omega
    int uncovered = 0;           // in no patch region (checked against every patch)
    std::vector<int> per_patch;  // samples checked under each patch
    double min_H2f = 0.0;        // over checked samples outside Omega balls
    std::vector<EscapeViolation> violations;
    EscapeOptions options;
};

// Samples Char(p) with |xi| = 1, projects onto {H f = 0} and checks H^2 f >= -eps1 for
// the patch seed owning each point. Points whose projection onto Omega moves them less
// than omega_radius are exempt.
EscapeReport verify_escape_condition(const ModelBundle& b, const EscapeOptions& opts);

// ---- locating Omega -------------------------------------------------------

struct LocateOptions {
    int n_seeds = 200;
    double tol = 1e-10;
    double merge = 1e-6;
    std::uint64_t seed = 0;
    bool quasi = true;
};

struct LocateReport {
    std::vector<Vec> points;
    std::vector<double> residuals;
    int seeds = 0;
    int converged = 0;
    int nonconvergent = 0;
    int singular = 0;  // converged with a rank-deficient Jacobian
    int out_of_domain = 0;
    int merged = 0;
};

// Omega = {H f_i = H^2 f_i = 0} on Char(p) with |xi| = 1, by damped Newton from
// quasi-random seeds.
LocateReport locate_invariant_set(const ModelBundle& b, const LocateOptions& opts);

// ---- linearization --------------------------------------------------------

// Rescaled field at z: the model rho, or rho_alt where |rho| degenerates.
struct RescaledChoice {
    Expr rho;
    bool alternate = false;
};
RescaledChoice rescaling_at(const SymbolModel& m, const Vec& z);

struct NormalLinearization {
    bool valid = false;
    std::string error;
    int frame = -1;  // index into bundle frames, -1 for the (H f, H^2 f) fallback
    std::vector<std::string> frame_str;
    Mat A;
    std::vector<std::complex<double>> eigenvalues;  // sorted by real part, descending
    Mat right;  // columns: real parts of right eigenvectors, same order
    Mat left;   // rows: real parts of left eigenvectors, same order
    double fit_residual = 0.0;
    bool rho_alternate = false;
    // differentials of the frame functions (rows), and the E* covectors (rows)
    Mat dv;
    Mat e_star;
};

NormalLinearization normal_linearization(const ModelBundle& b, const Vec& z);

// Frame functions actually used at z (for cross-checks and flowout).
std::vector<PhaseFunctionPtr> frame_functions(const ModelBundle& b, const Vec& z, int* index,
                                              bool* alternate);

// ---- classification ----------------------------------------------------------

struct SampleClass {
    double g = 0.0;                 // H~(rho)/rho
    double frequency_weight = 0.0;  // -g = H~(1/rho) rho
    double transversal = 0.0;       // H~(tau)/tau on b-models, 0 otherwise
    bool has_transversal = false;
    NormalLinearization lin;
    std::string label;  // radial-source, radial-sink, saddle, trapped-candidate, unresolved
};

struct Component {
    std::vector<int> members;
    std::string kind;  // radial-source, radial-sink, saddle, trapped, unresolved
    std::string diagnosis;
    double g_min = 0.0, g_max = 0.0;
};

struct Classification {
    std::vector<SampleClass> samples;
    std::vector<Component> components;
};

struct ClassifyOptions {
    double g_tol = 1e-3;
    double cluster_radius = 0.5;
};

Classification classify_invariant_set(const ModelBundle& b, const std::vector<Vec>& omega,
                                      const ClassifyOptions& opts = {});

// ---- rates -------------------------------------------------------------------

struct NormalBlockCheck {
    Vec z;
    double T = 0.0;
    std::vector<double> exponents;  // signed, in the eigenbasis of A at the start
    std::vector<double> eigenvalues;
    double max_rel_diff = 0.0;
};

struct TangentialRate {
    Vec z;
    std::vector<double> T;
    std::vector<double> beta;       // finite-time max |log stretch| / T
    std::vector<double> log_growth; // running max |log stretch| at T
};

struct RateOptions {
    double T_normal = 10.0;
    int n_normal = 4;
    std::vector<double> T_beta{25.0, 50.0, 100.0};
    int n_beta = 6;
    double beta_tol = 1e-3;
    double flow_rtol = 1e-10;
};

struct Rates {
    double nu_u = 0.0, nu_s = 0.0;
    double eig_spread = 0.0;  // relative spread of the spectra over samples
    bool flow_constant = true;
    int dim_u = 0, dim_s = 0;
    std::vector<NormalBlockCheck> normal_checks;
    double normal_max_rel_diff = 0.0;
    std::vector<TangentialRate> tangential;
    std::vector<double> T_beta;
    std::vector<double> beta;  // per T, max over samples
    double beta_extrapolated = 0.0;
    bool beta_decreasing = false;
    int beta_samples = 0;
    std::string error;
};

Rates expansion_rates(const ModelBundle& b, const std::vector<Vec>& gamma,
                      const std::vector<SampleClass>& cls, const RateOptions& opts);

// Normal block of the tangent flow along the orbit of z over [0, T].
NormalBlockCheck normal_block_exponents(const ModelBundle& b, const Vec& z, double T,
                                        double rtol = 1e-10);

// Tangential exponents on TΓ with the orbit held on Γ by reprojection.
TangentialRate tangential_exponents(const ModelBundle& b, const Vec& z,
                                    const std::vector<double>& T, double rtol = 1e-10);

// Fits L(T) = beta T + N log T + c through three horizons; returns beta.
double extrapolated_rate(const std::vector<double>& T, const std::vector<double>& L);

// ---- symplecticity -----------------------------------------------------------

struct SymplecticCheck {
    int dim = 0;   // dim of T Gamma (kernel of the frame differentials, b-frame)
    int rank = 0;  // symplectic rank of that basis
    int bracket_rank = 0;
    double bracket_min_sv = 0.0;  // normalized
    bool symplectic = false;
};

SymplecticCheck symplectic_check(const ModelBundle& b, const Vec& z);

// ---- defining functions ------------------------------------------------------

struct DefiningOptions {
    int n_samples = 1000;
    double radius = 0.1;
    std::uint64_t seed = 0;
    double char_tol = 1e-6;
    double rho_sign = 0.0;  // restrict to rho > 0 (1), rho < 0 (-1) or both (0)
};

struct DefiningSide {
    std::string phi;
    double max_residual = 0.0;   // |H~ phi| / (|grad phi| |X~|) at the foot points
    double mean_residual = 0.0;
    double w_min = 0.0, w_max = 0.0;
    double max_supplied_residual = 0.0;  // |H~ phi -/+ w phi| at the samples, supplied w
    bool has_supplied = false;
    int checked = 0;
    int failures = 0;
    bool invalid = false;
    std::string diagnosis;
};

struct DefiningReport {
    DefiningSide u, s;
    int requested = 0;
    int rejected_off_char = 0;
    std::vector<double> distance;  // of each checked sample to its Γ anchor
};

DefiningReport verify_defining_functions(const ModelBundle& b, const std::vector<Vec>& gamma,
                                         const DefiningOptions& opts);

// Same check on a caller-supplied phi pair (e.g. phi = p to exercise the failure path).
DefiningReport verify_defining_functions(const ModelBundle& b, const std::vector<Vec>& gamma,
                                         const PhaseFunctionPtr& phi_u,
                                         const PhaseFunctionPtr& phi_s,
                                         const std::optional<Expr>& w_u,
                                         const std::optional<Expr>& w_s,
                                         const DefiningOptions& opts);

// ---- flowout -------------------------------------------------------------------

// phi^T = phi o flow_{-T}; trajectories cached by query point.
class FlowoutFunction : public PhaseFunction {
public:
    FlowoutFunction(PhaseFunctionPtr phi, std::shared_ptr<const VectorField> field, double T,
                    std::vector<Region> exits = {}, double rtol = 1e-11);
    int dim() const override { return phi_->dim(); }
    double value(const double* z) const override;
    std::string str() const override;
    Vec pull_back(const Vec& z) const;  // flow_{-T}(z)
    std::size_t cache_size() const;

private:
    PhaseFunctionPtr phi_;
    std::shared_ptr<const VectorField> field_;
    double T_;
    std::vector<Region> exits_;
    double rtol_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::string, Vec> cache_;
};

// ---- alpha and propagation time ---------------------------------------------

// h = 1 on (-inf, a - eps], 0 on [a, inf), C^2 smoothstep in between.
double alpha_profile(double F, double a, double eps);
double alpha_profile_derivative(double F, double a, double eps);

struct AlphaReport {
    int samples = 0;
    int violations = 0;  // H(alpha) > 1e-10
    double max_H_alpha = 0.0;
};

// alpha = h(F); H(alpha) = h'(F) H(F) checked along the supplied points.
AlphaReport build_alpha(const EscapeFunction& F, double a, double eps,
                        const std::vector<Vec>& points);

struct PropagationBound {
    bool available = false;
    std::string error;
    double tau = 0.0;
    double sup_F = 0.0;
    double inf_HF = 0.0;
    int n_inside = 0, n_outside = 0;
};

// tau = (sup_O F + eps) / inf_{Γ_u outside O} H(F), over the given samples.
PropagationBound propagation_time_bound(const std::vector<double>& F_inside,
                                        const std::vector<double>& HF_outside, double eps);
PropagationBound propagation_time_bound(const EscapeFunction& F, const std::vector<Vec>& inside,
                                        const std::vector<Vec>& outside, double eps);

// ---- symplectic dual coefficients -------------------------------------------------

struct DualCoefficients {
    bool valid = false;
    std::string error;
    std::vector<std::vector<double>> f;  // per sample, one per phi_u component
    double max_residual = 0.0;
};

// Least-norm f_i with sum_i rho f_i H_{phi_u^i}(phi_s^1) = 1 at each sample.
DualCoefficients symplectic_dual_coefficients(const SymbolModel& m,
                                              const std::vector<PhaseFunctionPtr>& phi_u,
                                              const PhaseFunctionPtr& phi_s1,
                                              const std::vector<Vec>& gamma);

// ---- certificate -----------------------------------------------------------------

struct CertifyOptions {
    EscapeOptions escape;
    LocateOptions locate;
    ClassifyOptions classify;
    RateOptions rates;
    DefiningOptions defining;
    bool check_escape = true;
    bool check_defining = true;
    double residual_tol = 1e-8;
    double rate_discrepancy = 0.05;
};

struct TrappingCertificate {
    std::string model_id;
    std::string verdict;
    std::vector<std::string> notes;
    std::optional<EscapeReport> escape;
    LocateReport located;
    Classification classes;
    int trapped_component = -1;
    std::vector<Vec> gamma;  // samples of the trapped component
    std::optional<Rates> rates;
    double g_max = 0.0;
    std::optional<double> f_transversal_min, f_transversal_max;
    std::optional<int> r_max;  // empty with all_r
    bool all_r = false;
    std::vector<SymplecticCheck> symplectic;
    bool symplectic_ok = false;
    std::optional<DefiningReport> defining;
    double max_residual = 0.0;
};

TrappingCertificate certify_nht(const ModelBundle& b, const CertifyOptions& opts);

}  // namespace nht
