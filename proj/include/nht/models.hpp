#pragma once

#include "nht/flow.hpp"
#include "nht/geometry.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nht {

// ---- Kerr-de Sitter -------------------------------------------------------

struct KerrDSParams {
    double M = 1.0;
    double a = 0.0;
    double Lambda = 0.0;
    double lambda() const { return Lambda * a * a / 3.0; }
};

struct KerrHorizons {
    std::vector<double> roots;  // real roots of mu, ascending
    bool subextremal = false;
    std::string verdict;
    // Horizons entering the saddle threshold. For Lambda > 0 these are the event and
    // cosmological horizons bounding the exterior; for Lambda = 0 the inner and outer
    // black-hole horizons, with the exterior (r_plus, inf).
    double r_minus = 0.0;
    double r_plus = 0.0;
    double exterior_lo = 0.0;
    double exterior_hi = 0.0;  // +inf when Lambda = 0
};

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double kerr_mu(double r, const KerrDSParams& k);
double kerr_dmu(double r, const KerrDSParams& k);

KerrHorizons kerr_ds_horizons(const KerrDSParams& k);

// Throws ModelError unless the parameters are subextremal.
SymbolModel kerr_ds_model(const KerrDSParams& k, double mu_decay = 1.0);

struct TrappedRadius {
    std::optional<double> r;
    int sign_changes = 0;
    double dF = 0.0;  // F'(r) at the returned root
};

// Root of F'(r) = 0, F(r) = ((r^2+a^2) xi_t + a xi_phi)^2 / mu, on the exterior.
TrappedRadius kerr_ds_trapped_radius(double xi_t, double xi_phi, const KerrDSParams& k,
                                     double grid = 1e-3);

struct DefiningPair {
    PhaseFunctionPtr phi_u;
    PhaseFunctionPtr phi_s;
};

// phi_{u/s} = xi_r -/+ sgn(r - r_xi) (1 + lambda) sqrt((F(r) - F(r_xi)) / mu), with a
// Taylor series of F inside |r - r_xi| < 1e-2 to avoid cancellation.
DefiningPair kerr_ds_defining_functions(const KerrDSParams& k);

// ---- scattering spacetime -------------------------------------------------

enum class CrossSection { RoundSphere, FlatTorus, Custom };

struct ScatteringParams {
    CrossSection section = CrossSection::RoundSphere;
    // custom cross-section: coordinates, conjugate momenta, and the fiber metric h
    std::vector<std::string> positions;
    std::vector<std::string> momenta;
    std::string h;
    std::map<std::string, double> params;
    double mu = 1.0;
};

SymbolModel scattering_model(const ScatteringParams& s);

struct ScatteringReference {
    std::array<double, 2> gamma_eigenvalues;  // at cos 2theta = -1, eta = 0
    std::array<double, 2> radial_spectrum;    // multiplied by sgn(sin 2theta)
    double f_transversal;                     // -H(tau)/tau at Gamma
    // coefficient of d(eta/sigma) in the displayed E*_{u/s} spans, next to d(sin 2theta)
    std::array<double, 2> displayed_span_coefficients;
    double l_max(double mu, double p1) const;
};

ScatteringReference scattering_reference_data();

// ---- 3-torus ----------------------------------------------------------------

SymbolModel torus_model();

// ---- bundles: a model plus what the trapping pipeline needs -----------------

struct CoordRange {
    double lo = 0.0;
    double hi = 0.0;
    bool periodic = false;
    bool pinned() const { return lo == hi; }
};

// The escape condition is checked patchwise: each patch is a region of inequalities with
// its own smooth seed.
struct EscapePatch {
    std::vector<std::string> region;
    Expr f;
};

struct ModelBundle {
    SymbolModel model;
    std::string kind;                          // kerr-ds, scattering, torus, custom
    std::map<std::string, CoordRange> domain;  // one entry per position
    std::vector<Expr> seed;                    // locating seed, scalar or vector
    std::vector<EscapePatch> patches;          // empty: seed[0] everywhere
    PhaseFunctionPtr phi_u, phi_s;
    std::optional<Expr> w_u, w_s;
    // candidate normal frames; the first one vanishing at a sample is used
    std::vector<std::vector<Expr>> frames;
    std::string portrait;  // "r-t", "theta-eta" or empty
    std::optional<KerrDSParams> kerr;

    std::vector<bool> pinned_mask() const;  // over all coordinates
    bool in_domain(const Vec& z, double slack = 0.0) const;
    void wrap(Vec& z) const;  // periodic positions into [lo, hi)
};

// Regions outside the domain box in the non-periodic, non-pinned positions; flows stop
// on entering one.
std::vector<Region> exit_regions(const ModelBundle& b);

ModelBundle kerr_ds_bundle(const KerrDSParams& k, double mu_decay = 1.0);
ModelBundle scattering_bundle(const ScatteringParams& s);
ModelBundle torus_bundle();

// Random covectors on Char(p) with unit Euclidean momentum norm, positions uniform in the
// domain box. Deterministic given the seed.
class CharSampler {
public:
    CharSampler(const ModelBundle& b, std::uint64_t seed, bool quasi = false);

    Vec raw();
    // projected on {p = 0, |xi| = 1}, pinned positions held
    std::optional<Vec> sample(int max_tries = 25);
    // projected point near z (already close to Char)
    std::optional<Vec> project(const Vec& z) const;

    std::mt19937_64& rng() { return rng_; }

private:
    double uniform(int dim_index);

    const ModelBundle& b_;
    Compiled p_;
    std::mt19937_64 rng_;
    bool quasi_;
    std::uint64_t counter_ = 0;
    std::vector<double> shift_;
};

}  // namespace nht
