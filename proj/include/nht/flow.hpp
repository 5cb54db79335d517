#pragma once

#include "nht/geometry.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace nht {

class FlowError : public std::runtime_error {
public:
    FlowError(const std::string& msg, double t) : std::runtime_error(msg), t_(t) {}
    double time() const { return t_; }
private:
    double t_;
};

// Conjunction of strict inequalities g_k(z) > 0.
struct Region {
    std::string name;
    std::vector<Compiled> parts;

    double indicator(const double* z) const;
    bool contains(const double* z) const { return indicator(z) > 0; }
};

// Builds a region from inequality strings such as "r > 2.1" or "abs(eta) < 0.5".
Region make_region(const std::string& name, const std::vector<std::string>& inequalities,
                   const std::vector<std::string>& coords,
                   const std::map<std::string, double>& params);

struct FlowOptions {
    double rtol = 1e-11;
    double atol = 1e-13;
    double max_time = std::numeric_limits<double>::infinity();
    long max_steps = 2000000;
    bool renormalize = false;
    int momentum_offset = -1;  // first momentum index; -1 means dim/2
    std::vector<Region> events;
    bool stop_on_event = true;
    double sample_dt = 0.0;  // 0 records every accepted step
    double h_init = 0.0;
    double h_max = std::numeric_limits<double>::infinity();
    // p-drift monitoring, compared at the current momentum scale
    std::optional<Compiled> monitor;
    int monitor_degree = 0;
    // invoked after every accepted step; may modify the state in place
    std::function<void(double t, Vec& z)> on_step;

    void validate() const;
};

struct FlowEvent {
    std::string region;
    double t = 0.0;
    Vec z;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<Vec> z;
    std::vector<double> lognorm;
    std::vector<double> drift;  // |p - p(start)| after undoing renormalization
    std::vector<FlowEvent> events;
    long steps = 0;
    long rejected = 0;
    double max_drift = 0.0;

    std::size_t size() const { return t.size(); }
    const Vec& back() const { return z.back(); }
    // momenta rescaled by exp(lognorm): the unnormalized state
    Vec unnormalized(std::size_t i, int momentum_offset) const;
};

Trajectory integrate(const VectorField& field, const Vec& start, double t0, double t1,
                     const FlowOptions& opts = {});

void write_csv(std::ostream& os, const Trajectory& tr, const std::vector<std::string>& coords);

struct TangentFlow {
    Vec z_end;
    RowMat monodromy;      // product of QR factors; may overflow for long horizons
    Vec log_stretch;       // accumulated log |R_ii|
    Vec exponents;         // log_stretch / |T|
    double T = 0.0;
    long steps = 0;
    std::vector<double> sample_t;          // times of each re-orthonormalization
    std::vector<Vec> sample_log_stretch;   // running log_stretch at those times
};

struct TangentOptions {
    FlowOptions flow;
    double reorth_dt = 1.0;
    // columns of the initial frame; identity when empty
    std::optional<RowMat> frame;
    // after each accepted step: may adjust the base point and the tangent frame
    std::function<void(double t, Vec& z, RowMat& V)> on_step;
};

TangentFlow tangent_flow(const VectorField& field, const Vec& start, double t0, double t1,
                         const TangentOptions& opts = {});

struct EscapeOutcome {
    bool reached = false;
    std::string region;
    double t = 0.0;  // hit time, or the horizon reached when trapped
    Vec z;
};

EscapeOutcome escape_time(const VectorField& field, const Vec& start,
                          const std::vector<Region>& control, double T_max,
                          FlowOptions opts = {});

// Deterministic parallel map over [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  unsigned threads = 0);

}  // namespace nht
