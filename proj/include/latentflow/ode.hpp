#pragma once

// Fixed-step ODE integration of velocity fields with NFE accounting.

#include "latentflow/core.hpp"
#include "latentflow/velocity.hpp"

#include <string>
#include <utility>
#include <vector>

namespace latentflow {

enum class SolverMethod { Euler, Midpoint };
SolverMethod parse_solver_method(const std::string& name);
std::string solver_method_name(SolverMethod m);

struct SolverConfig {
    SolverMethod method = SolverMethod::Midpoint;
    std::size_t num_steps = 32;
};

struct TrajectoryPoint {
    double t;
    LatentSeq z;
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;  // empty unless recording was requested
    std::size_t nfe = 0;
};

/// Time of grid node k on the uniform grid from t_from to t_to with n steps.
/// The last node is exactly t_to.
double grid_time(double t_from, double t_to, std::size_t n, std::size_t k);

/// Integrates dz/dt = v(z, t, c) from t_from to t_to on a uniform grid.
///   euler, forward:   z <- z + h v(z, t_k)
///   euler, backward:  z <- z + h v(z, t_{k+1})    (field read at the step's target time)
///   midpoint:         z <- z + h v(z + h/2 v(z, t_k), t_k + h/2)
/// h is signed. Non-finite states raise DivergenceError with the step index.
std::pair<LatentSeq, Trajectory> integrate(const VelocityField& field, const LatentSeq& z_start, double t_from,
                                           double t_to, const SolverConfig& cfg, const Condition& c,
                                           bool record = false);

/// Terminal state of a 0 -> 1 solve started from fresh N(0, I) noise.
LatentSeq generate(const VelocityField& field, const Condition& c, std::size_t length, std::size_t channels,
                   const SolverConfig& cfg, Rng& rng, std::size_t* nfe = nullptr);

/// Mean perpendicular distance of the interior points to the chord joining
/// the endpoints, divided by the chord length. Needs >= 3 points.
double straightness(const Trajectory& traj);

}  // namespace latentflow
