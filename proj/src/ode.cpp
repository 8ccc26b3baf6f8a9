#include "latentflow/ode.hpp"

#include <cmath>

namespace latentflow {

SolverMethod parse_solver_method(const std::string& name) {
    if (name == "euler") return SolverMethod::Euler;
    if (name == "midpoint") return SolverMethod::Midpoint;
    throw InvalidConfig("unknown solver.method '" + name + "'");
}

std::string solver_method_name(SolverMethod m) { return m == SolverMethod::Euler ? "euler" : "midpoint"; }

double grid_time(double t_from, double t_to, std::size_t n, std::size_t k) {
    if (k >= n) return t_to;
    const double h = (t_to - t_from) / static_cast<double>(n);
    return t_from + static_cast<double>(k) * h;
}

std::pair<LatentSeq, Trajectory> integrate(const VelocityField& field, const LatentSeq& z_start, double t_from,
                                           double t_to, const SolverConfig& cfg, const Condition& c, bool record) {
    if (cfg.num_steps == 0) throw InvalidArgument("integrate: num_steps must be >= 1");
    if (t_from == t_to) throw InvalidArgument("integrate: t_from must differ from t_to");
    static_cast<void>(FlowStep{t_from});
    static_cast<void>(FlowStep{t_to});
    const std::size_t n = cfg.num_steps;
    const double h = (t_to - t_from) / static_cast<double>(n);
    const bool backward = t_to < t_from;

    NfeCounter nfe;
    Trajectory traj;
    LatentSeq z = z_start;
    if (record) traj.points.push_back({t_from, z});
    for (std::size_t k = 0; k < n; ++k) {
        const double t0 = grid_time(t_from, t_to, n, k);
        if (cfg.method == SolverMethod::Euler) {
            const double t_eval = backward ? grid_time(t_from, t_to, n, k + 1) : t0;
            const LatentSeq v = field.eval(z, FlowStep(t_eval), c, nfe);
            for (std::size_t i = 0; i < z.size(); ++i) z[i] += h * v[i];
        } else {
            const LatentSeq v0 = field.eval(z, FlowStep(t0), c, nfe);
            const LatentSeq half = axpy(z, 0.5 * h, v0);
            const LatentSeq v1 = field.eval(half, FlowStep(t0 + 0.5 * h), c, nfe);
            for (std::size_t i = 0; i < z.size(); ++i) z[i] += h * v1[i];
        }
        if (!z.all_finite()) throw DivergenceError("integrate: non-finite state at step " + std::to_string(k), k);
        if (record) traj.points.push_back({grid_time(t_from, t_to, n, k + 1), z});
    }
    traj.nfe = nfe.count;
    return {std::move(z), std::move(traj)};
}

LatentSeq generate(const VelocityField& field, const Condition& c, std::size_t length, std::size_t channels,
                   const SolverConfig& cfg, Rng& rng, std::size_t* nfe) {
    const LatentSeq eps = sample_noise(length, channels, rng);
    auto [z, traj] = integrate(field, eps, 0.0, 1.0, cfg, c);
    if (nfe) *nfe += traj.nfe;
    return z;
}

double straightness(const Trajectory& traj) {
    const auto& pts = traj.points;
    if (pts.size() < 3) throw InvalidArgument("straightness: need at least 3 recorded points");
    const LatentSeq& a = pts.front().z;
    const LatentSeq chord = pts.back().z - a;
    const double chord_len2 = squared_norm(chord);
    if (!(chord_len2 > 0.0)) throw Error(ErrorCode::DegenerateTrajectory, "straightness: chord length is zero");
    const double chord_len = std::sqrt(chord_len2);
    double total = 0.0;
    for (std::size_t p = 1; p + 1 < pts.size(); ++p) {
        const LatentSeq rel = pts[p].z - a;
        double proj = 0.0;
        for (std::size_t i = 0; i < rel.size(); ++i) proj += rel[i] * chord[i];
        proj /= chord_len2;
        double perp2 = 0.0;
        for (std::size_t i = 0; i < rel.size(); ++i) {
            const double r = rel[i] - proj * chord[i];
            perp2 += r * r;
        }
        total += std::sqrt(perp2);
    }
    return total / static_cast<double>(pts.size() - 2) / chord_len;
}

}  // namespace latentflow
