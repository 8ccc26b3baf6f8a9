#pragma once

// Zero-shot editing: invert to T_edit, then integrate forward under a new
// condition. Also the parameter sweeps over T_edit, NFE, lambda_KL and
// guidance scale.

#include "latentflow/core.hpp"
#include "latentflow/data.hpp"
#include "latentflow/invert.hpp"
#include "latentflow/metrics.hpp"
#include "latentflow/ode.hpp"
#include "latentflow/velocity.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace latentflow {

enum class EditMethod { Ddim, Regularized };
EditMethod parse_edit_method(const std::string& name);
std::string edit_method_name(EditMethod m);

struct EditRequest {
    LatentSeq x_orig;
    Condition c_orig;
    Condition c_edit;
    InversionConfig inversion{};
    SolverConfig solver{SolverMethod::Euler, 25};
    EditMethod method = EditMethod::Regularized;
    /// Backward steps for method=ddim; 0 uses inversion.steps.
    std::size_t ddim_steps = 0;
};

struct EditResult {
    LatentSeq x_edit;
    LatentSeq z_edit;  // inverted latent at T_edit
    std::size_t nfe_backward = 0;
    std::size_t nfe_forward = 0;
    std::size_t nfe_total = 0;
};

EditResult edit(const VelocityField& field, const EditRequest& req, Rng& rng);

/// Embedding-space blend (1 - alpha) e_a + alpha e_b, standing in for a
/// compositional prompt.
Condition blend_conditions(const MlpField& field, const Condition& a, const Condition& b, double alpha);

// ---------------------------------------------------------------------------
// Sweeps

/// Fixed editing workload: originals with their conditions, the target
/// conditions, real samples of the target distribution for the Frechet
/// metric, and the adherence classifier.
struct EditBenchmark {
    std::vector<LatentSeq> originals;
    std::vector<Condition> c_orig;
    std::vector<Condition> c_edit;
    std::vector<LatentSeq> reference;
    const LogisticClassifier* classifier = nullptr;
};

/// Class-swap workload: `count` originals taken round-robin over classes from
/// `pool`, each edited to class (k + 1) mod K. The reference uses the remaining
/// pool items, balanced to match the target-label mix of the edits.
EditBenchmark make_swap_benchmark(const Batch& pool, std::size_t num_classes, std::size_t count,
                                  const LogisticClassifier* classifier = nullptr);

struct SweepMethod {
    std::string name;
    EditMethod method = EditMethod::Regularized;
    InversionConfig inversion{};
};

struct SweepOptions {
    /// Forward solver; steps = 0 reuses the inversion step count S so both
    /// directions share one grid.
    SolverConfig forward{SolverMethod::Euler, 0};
    /// DDIM backward steps are chosen so its backward NFE matches a
    /// regularized inversion with this config, guidance factors included.
    bool equal_nfe = true;
    InversionConfig nfe_reference{};
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct SweepRow {
    std::string sweep;
    std::string method;
    double param = 0.0;
    double frechet = 0.0;
    double adherence = 0.0;
    double lpaps = 0.0;         // mean over samples
    double lpaps_median = 0.0;
    std::size_t nfe = 0;        // total per edit (backward + forward)
    std::string warning;
};

struct SweepTable {
    std::vector<SweepRow> rows;
    void write_csv(std::ostream& os) const;
    std::vector<const SweepRow*> select(const std::string& method) const;
};

/// Runs one edit per benchmark sample and aggregates the metrics.
SweepRow run_edit_cell(const VelocityField& field, const EditBenchmark& bench, const SweepMethod& method,
                       const SolverConfig& forward, std::size_t ddim_steps, std::uint64_t cell_seed);

SweepTable sweep_t_edit(const VelocityField& field, const EditBenchmark& bench, const std::vector<double>& grid,
                        const std::vector<SweepMethod>& methods, const SweepOptions& opts = {});

/// T_edit = 0; per budget, the step count S is chosen so that the total
/// edit NFE (both phases, guidance included) equals the budget, rounding
/// with a warning when it cannot.
SweepTable sweep_nfe(const VelocityField& field, const EditBenchmark& bench, const std::vector<std::size_t>& budgets,
                     const std::vector<SweepMethod>& methods, const SweepOptions& opts = {});

SweepTable sweep_lambda_kl(const VelocityField& field, const EditBenchmark& bench, const std::vector<double>& grid,
                           const std::vector<SweepMethod>& methods, const SweepOptions& opts = {});

/// Class-conditional generation quality as a function of the guidance scale.
/// For each scale and class, generates `per_class` samples and compares them
/// with `reference_by_class[k]`; frechet is averaged over classes.
SweepTable sweep_cfg(FieldPtr unguided, const std::vector<std::vector<LatentSeq>>& reference_by_class,
                     const LogisticClassifier* classifier, const std::vector<double>& grid, std::size_t per_class,
                     const SolverConfig& solver, std::uint64_t seed);

/// Line chart of `metric` ("frechet", "lpaps", "adherence") against param,
/// one polyline per method.
std::string render_sweep_svg(const SweepTable& table, const std::string& metric, const std::string& title);

}  // namespace latentflow
