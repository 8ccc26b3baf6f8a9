#pragma once

// Minibatch optimal-transport coupling between a data batch and a noise batch.

#include "latentflow/core.hpp"

#include <span>
#include <string>
#include <vector>

namespace latentflow {

/// Bijection over [0, B): data item i is paired with noise item map[i].
class Permutation {
public:
    Permutation() = default;
    explicit Permutation(std::vector<std::size_t> map);
    static Permutation identity(std::size_t n);

    std::size_t size() const { return map_.size(); }
    std::size_t operator[](std::size_t i) const { return map_[i]; }
    const std::vector<std::size_t>& map() const { return map_; }

    friend bool operator==(const Permutation&, const Permutation&) = default;

private:
    std::vector<std::size_t> map_;
};

enum class CouplingKind { Independent, Ot };
CouplingKind parse_coupling_kind(const std::string& name);
std::string coupling_kind_name(CouplingKind k);

/// sum_i ||x_i - e_{P(i)}||^2 over all entries, in double precision.
double pair_cost(std::span<const LatentSeq> data, std::span<const LatentSeq> noise, const Permutation& p);
double pair_cost(const Batch& data, std::span<const LatentSeq> noise, const Permutation& p);

/// Exact minimiser of pair_cost. Ties resolve to the lexicographically smallest map.
Permutation ot_couple(std::span<const LatentSeq> data, std::span<const LatentSeq> noise);
Permutation ot_couple(const Batch& data, std::span<const LatentSeq> noise);

/// Square linear assignment on a dense row-major cost matrix (n x n).
/// Returns row -> column, lexicographically smallest among optimal assignments.
std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n);

}  // namespace latentflow
