#include "latentflow/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace latentflow {

Permutation::Permutation(std::vector<std::size_t> map) : map_(std::move(map)) {
    std::vector<bool> seen(map_.size(), false);
    for (std::size_t v : map_) {
        if (v >= map_.size() || seen[v]) throw InvalidArgument("Permutation: map is not a bijection");
        seen[v] = true;
    }
}

Permutation Permutation::identity(std::size_t n) {
    std::vector<std::size_t> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = i;
    return Permutation(std::move(m));
}

CouplingKind parse_coupling_kind(const std::string& name) {
    if (name == "independent" || name == "none") return CouplingKind::Independent;
    if (name == "ot") return CouplingKind::Ot;
    throw InvalidConfig("unknown coupling.kind '" + name + "'");
}

std::string coupling_kind_name(CouplingKind k) { return k == CouplingKind::Ot ? "ot" : "independent"; }

namespace {

void check_sizes(std::span<const LatentSeq> data, std::span<const LatentSeq> noise, std::size_t p) {
    if (data.size() != noise.size() || data.size() != p)
        throw InvalidArgument("coupling: batch, noise and permutation sizes differ");
    for (std::size_t i = 0; i < data.size(); ++i) {
        require_same_shape(data.front(), data[i], "coupling");
        require_same_shape(data.front(), noise[i], "coupling");
    }
}

// Row-major cost; symmetric treatment of rows and columns is not assumed.
struct Hungarian {
    std::size_t n;
    std::span<const double> a;
    std::vector<double> u, v;      // potentials, reduced cost a - u - v >= 0
    std::vector<std::size_t> p;    // column -> row (1-based, 0 = free)

    double at(std::size_t i, std::size_t j) const { return a[(i - 1) * n + (j - 1)]; }

    void run() {
        const double inf = std::numeric_limits<double>::infinity();
        u.assign(n + 1, 0.0);
        v.assign(n + 1, 0.0);
        p.assign(n + 1, 0);
        std::vector<std::size_t> way(n + 1, 0);
        for (std::size_t i = 1; i <= n; ++i) {
            p[0] = i;
            std::size_t j0 = 0;
            std::vector<double> minv(n + 1, inf);
            std::vector<bool> used(n + 1, false);
            do {
                used[j0] = true;
                const std::size_t i0 = p[j0];
                double delta = inf;
                std::size_t j1 = 0;
                for (std::size_t j = 1; j <= n; ++j) {
                    if (used[j]) continue;
                    const double cur = at(i0, j) - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta) {
                        delta = minv[j];
                        j1 = j;
                    }
                }
                for (std::size_t j = 0; j <= n; ++j) {
                    if (used[j]) {
                        u[p[j]] += delta;
                        v[j] -= delta;
                    } else {
                        minv[j] -= delta;
                    }
                }
                j0 = j1;
            } while (p[j0] != 0);
            do {
                const std::size_t j1 = way[j0];
                p[j0] = p[j1];
                j0 = j1;
            } while (j0 != 0);
        }
    }
};

// Among perfect matchings in the tight-edge graph (all of which are optimal by
// complementary slackness), pick the lexicographically smallest row -> column map.
class TightRefiner {
public:
    TightRefiner(std::size_t n, std::vector<std::vector<bool>> tight, std::vector<std::size_t> row_to_col)
        : n_(n), tight_(std::move(tight)), m_(std::move(row_to_col)), minv_(n) {
        for (std::size_t i = 0; i < n_; ++i) minv_[m_[i]] = i;
    }

    std::vector<std::size_t> run() {
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < m_[i]; ++j) {
                if (!tight_[i][j] || minv_[j] < i) continue;
                if (reroute(i, j)) break;
            }
        }
        return m_;
    }

private:
    // Try to give column j to row i. The displaced row must reach i's current
    // column through an alternating path over rows > i.
    bool reroute(std::size_t i, std::size_t j) {
        const std::size_t target = m_[i];
        const std::size_t start = minv_[j];
        std::vector<std::size_t> parent_row(n_, SIZE_MAX);  // column -> row that moves onto it
        std::vector<bool> seen_col(n_, false);
        std::vector<std::size_t> queue{start};
        seen_col[j] = true;
        seen_col[target] = false;
        std::size_t found = SIZE_MAX;
        for (std::size_t q = 0; q < queue.size() && found == SIZE_MAX; ++q) {
            const std::size_t r = queue[q];
            for (std::size_t c = 0; c < n_; ++c) {
                if (seen_col[c] || !tight_[r][c] || c == m_[r]) continue;
                if (c != target && minv_[c] <= i) continue;
                seen_col[c] = true;
                parent_row[c] = r;
                if (c == target) {
                    found = c;
                    break;
                }
                queue.push_back(minv_[c]);
            }
        }
        if (found == SIZE_MAX) return false;
        // Walk back from the target column, shifting each row onto its new column.
        std::size_t c = found;
        while (true) {
            const std::size_t r = parent_row[c];
            const std::size_t prev = m_[r];
            m_[r] = c;
            minv_[c] = r;
            if (r == start) break;
            c = prev;
        }
        m_[i] = j;
        minv_[j] = i;
        return true;
    }

    std::size_t n_;
    std::vector<std::vector<bool>> tight_;
    std::vector<std::size_t> m_;
    std::vector<std::size_t> minv_;
};

}  // namespace

std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
    if (n == 0) throw InvalidArgument("solve_assignment: empty problem");
    if (cost.size() != n * n) throw InvalidArgument("solve_assignment: cost matrix is not n x n");
    Hungarian h{n, cost, {}, {}, {}};
    h.run();
    std::vector<std::size_t> row_to_col(n);
    for (std::size_t j = 1; j <= n; ++j) row_to_col[h.p[j] - 1] = j - 1;

    double scale = 1.0;
    for (double c : cost) scale = std::max(scale, std::abs(c));
    const double tol = 1e-12 * scale * static_cast<double>(n);
    std::vector<std::vector<bool>> tight(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            tight[i][j] = cost[i * n + j] - h.u[i + 1] - h.v[j + 1] <= tol || row_to_col[i] == j;
    return TightRefiner(n, std::move(tight), std::move(row_to_col)).run();
}

double pair_cost(std::span<const LatentSeq> data, std::span<const LatentSeq> noise, const Permutation& p) {
    check_sizes(data, noise, p.size());
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) total += squared_distance(data[i], noise[p[i]]);
    return total;
}

double pair_cost(const Batch& data, std::span<const LatentSeq> noise, const Permutation& p) {
    const auto xs = data.latents();
    return pair_cost(xs, noise, p);
}

Permutation ot_couple(std::span<const LatentSeq> data, std::span<const LatentSeq> noise) {
    check_sizes(data, noise, data.size());
    const std::size_t n = data.size();
    if (n == 0) throw InvalidArgument("ot_couple: empty batch");
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = squared_distance(data[i], noise[j]);
    return Permutation(solve_assignment(cost, n));
}

Permutation ot_couple(const Batch& data, std::span<const LatentSeq> noise) {
    const auto xs = data.latents();
    return ot_couple(xs, noise);
}

}  // namespace latentflow
