#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <span>
#include <unordered_map>
#include <vector>

#include "ppmreg/errors.hpp"
#include "ppmreg/geometry.hpp"
#include "ppmreg/omega.hpp"
#include "ppmreg/ppm.hpp"

namespace ppmreg {

inline constexpr std::uint32_t kNoWitness = std::numeric_limits<std::uint32_t>::max();

// One finite feature of a persistence diagram, with the vertex pairs whose
// distances realize its birth and death filtration values. Dimension-0
// classes are born at 0 and carry no birth edge.
struct DiagramPoint {
    double birth = 0.0;
    double lifetime = 0.0;
    std::uint32_t birth_i = kNoWitness, birth_j = kNoWitness;
    std::uint32_t death_i = kNoWitness, death_j = kNoWitness;
};

struct PersistenceDiagram {
    int q = 0;
    std::vector<DiagramPoint> points;
};

namespace detail {

struct UnionFind {
    std::vector<std::uint32_t> parent;

    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0u);
    }

    std::uint32_t find(std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }

    bool merge(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[b] = a;
        return true;
    }
};

// Dimension-1 reduction state. Edges are indexed by rank in the sorted
// filtration order; a triangle is keyed by (id of its maximal edge, the
// opposite vertex), which sorts triangles compatibly with their filtration
// values because edge ranks already sort by value.
struct VrColumnContext {
    std::size_t n = 0;
    const std::vector<std::uint32_t>* edge_id = nullptr;  // n*n lookup
    std::uint64_t key_of(std::uint32_t eid_ij, std::uint32_t i, std::uint32_t j,
                         std::uint32_t k) const {
        const std::uint32_t a = (*edge_id)[i * n + k];
        const std::uint32_t b = (*edge_id)[j * n + k];
        const std::uint32_t m = std::max(eid_ij, std::max(a, b));
        std::uint32_t opposite = k;
        if (m == a) opposite = j;
        else if (m == b) opposite = i;
        return (static_cast<std::uint64_t>(m) << 32) | opposite;
    }
};

using MinHeap = std::priority_queue<std::uint64_t, std::vector<std::uint64_t>,
                                    std::greater<std::uint64_t>>;

// Pops cancelled (mod 2) duplicates and returns the minimal surviving
// entry, or nullopt if the column is empty.
inline bool heap_pivot(MinHeap& heap, std::uint64_t& pivot) {
    while (!heap.empty()) {
        pivot = heap.top();
        heap.pop();
        if (!heap.empty() && heap.top() == pivot) {
            heap.pop();  // pair cancels over Z/2
            continue;
        }
        return true;
    }
    return false;
}

} // namespace detail

// Exact Vietoris-Rips persistent homology in dimensions 0 and 1.
//
// Dimension 0 is single linkage: union-find over edges in filtration
// order. Dimension 1 reduces the coboundary matrix instead of the
// boundary matrix: non-tree edges are processed from the largest
// filtration value down, each column holding the edge's triangle cofacets.
// A column whose minimal cofacet is unclaimed pairs immediately without
// being materialized, which is what keeps dense inputs fast; only the
// remaining columns perform actual Z/2 additions. The filtration is
// truncated at the enclosing radius min_i max_j d(i,j): past that scale
// the complex is a cone, so the diagram is already complete.
//
// The resulting diagram is independent of the tie order among equal-value
// simplices; internally ties break by edge rank (value, then vertex pair).
inline std::vector<PersistenceDiagram> vr_persistence(const PointCloud& cloud, int max_dim,
                                                      std::size_t cap = 1024) {
    if (cloud.empty()) throw ContractViolation("vr_persistence: empty cloud");
    if (max_dim < 0 || max_dim > 1) throw ConfigError("vr_persistence supports dimensions 0 and 1");
    const std::size_t n = cloud.size();
    if (n > cap)
        throw ConfigError("vr_persistence: cloud size " + std::to_string(n) +
                          " exceeds the configured cap " + std::to_string(cap));

    std::vector<PersistenceDiagram> result(static_cast<std::size_t>(max_dim) + 1);
    for (int q = 0; q <= max_dim; ++q) result[static_cast<std::size_t>(q)].q = q;
    if (n == 1) return result;

    // Enclosing radius.
    double enclosing = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        double farthest = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) farthest = std::max(farthest, cloud.distance(i, j));
        enclosing = std::min(enclosing, farthest);
    }

    struct Edge {
        double value;
        std::uint32_t i, j;
    };
    std::vector<Edge> edges;
    edges.reserve(n * (n - 1) / 2);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = i + 1; j < n; ++j) {
            const double d = cloud.distance(i, j);
            if (d <= enclosing) edges.push_back({d, i, j});
        }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        if (a.value != b.value) return a.value < b.value;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    const std::size_t n_edges = edges.size();

    // Dimension 0 plus the tree edges, which the dimension-1 pass skips.
    std::vector<char> tree_edge(n_edges, 0);
    {
        detail::UnionFind uf(n);
        auto& diagram = result[0].points;
        std::size_t merges = 0;
        for (std::size_t e = 0; e < n_edges; ++e) {
            if (!uf.merge(edges[e].i, edges[e].j)) continue;
            tree_edge[e] = 1;
            if (edges[e].value > 0.0) {
                DiagramPoint p;
                p.birth = 0.0;
                p.lifetime = edges[e].value;
                p.death_i = edges[e].i;
                p.death_j = edges[e].j;
                diagram.push_back(p);
            }
            if (++merges == n - 1) break;
        }
    }
    if (max_dim < 1) return result;

    std::vector<std::uint32_t> edge_id(n * n, kNoWitness);
    for (std::size_t e = 0; e < n_edges; ++e) {
        edge_id[edges[e].i * n + edges[e].j] = static_cast<std::uint32_t>(e);
        edge_id[edges[e].j * n + edges[e].i] = static_cast<std::uint32_t>(e);
    }
    detail::VrColumnContext ctx{n, &edge_id};

    // Raw coboundary of an edge: every triangle (i, j, k) with both side
    // edges inside the truncated filtration.
    auto for_each_cofacet = [&](std::uint32_t e, auto&& fn) {
        const std::uint32_t vi = edges[e].i;
        const std::uint32_t vj = edges[e].j;
        for (std::uint32_t k = 0; k < n; ++k) {
            if (k == vi || k == vj) continue;
            if (edge_id[vi * n + k] == kNoWitness || edge_id[vj * n + k] == kNoWitness) continue;
            fn(ctx.key_of(e, vi, vj, k));
        }
    };

    // pivot triangle key -> claiming edge
    std::unordered_map<std::uint64_t, std::uint32_t> claimed;
    claimed.reserve(n_edges);
    // edges whose reduced column was materialized (others re-enumerate)
    std::unordered_map<std::uint32_t, std::vector<std::uint64_t>> stored;
    auto& diagram = result[1].points;

    auto emit = [&](std::uint32_t birth_edge, std::uint64_t pivot_key) {
        const std::uint32_t death_eid = static_cast<std::uint32_t>(pivot_key >> 32);
        const double birth_value = edges[birth_edge].value;
        const double death_value = edges[death_eid].value;
        if (death_value > birth_value) {
            DiagramPoint p;
            p.birth = birth_value;
            p.lifetime = death_value - birth_value;
            p.birth_i = edges[birth_edge].i;
            p.birth_j = edges[birth_edge].j;
            p.death_i = edges[death_eid].i;
            p.death_j = edges[death_eid].j;
            diagram.push_back(p);
        }
    };

    detail::MinHeap column;
    for (std::size_t idx = n_edges; idx-- > 0;) {
        const auto e = static_cast<std::uint32_t>(idx);
        if (tree_edge[e]) continue;

        // Unclaimed minimal cofacet: pair immediately, column stays raw.
        std::uint64_t min_key = std::numeric_limits<std::uint64_t>::max();
        for_each_cofacet(e, [&](std::uint64_t key) { min_key = std::min(min_key, key); });
        if (min_key == std::numeric_limits<std::uint64_t>::max()) continue;  // no cofacets
        if (!claimed.count(min_key)) {
            claimed.emplace(min_key, e);
            emit(e, min_key);
            continue;
        }

        column = detail::MinHeap();
        for_each_cofacet(e, [&](std::uint64_t key) { column.push(key); });
        std::uint64_t pivot = 0;
        while (detail::heap_pivot(column, pivot)) {
            const auto it = claimed.find(pivot);
            if (it == claimed.end()) {
                claimed.emplace(pivot, e);
                emit(e, pivot);
                // Materialize the reduced column for future additions.
                std::vector<std::uint64_t> out{pivot};
                std::uint64_t rest = 0;
                while (detail::heap_pivot(column, rest)) out.push_back(rest);
                std::sort(out.begin(), out.end());
                stored.emplace(e, std::move(out));
                break;
            }
            // Add the claiming edge's column and keep reducing.
            column.push(pivot);
            const std::uint32_t other = it->second;
            const auto st = stored.find(other);
            if (st != stored.end()) {
                for (std::uint64_t key : st->second) column.push(key);
            } else {
                for_each_cofacet(other, [&](std::uint64_t key) { column.push(key); });
            }
        }
    }
    return result;
}

// Chain rule from diagram-point (birth, lifetime) gradients back to cloud
// coordinates through the witness edges, mirroring ppm_backward.
inline void diagram_backward(const PersistenceDiagram& diagram, const PointCloud& cloud,
                             std::span<const double> d_birth, std::span<const double> d_lifetime,
                             GradAccumulator& accum) {
    if (d_birth.size() != diagram.points.size() || d_lifetime.size() != diagram.points.size())
        throw ContractViolation("diagram_backward: upstream gradient length mismatch");
    for (std::size_t i = 0; i < diagram.points.size(); ++i) {
        const DiagramPoint& p = diagram.points[i];
        const double g_death = d_lifetime[i];
        if (g_death != 0.0 && p.death_i != kNoWitness)
            accum.add_pair_distance_gradient(cloud, p.death_i, p.death_j, g_death);
        if (p.birth_i != kNoWitness) {
            const double g_birth = d_birth[i] - d_lifetime[i];
            if (g_birth != 0.0)
                accum.add_pair_distance_gradient(cloud, p.birth_i, p.birth_j, g_birth);
        }
    }
}

// Test-harness helper: does the closed-form small-sample persistence agree
// with the full reduction on the same subsample?
struct OracleComparison {
    bool match = false;
    OmegaPoint closed_form;
    std::vector<DiagramPoint> oracle_points;
};

inline OracleComparison compare_ph_small_to_oracle(const PointCloud& cloud,
                                                   std::span<const std::uint32_t> idx, int q,
                                                   double tol = 1e-9) {
    OracleComparison cmp;
    cmp.closed_form = ph_small(cloud, idx, q).point;

    std::vector<double> flat;
    for (auto i : idx) {
        auto p = cloud.point(i);
        flat.insert(flat.end(), p.begin(), p.end());
    }
    const PointCloud sub(std::move(flat), cloud.dim());
    const auto diagrams = vr_persistence(sub, q);
    cmp.oracle_points = diagrams[static_cast<std::size_t>(q)].points;

    if (cmp.closed_form.is_trivial()) {
        cmp.match = cmp.oracle_points.empty();
    } else if (cmp.oracle_points.size() == 1) {
        cmp.match = std::abs(cmp.oracle_points[0].birth - cmp.closed_form.birth) <= tol &&
                    std::abs(cmp.oracle_points[0].lifetime - cmp.closed_form.lifetime) <= tol;
    }
    return cmp;
}

inline void write_diagram_csv(std::span<const PersistenceDiagram> diagrams, std::ostream& out) {
    std::string line = "q,birth,lifetime\n";
    out << line;
    for (const auto& d : diagrams)
        for (const auto& p : d.points) {
            line.clear();
            line += std::to_string(d.q);
            line += ',';
            format_double(line, p.birth);
            line += ',';
            format_double(line, p.lifetime);
            line += '\n';
            out << line;
        }
}

} // namespace ppmreg
