#pragma once

#include "hgul/graph.hpp"

#include <set>

namespace hgul {

struct PerturbConfig {
    double rate = 0.0;               // perturbation rate p
    double removal_fraction = 0.5;   // share of p spent on removal vs addition
    std::uint64_t seed = 0;

    void validate() const {
        require(rate >= 0.0 && rate <= 1.0, "perturb: rate must be in [0,1]");
        require(removal_fraction >= 0.0 && removal_fraction <= 1.0,
                "perturb: removal_fraction must be in [0,1]");
    }
};

struct PerturbResult {
    HeteroGraph graph;
    std::map<std::string, int> addition_shortfall;  // relations that ran out of non-edges
};

// Schema-preserving structural noise: per relation with m edges, remove
// floor(p*f*m) existing edges and add floor(p*(1-f)*m) type-consistent
// non-edges, both uniformly at random. Nodes, features, labels and masks are
// untouched; removed edges are never re-added within the same call. A
// saturated relation adds as many non-edges as exist and records the
// shortfall.
inline PerturbResult perturb_graph(const HeteroGraph& g, const PerturbConfig& cfg) {
    cfg.validate();
    PerturbResult res;
    res.graph = g;
    if (cfg.rate == 0.0) return res;
    for (auto& r : res.graph.relations) {
        auto rng = rng_stream(cfg.seed, "perturb:" + r.name);
        int m = static_cast<int>(r.edges.size());
        int n_remove = static_cast<int>(cfg.rate * cfg.removal_fraction * m);
        int n_add = static_cast<int>(cfg.rate * (1.0 - cfg.removal_fraction) * m);

        std::set<Edge> forbidden(r.edges.begin(), r.edges.end());  // never re-add these

        // uniform removal via partial Fisher-Yates over the edge list
        std::vector<Edge> edges = r.edges;
        for (int i = 0; i < n_remove; ++i) {
            std::uniform_int_distribution<int> pick(i, static_cast<int>(edges.size()) - 1);
            std::swap(edges[static_cast<size_t>(i)], edges[static_cast<size_t>(pick(rng))]);
        }
        std::vector<Edge> kept(edges.begin() + n_remove, edges.end());

        int ns = res.graph.count(r.src_type), nd = res.graph.count(r.dst_type);
        bool intra = r.src_type == r.dst_type;
        long possible = static_cast<long>(ns) * nd - static_cast<long>(forbidden.size()) -
                        (intra ? ns : 0);
        std::set<Edge> added;
        if (n_add > static_cast<int>(possible)) {
            res.addition_shortfall[r.name] = n_add - static_cast<int>(std::max(possible, 0L));
            // saturated: enumerate every remaining non-edge
            for (int u = 0; u < ns; ++u)
                for (int v = 0; v < nd; ++v) {
                    if (intra && u == v) continue;
                    if (!forbidden.count({u, v})) added.insert({u, v});
                }
        } else {
            std::uniform_int_distribution<int> us(0, ns - 1), ud(0, nd - 1);
            while (static_cast<int>(added.size()) < n_add) {
                Edge e{us(rng), ud(rng)};
                if (intra && e.first == e.second) continue;
                if (forbidden.count(e) || added.count(e)) continue;
                added.insert(e);
            }
        }
        kept.insert(kept.end(), added.begin(), added.end());
        r.edges = std::move(kept);
    }
    res.graph.validate();
    return res;
}

}  // namespace hgul
