#pragma once

#include "hgul/encoders.hpp"

#include <algorithm>
#include <set>

namespace hgul {

struct KnnConfig {
    int k = 8;
    bool both_sides = true;        // both endpoint types select; union kept
    bool exclude_negative = false; // drop negative-similarity picks inside the top-k
};

struct WeightedEdge {
    int src, dst;
    double weight;
};

// Cosine similarity between all row pairs: S(u,v) = <hu,hv>/(|hu||hv| + eps).
inline Mat similarity_matrix(const Mat& hi, const Mat& hj, double eps = 1e-12) {
    require(hi.cols() == hj.cols(), "similarity_matrix: dimension mismatch");
    Vec ni = hi.rowwise().norm();
    Vec nj = hj.rowwise().norm();
    Mat s = hi * hj.transpose();
    for (int u = 0; u < s.rows(); ++u)
        for (int v = 0; v < s.cols(); ++v) s(u, v) /= ni(u) * nj(v) + eps;
    return s;
}

// Row u keeps its k largest entries, ties broken by smallest column index.
inline std::vector<WeightedEdge> build_knn_edges(const Mat& s, int k) {
    require(k >= 1, "build_knn_edges: k must be >= 1");
    std::vector<WeightedEdge> edges;
    int nc = static_cast<int>(s.cols());
    int kk = std::min(k, nc);
    std::vector<int> idx(static_cast<size_t>(nc));
    for (int u = 0; u < s.rows(); ++u) {
        for (int v = 0; v < nc; ++v) idx[static_cast<size_t>(v)] = v;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](int a, int b) { return s(u, a) > s(u, b); });
        for (int j = 0; j < kk; ++j) edges.push_back({u, idx[static_cast<size_t>(j)], s(u, idx[static_cast<size_t>(j)])});
    }
    return edges;
}

// Select the kNN edge set for one meta-relation from projected features.
// With both_sides set, type-i rows and type-j columns each pick their top-k
// and the union is kept.
inline std::vector<WeightedEdge> select_knn_edges(const Mat& s, const KnnConfig& cfg) {
    std::set<std::pair<int, int>> picked;
    std::vector<WeightedEdge> out;
    auto keep = [&](int u, int v, double w) {
        if (cfg.exclude_negative && w < 0.0) return;
        if (picked.insert({u, v}).second) out.push_back({u, v, w});
    };
    for (const auto& e : build_knn_edges(s, cfg.k)) keep(e.src, e.dst, e.weight);
    if (cfg.both_sides) {
        for (const auto& e : build_knn_edges(Mat(s.transpose()), cfg.k))
            keep(e.dst, e.src, e.weight);
    }
    std::sort(out.begin(), out.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    return out;
}

// Bipartite analogue of the graph-core normalization for a (dst x src)
// relation block: degrees get the +1 self-loop contribution, so empty
// rows/columns stay well defined.
inline ad::Var normalize_relation(ad::Tape& t, const ad::Var& a, bool intra_type) {
    if (intra_type) return ad::normalize_adjacency(t, a);
    ad::Var dr = t.pow_elem(t.clamp_min(t.add_scalar(t.row_sums(a), 1.0), 1e-8), -0.5);
    ad::Var dc = t.pow_elem(
        t.clamp_min(t.add_scalar(t.row_sums(t.transpose(a)), 1.0), 1e-8), -0.5);
    return t.scale_cols(t.scale_rows(a, dr), dc);
}

// Build the per-relation kNN similarity graph from projected features and
// run the relational encoder over it. The selected topology is frozen for
// the forward pass; the similarity weights stay on the tape so gradients
// reach the projection.
inline VarMap knn_encode(ad::Tape& t, const HeteroGraph& g, const VarMap& projected,
                         const KnnConfig& cfg, ParamBinder& bind,
                         const std::string& encoder_prefix) {
    std::map<std::string, ad::Var> adj;
    for (const auto& r : g.relations) {
        const ad::Var& hs = projected.at(r.src_type);
        const ad::Var& hd = projected.at(r.dst_type);
        Mat s = similarity_matrix(hs->value, hd->value);
        std::vector<std::pair<int, int>> edges;      // (src,dst) pairs
        std::vector<std::pair<int, int>> positions;  // (dst,src) scatter targets
        for (const auto& e : select_knn_edges(s, cfg)) {
            edges.push_back({e.src, e.dst});
            positions.push_back({e.dst, e.src});
        }
        ad::Var w = t.edge_cosine(hs, hd, edges);
        ad::Var a = t.scatter_edges(w, positions, g.count(r.dst_type), g.count(r.src_type));
        adj[r.name] = normalize_relation(t, a, r.src_type == r.dst_type);
    }
    return rgcn_forward(t, projected, adj, g.relations, bind, encoder_prefix);
}

}  // namespace hgul
