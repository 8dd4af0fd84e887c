#pragma once

#include "hgul/knn.hpp"

namespace hgul {

struct GumbelConfig {
    double tau0 = 1.0;
    double tau_min = 0.1;
    double decay = 0.98;
    double delta = 0.5;

    double tau_at(int epoch) const { return std::max(tau_min, tau0 * std::pow(decay, epoch)); }

    void validate() const {
        require(tau_min > 0.0 && tau0 >= tau_min, "gumbel: need tau0 >= tau_min > 0");
        require(delta > 0.0 && delta < 1.0, "gumbel: delta must be in (0,1)");
    }
};

// One learnable logit per original edge, initialized to the cosine
// similarity of the projected endpoint features. Stored per relation as an
// |E_r| x 1 parameter named "hgsl.logits.<relation>".
inline void init_edge_logits(ParamStore& store, const HeteroGraph& g,
                             const std::map<std::string, Mat>& projected) {
    for (const auto& r : g.relations) {
        Mat logits(static_cast<int>(r.edges.size()), 1);
        const Mat& hs = projected.at(r.src_type);
        const Mat& hd = projected.at(r.dst_type);
        for (size_t e = 0; e < r.edges.size(); ++e) {
            auto u = hs.row(r.edges[e].first);
            auto v = hd.row(r.edges[e].second);
            logits(static_cast<int>(e), 0) = u.dot(v) / (u.norm() * v.norm() + 1e-12);
        }
        store.create("hgsl.logits." + r.name, std::move(logits));
    }
}

inline Mat sample_gumbel_noise(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(std::numeric_limits<double>::min(), 1.0);
    Mat g(n, 1);
    for (int i = 0; i < n; ++i) g(i, 0) = -std::log(-std::log(u(rng)));
    return g;
}

// Soft edge sample y = sigmoid((pi + g) / tau) with pi treated as the only
// differentiable input; the noise is a frozen constant for the pass.
inline ad::Var gumbel_sample(ad::Tape& t, const ad::Var& pi, double tau, const Mat& noise) {
    return t.sigmoid(t.scale(t.add(pi, t.constant(noise)), 1.0 / tau));
}

struct RefineResult {
    VarMap representations;               // encoder output per type
    ad::Var l_reg;                        // || A_refined - A ||^2 = soft count of dropped edges
    std::map<std::string, Mat> refined;   // per relation: refined edge weights (|E_r| x 1)
    std::map<std::string, Mat> mask;      // per relation: 0/1 kept-edge mask
};

// The structure-learning path: sample each edge, hard-threshold with
// straight-through gradients, refine the adjacency as A * Z (the kept edges
// retain their original unit weight; the logits only drive the keep
// probability), then encode the *raw* node features over the refined,
// normalized graph. Only removes original edges; never adds or reweights.
inline RefineResult refine_and_encode(ad::Tape& t, const HeteroGraph& g, ParamBinder& bind,
                                      const GumbelConfig& cfg, double tau,
                                      std::uint64_t noise_seed, bool sample_noise, bool soft_ste,
                                      const std::string& encoder_prefix) {
    RefineResult res;
    std::map<std::string, ad::Var> adj;
    ad::Var l_reg = t.constant(Mat::Zero(1, 1));
    for (const auto& r : g.relations) {
        int m = static_cast<int>(r.edges.size());
        ad::Var logits = bind("hgsl.logits." + r.name);
        if (m == 0) {
            res.refined[r.name] = Mat(0, 1);
            res.mask[r.name] = Mat(0, 1);
            continue;  // relation contributes self-loop paths only
        }
        Mat noise = Mat::Zero(m, 1);
        if (sample_noise) {
            auto rng = rng_stream(noise_seed, "gumbel:" + r.name);
            noise = sample_gumbel_noise(m, rng);
        }
        ad::Var pi = t.sigmoid(logits);
        ad::Var y = gumbel_sample(t, pi, tau, noise);
        ad::Var z = t.hard_threshold_ste(y, cfg.delta, soft_ste);
        ad::Var w = z;
        ad::Var dev = t.sub(w, t.constant(Mat::Ones(m, 1)));
        l_reg = t.add(l_reg, t.sum(t.hadamard(dev, dev)));
        std::vector<std::pair<int, int>> positions;
        positions.reserve(r.edges.size());
        for (const auto& [u, v] : r.edges) positions.push_back({v, u});
        ad::Var a = t.scatter_edges(w, positions, g.count(r.dst_type), g.count(r.src_type));
        adj[r.name] = normalize_relation(t, a, r.src_type == r.dst_type);
        res.refined[r.name] = w->value;
        res.mask[r.name] = z->value;
    }
    VarMap raw;
    for (const auto& type : g.node_types) raw[type] = t.constant(g.features.at(type));
    res.representations = rgcn_forward(t, raw, adj, g.relations, bind, encoder_prefix);
    res.l_reg = l_reg;
    return res;
}

}  // namespace hgul
