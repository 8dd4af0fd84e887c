#pragma once

#include "hgul/encoders.hpp"
#include "hgul/knn.hpp"

namespace hgul {

struct PprConfig {
    double alpha = 0.85;
    int k_iter = 120;
    double tol = 0.0;  // early stop when the next series term drops below this

    void validate() const {
        require(alpha >= 0.0 && alpha < 1.0, "ppr: alpha must be in [0,1)");
        require(k_iter >= 1, "ppr: k_iter must be >= 1");
    }
};

// Truncated geometric series sum_{k=0..K} alpha^k A^k approximating the
// resolvent (I - alpha A)^{-1}; truncation error is bounded by
// alpha^{K+1} / (1 - alpha) in the spectral norm when |A|_2 <= 1.
inline Mat ppr_kernel(const Mat& a_hat, const PprConfig& cfg) {
    cfg.validate();
    int n = static_cast<int>(a_hat.rows());
    Mat acc = Mat::Identity(n, n);
    Mat term = acc;
    for (int k = 1; k <= cfg.k_iter; ++k) {
        term = cfg.alpha * (a_hat * term);
        acc += term;
        if (cfg.tol > 0.0 && term.norm() < cfg.tol) break;
    }
    return acc;
}

struct AffinityMatrix {
    Mat c_cls;            // C x C class-level affinity
    bool surrogate = false;
};

// Class-level affinity C = Y^T ker(A) Y, aggregating walk mass between every
// pair of classes with exponentially decaying hop weights.
inline AffinityMatrix extended_affinity(const Mat& a_hat, const Mat& y, const PprConfig& cfg) {
    require(y.rows() == a_hat.rows(), "extended_affinity: Y rows must match A");
    return {y.transpose() * ppr_kernel(a_hat, cfg) * y, false};
}

inline Mat one_hot(const std::vector<int>& labels, int num_classes) {
    Mat y = Mat::Zero(static_cast<int>(labels.size()), num_classes);
    for (size_t i = 0; i < labels.size(); ++i) y(static_cast<int>(i), labels[i]) = 1.0;
    return y;
}

// --- type-pair reweighting ----------------------------------------------------

// n x |types| one-hot type indicator over the concatenated node ordering.
inline Mat type_indicator(const HeteroGraph& g) {
    Mat t = Mat::Zero(g.total_nodes(), static_cast<int>(g.node_types.size()));
    int row = 0;
    for (size_t k = 0; k < g.node_types.size(); ++k)
        for (int i = 0; i < g.count(g.node_types[k]); ++i) t(row++, static_cast<int>(k)) = 1.0;
    return t;
}

// Every existing edge's weight scaled by the learnable importance of its
// endpoint type pair: Abar_ij = A_ij * R[type(i), type(j)].
inline Mat reweight_adjacency(const HeteroGraph& g, const Mat& r) {
    size_t na = g.node_types.size();
    require(r.rows() == static_cast<int>(na) && r.cols() == static_cast<int>(na),
            "reweight_adjacency: R must be |types| x |types|");
    Mat t = type_indicator(g);
    return full_adjacency(g).cwiseProduct(t * r * t.transpose());
}

inline ad::Var reweight_adjacency(ad::Tape& t, const Mat& a_full, const Mat& type_ind,
                                  const ad::Var& r) {
    ad::Var ind = t.constant(type_ind);
    return t.hadamard(t.constant(a_full), t.matmul(t.matmul(ind, r), t.transpose(ind)));
}

// --- surrogate labels ---------------------------------------------------------

struct SurrogateLabels {
    Mat y;  // n_t x C, row-stochastic; train rows exactly one-hot
};

// Kernel over the reweighted full graph, restricted to the target block,
// folded with (surrogate) labels: Chat = Y_t^T B_t Y_t.
inline AffinityMatrix hetero_affinity(const HeteroGraph& g, const Mat& r, const Mat& y_t,
                                      const PprConfig& cfg) {
    require(g.count(g.target_type) > 0, "hetero_affinity: empty target type");
    Mat b = ppr_kernel(normalize_adjacency(reweight_adjacency(g, r)), cfg);
    int off = g.type_offset(g.target_type), nt = g.count(g.target_type);
    Mat bt = b.block(off, off, nt, nt);
    return {y_t.transpose() * bt * y_t, true};
}

// --- affinity-guided features ---------------------------------------------

// Lift the class-level affinity to a node-level operator
// A_aff = rownorm(clamp0(Yhat C Yhat^T)) and smooth features through it. A
// node whose affinity row vanishes keeps its own features.
inline Mat affinity_operator(const Mat& c_cls, const Mat& y_hat) {
    Mat a = (y_hat * c_cls * y_hat.transpose()).cwiseMax(0.0);
    int n = static_cast<int>(a.rows());
    for (int i = 0; i < n; ++i) {
        double s = a.row(i).sum();
        if (s > 1e-12) {
            a.row(i) /= s;
        } else {
            a.row(i).setZero();
            a(i, i) = 1.0;
        }
    }
    return a;
}

inline Mat affinity_features(const Mat& c_cls, const Mat& y_hat, const Mat& x_t) {
    return affinity_operator(c_cls, y_hat) * x_t;
}

inline ad::Var affinity_features(ad::Tape& t, const ad::Var& c_cls, const Mat& y_hat,
                                 const ad::Var& x_t) {
    ad::Var yh = t.constant(y_hat);
    ad::Var a = t.row_normalize_clamped(t.matmul(t.matmul(yh, c_cls), t.transpose(yh)));
    return t.matmul(a, x_t);
}

// --- gated fusion ----------------------------------------------------------

// Per-entry convex combination h' = (1-g) . h + g . h_aff with
// g = sigmoid([h ; h_aff] W + b).
inline ad::Var gate_fuse(ad::Tape& t, const ad::Var& h, const ad::Var& h_aff, const ad::Var& w,
                         const ad::Var& b) {
    ad::Var g = t.sigmoid(t.add_rowvec(t.matmul(t.concat_cols(h, h_aff), w), b));
    return t.add(h, t.hadamard(g, t.sub(h_aff, h)));
}

// --- pretraining for surrogate labels --------------------------------------

// Train a fresh relational encoder plus linear readout on the original
// graph, then splice softmax predictions with ground-truth one-hot rows on
// the train mask.
inline SurrogateLabels pretrain_predict(const HeteroGraph& g, int epochs, std::uint64_t seed,
                                        int d = 32, double lr = 5e-3) {
    require(!g.train_idx.empty(), "pretrain: empty train mask");
    int c = g.num_classes();
    ParamStore store;
    RgcnLayerSpec spec;
    spec.prefix = "pre.rgcn";
    for (const auto& t : g.node_types) spec.in_dims[t] = static_cast<int>(g.features.at(t).cols());
    spec.out_dim = d;
    init_rgcn_params(store, spec, g.relations, seed);
    {
        auto rng = rng_stream(seed, "pre.readout");
        store.create("pre.readout.w", init_linear(d, c, rng));
        store.create("pre.readout.b", Mat::Zero(1, c));
    }

    std::map<std::string, Mat> norm_adj;
    for (const auto& r : g.relations) norm_adj[r.name] = relation_adjacency(g, r);

    auto forward = [&](ad::Tape& t, ParamBinder& bind) {
        VarMap raw;
        for (const auto& type : g.node_types) raw[type] = t.constant(g.features.at(type));
        std::map<std::string, ad::Var> adj;
        for (const auto& r : g.relations)
            adj[r.name] = normalize_relation(t, t.constant(norm_adj.at(r.name)),
                                             r.src_type == r.dst_type);
        VarMap h = rgcn_forward(t, raw, adj, g.relations, bind, "pre.rgcn");
        return t.add_rowvec(t.matmul(t.relu(h.at(g.target_type)), bind("pre.readout.w")),
                            bind("pre.readout.b"));
    };

    auto train_mask = g.mask_vector(g.train_idx);
    for (int e = 0; e < epochs; ++e) {
        ad::Tape t;
        ParamBinder bind(store, t);
        ad::Var loss = t.cross_entropy(forward(t, bind), g.labels, train_mask);
        t.backward(loss);
        store.adam_step(lr, 0.0);
    }

    ad::Tape t;
    ParamBinder bind(store, t);
    Mat probs = t.softmax_rows(forward(t, bind))->value;
    for (int i : g.train_idx) {
        probs.row(i).setZero();
        probs(i, g.labels[static_cast<size_t>(i)]) = 1.0;
    }
    return {probs};
}

}  // namespace hgul
