#pragma once

#include "hgul/autodiff.hpp"
#include "hgul/graph.hpp"
#include "hgul/params.hpp"

#include <map>
#include <string>

namespace hgul {

using VarMap = std::map<std::string, ad::Var>;

// --- type-specific projection MLP --------------------------------------------

// Two linear layers with ReLU between, hidden width = output width d.
// Each node type owns its own weights; all types map into the same d.
struct MlpVars {
    ad::Var w1, b1, w2, b2;
};

inline void init_mlp_params(ParamStore& store, const std::string& prefix,
                            const std::map<std::string, int>& in_dims, int d,
                            std::uint64_t seed) {
    for (const auto& [t, din] : in_dims) {
        auto rng = rng_stream(seed, prefix + ":" + t);
        store.create(prefix + "." + t + ".w1", init_linear(din, d, rng));
        store.create(prefix + "." + t + ".b1", Mat::Zero(1, d));
        store.create(prefix + "." + t + ".w2", init_linear(d, d, rng));
        store.create(prefix + "." + t + ".b2", Mat::Zero(1, d));
    }
}

inline MlpVars bind_mlp(ParamBinder& bind, const std::string& prefix, const std::string& type) {
    return {bind(prefix + "." + type + ".w1"), bind(prefix + "." + type + ".b1"),
            bind(prefix + "." + type + ".w2"), bind(prefix + "." + type + ".b2")};
}

inline ad::Var mlp_forward(ad::Tape& t, const ad::Var& x, const MlpVars& p) {
    ad::Var h = t.relu(t.add_rowvec(t.matmul(x, p.w1), p.b1));
    return t.add_rowvec(t.matmul(h, p.w2), p.b2);
}

// Project every node type's raw features into the shared d-dimensional space.
inline VarMap project_features(ad::Tape& t, const HeteroGraph& g, ParamBinder& bind,
                               const std::string& prefix = "mlp") {
    VarMap out;
    for (const auto& type : g.node_types) {
        MlpVars p = bind_mlp(bind, prefix, type);
        out[type] = mlp_forward(t, t.constant(g.features.at(type)), p);
    }
    return out;
}

// --- relational graph convolution --------------------------------------------

// Per-relation transform plus an explicit self-loop transform per type:
//   out[t] = X_t W_self_t + b_t + sum over relations into t of A_r X_src W_r.
// The caller chooses the per-relation aggregation by choosing the adjacency
// normalization (the pipelines use the symmetric self-loop normalization
// from graph-core).
struct RgcnLayerSpec {
    std::string prefix;
    std::map<std::string, int> in_dims;  // per node type
    int out_dim = 0;
};

inline void init_rgcn_params(ParamStore& store, const RgcnLayerSpec& spec,
                             const std::vector<MetaRelation>& relations, std::uint64_t seed) {
    for (const auto& [t, din] : spec.in_dims) {
        auto rng = rng_stream(seed, spec.prefix + ":self:" + t);
        store.create(spec.prefix + ".self." + t, init_linear(din, spec.out_dim, rng));
        store.create(spec.prefix + ".bias." + t, Mat::Zero(1, spec.out_dim));
    }
    for (const auto& r : relations) {
        auto rng = rng_stream(seed, spec.prefix + ":rel:" + r.name);
        int din = spec.in_dims.at(r.src_type);
        store.create(spec.prefix + ".rel." + r.name, init_linear(din, spec.out_dim, rng));
    }
}

// feats: per-type node representations; adj: per-relation (dst x src)
// matrices, keyed by relation name.
inline VarMap rgcn_forward(ad::Tape& t, const VarMap& feats,
                           const std::map<std::string, ad::Var>& adj,
                           const std::vector<MetaRelation>& relations, ParamBinder& bind,
                           const std::string& prefix) {
    VarMap out;
    for (const auto& [type, x] : feats) {
        ad::Var self = t.matmul(x, bind(prefix + ".self." + type));
        out[type] = t.add_rowvec(self, bind(prefix + ".bias." + type));
    }
    for (const auto& r : relations) {
        auto it = adj.find(r.name);
        if (it == adj.end()) continue;  // relation pruned away entirely
        require(feats.count(r.src_type) && feats.count(r.dst_type),
                "relation '" + r.name + "' references unknown type");
        ad::Var msg = t.matmul(t.matmul(it->second, feats.at(r.src_type)),
                               bind(prefix + ".rel." + r.name));
        out[r.dst_type] = t.add(out.at(r.dst_type), msg);
    }
    return out;
}

// --- output normalization -----------------------------------------------------

inline void init_norm_params(ParamStore& store, const std::string& prefix,
                             const std::vector<std::string>& types, int d) {
    for (const auto& t : types) {
        store.create(prefix + ".scale." + t, Mat::Ones(1, d));
        store.create(prefix + ".shift." + t, Mat::Zero(1, d));
    }
}

inline ad::Var graph_norm(ad::Tape& t, const ad::Var& h, ParamBinder& bind,
                          const std::string& prefix, const std::string& type) {
    return t.graph_norm(h, bind(prefix + ".scale." + type), bind(prefix + ".shift." + type));
}

}  // namespace hgul
