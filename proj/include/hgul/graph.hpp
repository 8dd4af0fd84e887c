#pragma once

#include "hgul/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace hgul {

using Edge = std::pair<int, int>;

struct MetaRelation {
    std::string src_type;
    std::string name;
    std::string dst_type;
    std::vector<Edge> edges;
    bool is_symmetric = false;
};

// Typed node sets with per-type feature matrices, per-relation edge lists,
// and labels plus train/val/test masks on one target node type.
// Immutable after construction; validate() enforces the structural invariants.
struct HeteroGraph {
    std::vector<std::string> node_types;
    std::map<std::string, int> counts;
    std::map<std::string, Mat> features;
    std::vector<MetaRelation> relations;
    std::string target_type;
    std::vector<int> labels;  // class ids for target-type nodes
    std::vector<int> train_idx, val_idx, test_idx;

    int num_classes() const {
        int c = 0;
        for (int y : labels) c = std::max(c, y + 1);
        return c;
    }

    int count(const std::string& t) const {
        auto it = counts.find(t);
        require(it != counts.end(), "unknown node type '" + t + "'");
        return it->second;
    }

    int total_nodes() const {
        int n = 0;
        for (const auto& t : node_types) n += count(t);
        return n;
    }

    // Offset of a type's block in the concatenated all-nodes ordering.
    int type_offset(const std::string& t) const {
        int off = 0;
        for (const auto& nt : node_types) {
            if (nt == t) return off;
            off += count(nt);
        }
        throw InvariantError("unknown node type '" + t + "'");
    }

    int type_index(const std::string& t) const {
        for (size_t i = 0; i < node_types.size(); ++i)
            if (node_types[i] == t) return static_cast<int>(i);
        throw InvariantError("unknown node type '" + t + "'");
    }

    std::vector<char> mask_vector(const std::vector<int>& idx) const {
        std::vector<char> m(count(target_type), 0);
        for (int i : idx) m[static_cast<size_t>(i)] = 1;
        return m;
    }

    void validate() const {
        require(!node_types.empty(), "graph has no node types");
        std::set<std::string> seen;
        for (const auto& t : node_types) {
            require(seen.insert(t).second, "duplicate node type '" + t + "'");
            require(counts.count(t) == 1, "missing count for type '" + t + "'");
            auto fit = features.find(t);
            require(fit != features.end(), "missing features for type '" + t + "'");
            require(fit->second.rows() == counts.at(t),
                    "feature row count mismatch for type '" + t + "'");
            require(fit->second.cols() >= 1, "feature dimension must be >= 1 for type '" + t + "'");
        }
        for (const auto& r : relations) {
            require(counts.count(r.src_type) == 1, "relation '" + r.name + "' references unknown src type");
            require(counts.count(r.dst_type) == 1, "relation '" + r.name + "' references unknown dst type");
            std::set<Edge> dedup;
            for (const auto& [u, v] : r.edges) {
                require(u >= 0 && u < counts.at(r.src_type),
                        "relation '" + r.name + "': src index out of range");
                require(v >= 0 && v < counts.at(r.dst_type),
                        "relation '" + r.name + "': dst index out of range");
                require(dedup.insert({u, v}).second,
                        "relation '" + r.name + "': duplicate edge");
            }
        }
        require(counts.count(target_type) == 1, "target type not among node types");
        int nt = counts.at(target_type);
        require(static_cast<int>(labels.size()) == nt, "label count != target node count");
        int c = num_classes();
        require(c >= 1, "no classes present");
        for (int y : labels) require(y >= 0, "negative class id");
        std::vector<char> covered(static_cast<size_t>(nt), 0);
        auto check_mask = [&](const std::vector<int>& idx, const char* which) {
            for (int i : idx) {
                require(i >= 0 && i < nt, std::string(which) + " mask index out of range");
                require(!covered[static_cast<size_t>(i)], "masks are not disjoint");
                covered[static_cast<size_t>(i)] = 1;
            }
        };
        check_mask(train_idx, "train");
        check_mask(val_idx, "val");
        check_mask(test_idx, "test");
        std::vector<char> in_train(static_cast<size_t>(c), 0);
        for (int i : train_idx) in_train[static_cast<size_t>(labels[static_cast<size_t>(i)])] = 1;
        for (int k = 0; k < c; ++k)
            require(in_train[static_cast<size_t>(k)],
                    "class " + std::to_string(k) + " missing from train mask");
    }
};

// Materialize implied reverse edges so downstream code only sees directed
// edge lists. Intra-type relations gain missing reversed pairs in place;
// cross-type relations gain a companion "<name>_rev" relation.
inline void materialize_symmetric(HeteroGraph& g) {
    std::vector<MetaRelation> extra;
    for (auto& r : g.relations) {
        if (!r.is_symmetric) continue;
        if (r.src_type == r.dst_type) {
            std::set<Edge> present(r.edges.begin(), r.edges.end());
            std::vector<Edge> add;
            for (const auto& [u, v] : r.edges)
                if (!present.count({v, u})) add.push_back({v, u});
            r.edges.insert(r.edges.end(), add.begin(), add.end());
        } else {
            MetaRelation rev;
            rev.src_type = r.dst_type;
            rev.dst_type = r.src_type;
            rev.name = r.name + "_rev";
            for (const auto& [u, v] : r.edges) rev.edges.push_back({v, u});
            extra.push_back(std::move(rev));
        }
        r.is_symmetric = false;
    }
    g.relations.insert(g.relations.end(), extra.begin(), extra.end());
}

// --- file format ------------------------------------------------------------

inline nlohmann::json graph_to_json(const HeteroGraph& g) {
    nlohmann::json j;
    j["node_types"] = nlohmann::json::array();
    for (const auto& t : g.node_types) {
        const Mat& x = g.features.at(t);
        std::vector<double> flat(static_cast<size_t>(x.size()));
        for (int i = 0; i < x.rows(); ++i)
            for (int k = 0; k < x.cols(); ++k)
                flat[static_cast<size_t>(i) * static_cast<size_t>(x.cols()) + static_cast<size_t>(k)] = x(i, k);
        j["node_types"].push_back({{"name", t},
                                   {"count", g.counts.at(t)},
                                   {"feature_dim", x.cols()},
                                   {"features", flat}});
    }
    j["relations"] = nlohmann::json::array();
    for (const auto& r : g.relations) {
        nlohmann::json e = nlohmann::json::array();
        for (const auto& [u, v] : r.edges) e.push_back({u, v});
        j["relations"].push_back({{"src_type", r.src_type},
                                  {"name", r.name},
                                  {"dst_type", r.dst_type},
                                  {"edges", e},
                                  {"is_symmetric", r.is_symmetric}});
    }
    j["target_type"] = g.target_type;
    j["labels"] = g.labels;
    j["masks"] = {{"train", g.train_idx}, {"val", g.val_idx}, {"test", g.test_idx}};
    return j;
}

inline void save_graph(const HeteroGraph& g, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot open '" + path + "' for writing");
    out << graph_to_json(g).dump(1) << "\n";
}

inline HeteroGraph graph_from_json(const nlohmann::json& j) {
    HeteroGraph g;
    try {
        for (const auto& nt : j.at("node_types")) {
            std::string name = nt.at("name").get<std::string>();
            int count = nt.at("count").get<int>();
            int dim = nt.at("feature_dim").get<int>();
            const auto& flat = nt.at("features");
            require(static_cast<int>(flat.size()) == count * dim,
                    "type '" + name + "': feature list length != count*feature_dim");
            Mat x(count, dim);
            for (int i = 0; i < count; ++i)
                for (int k = 0; k < dim; ++k)
                    x(i, k) = flat[static_cast<size_t>(i) * static_cast<size_t>(dim) + static_cast<size_t>(k)].get<double>();
            g.node_types.push_back(name);
            g.counts[name] = count;
            g.features[name] = std::move(x);
        }
        for (const auto& rj : j.at("relations")) {
            MetaRelation r;
            r.src_type = rj.at("src_type").get<std::string>();
            r.name = rj.at("name").get<std::string>();
            r.dst_type = rj.at("dst_type").get<std::string>();
            r.is_symmetric = rj.value("is_symmetric", false);
            for (const auto& e : rj.at("edges"))
                r.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
            g.relations.push_back(std::move(r));
        }
        g.target_type = j.at("target_type").get<std::string>();
        g.labels = j.at("labels").get<std::vector<int>>();
        g.train_idx = j.at("masks").at("train").get<std::vector<int>>();
        g.val_idx = j.at("masks").at("val").get<std::vector<int>>();
        g.test_idx = j.at("masks").at("test").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw InvariantError(std::string("graph parse error: ") + e.what());
    }
    materialize_symmetric(g);
    g.validate();
    return g;
}

inline HeteroGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvariantError("graph parse error in '" + path + "': " + e.what());
    }
    return graph_from_json(j);
}

// --- synthetic generator ----------------------------------------------------

struct SyntheticRelationConfig {
    std::string src_type;
    std::string name;
    std::string dst_type;
    double intra_prob = 0.1;  // edge probability when latent classes match
    double inter_prob = 0.1;  // edge probability otherwise
};

struct SyntheticConfig {
    std::vector<std::pair<std::string, int>> type_counts;
    int feature_dim = 8;
    double center_separation = 2.0;
    int num_classes = 2;
    std::vector<SyntheticRelationConfig> relations;
    std::string target_type;
    double train_frac = 0.4, val_frac = 0.2;
    std::uint64_t seed = 0;

    void validate() const {
        require(!type_counts.empty(), "no node types configured");
        require(num_classes >= 1, "num_classes must be >= 1");
        require(feature_dim >= 1, "feature_dim must be >= 1");
        for (const auto& r : relations) {
            require(r.intra_prob >= 0.0 && r.intra_prob <= 1.0, "intra_prob out of [0,1]");
            require(r.inter_prob >= 0.0 && r.inter_prob <= 1.0, "inter_prob out of [0,1]");
        }
    }
};

// Every node (any type) gets a latent class that drives both its feature
// center and the intra/inter edge probabilities; only target-type nodes
// expose the class as a label.
inline HeteroGraph generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    HeteroGraph g;
    g.target_type = cfg.target_type.empty() ? cfg.type_counts.front().first : cfg.target_type;

    std::map<std::string, std::vector<int>> latent;
    auto crng = rng_stream(cfg.seed, "centers");
    Mat centers = random_normal(cfg.num_classes, cfg.feature_dim, 0.0, 1.0, crng) * cfg.center_separation;

    for (const auto& [t, n] : cfg.type_counts) {
        require(n >= 1, "type '" + t + "' has zero nodes");
        g.node_types.push_back(t);
        g.counts[t] = n;
        auto lrng = rng_stream(cfg.seed, "latent:" + t);
        std::vector<int> cls(static_cast<size_t>(n));
        // round-robin base assignment keeps every class populated, then shuffle
        for (int i = 0; i < n; ++i) cls[static_cast<size_t>(i)] = i % cfg.num_classes;
        std::shuffle(cls.begin(), cls.end(), lrng);
        auto frng = rng_stream(cfg.seed, "features:" + t);
        Mat x = random_normal(n, cfg.feature_dim, 0.0, 1.0, frng);
        for (int i = 0; i < n; ++i) x.row(i) += centers.row(cls[static_cast<size_t>(i)]);
        g.features[t] = std::move(x);
        latent[t] = std::move(cls);
    }

    for (const auto& rc : cfg.relations) {
        MetaRelation r;
        r.src_type = rc.src_type;
        r.name = rc.name;
        r.dst_type = rc.dst_type;
        r.is_symmetric = true;
        auto erng = rng_stream(cfg.seed, "edges:" + rc.name);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        int ns = g.counts.at(rc.src_type), nd = g.counts.at(rc.dst_type);
        bool intra_type = rc.src_type == rc.dst_type;
        const auto& cs = latent.at(rc.src_type);
        const auto& cd = latent.at(rc.dst_type);
        for (int i = 0; i < ns; ++i) {
            // for intra-type relations sample the upper triangle only; the
            // reverse direction is materialized from is_symmetric
            for (int j = intra_type ? i + 1 : 0; j < nd; ++j) {
                double p = cs[static_cast<size_t>(i)] == cd[static_cast<size_t>(j)] ? rc.intra_prob
                                                                                    : rc.inter_prob;
                if (u(erng) < p) r.edges.push_back({i, j});
            }
        }
        g.relations.push_back(std::move(r));
    }
    materialize_symmetric(g);

    int nt = g.counts.at(g.target_type);
    g.labels = latent.at(g.target_type);
    auto mrng = rng_stream(cfg.seed, "masks");
    std::vector<int> perm(static_cast<size_t>(nt));
    for (int i = 0; i < nt; ++i) perm[static_cast<size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), mrng);
    // seed the train split with one node per class so it always covers C
    std::vector<char> taken(static_cast<size_t>(nt), 0);
    std::vector<char> class_seen(static_cast<size_t>(cfg.num_classes), 0);
    for (int i : perm) {
        int y = g.labels[static_cast<size_t>(i)];
        if (!class_seen[static_cast<size_t>(y)]) {
            class_seen[static_cast<size_t>(y)] = 1;
            g.train_idx.push_back(i);
            taken[static_cast<size_t>(i)] = 1;
        }
    }
    int want_train = std::max(cfg.num_classes, static_cast<int>(cfg.train_frac * nt));
    int want_val = static_cast<int>(cfg.val_frac * nt);
    for (int i : perm) {
        if (taken[static_cast<size_t>(i)]) continue;
        if (static_cast<int>(g.train_idx.size()) < want_train)
            g.train_idx.push_back(i);
        else if (static_cast<int>(g.val_idx.size()) < want_val)
            g.val_idx.push_back(i);
        else
            g.test_idx.push_back(i);
    }
    std::sort(g.train_idx.begin(), g.train_idx.end());
    std::sort(g.val_idx.begin(), g.val_idx.end());
    std::sort(g.test_idx.begin(), g.test_idx.end());
    g.validate();
    return g;
}

// --- adjacency --------------------------------------------------------------

// Symmetric degree normalization with self-loops added before computing
// degrees: D^{-1/2} (A + I) D^{-1/2}. Self-loops keep every degree positive,
// so isolated nodes normalize to 1 on the diagonal.
inline Mat normalize_adjacency(const Mat& a) {
    require(a.rows() == a.cols(), "normalize_adjacency: matrix not square");
    Mat m = a + Mat::Identity(a.rows(), a.cols());
    Vec d = m.rowwise().sum();
    Vec s = d.array().rsqrt();
    return s.asDiagonal() * m * s.asDiagonal();
}

// Dense per-relation adjacency, indexed (dst, src) so that Â * X_src
// aggregates into dst-type rows.
inline Mat relation_adjacency(const HeteroGraph& g, const MetaRelation& r) {
    Mat a = Mat::Zero(g.count(r.dst_type), g.count(r.src_type));
    for (const auto& [u, v] : r.edges) a(v, u) = 1.0;
    return a;
}

// Full adjacency over the concatenated node ordering (types in node_types
// order); symmetrized so each directed edge contributes both entries.
inline Mat full_adjacency(const HeteroGraph& g) {
    int n = g.total_nodes();
    Mat a = Mat::Zero(n, n);
    for (const auto& r : g.relations) {
        int so = g.type_offset(r.src_type), do_ = g.type_offset(r.dst_type);
        for (const auto& [u, v] : r.edges) {
            a(so + u, do_ + v) = 1.0;
            a(do_ + v, so + u) = 1.0;
        }
    }
    return a;
}

// Empirical edge homophily: fraction of target-relation edges whose endpoints
// share a label (target-type intra edges only).
inline double edge_homophily(const HeteroGraph& g) {
    long total = 0, same = 0;
    for (const auto& r : g.relations) {
        if (r.src_type != g.target_type || r.dst_type != g.target_type) continue;
        for (const auto& [u, v] : r.edges) {
            ++total;
            if (g.labels[static_cast<size_t>(u)] == g.labels[static_cast<size_t>(v)]) ++same;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(same) / static_cast<double>(total);
}

}  // namespace hgul
