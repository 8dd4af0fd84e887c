#pragma once

#include "hgul/affinity.hpp"
#include "hgul/hgsl.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace hgul {

struct TrainConfig {
    double gamma = 0.1;
    double lr = 5e-3;
    double wd = 0.0;
    int epochs = 100;
    std::uint64_t seed = 0;
    int d = 64;
    KnnConfig knn;
    GumbelConfig gumbel;
    PprConfig ppr{0.85, 16, 1e-9};
    bool disable_knn = false;
    bool disable_gsl = false;
    bool disable_affinity = false;
    bool freeze_type_importance = false;
    std::string metric = "accuracy";  // or "macro_f1"
    int pretrain_epochs = 200;

    void validate() const {
        require(gamma >= 0.0, "gamma must be >= 0");
        require(epochs >= 1, "epochs must be >= 1");
        require(metric == "accuracy" || metric == "macro_f1", "unknown metric '" + metric + "'");
        gumbel.validate();
        ppr.validate();
    }
};

struct EpochRecord {
    int epoch;
    double l_task, l_reg, l, tau;
    double train_metric, val_metric, test_metric;
    double seconds;
};

struct Metrics {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    double best_val = -1.0;
    double best_val_test = 0.0;
};

// accuracy: fraction of argmax matches on the masked nodes.
// macro_f1: unweighted mean of per-class F1 over all C classes; a class with
// no predictions and no true members on the mask contributes 0.
inline double evaluate(const Mat& logits, const std::vector<int>& labels,
                       const std::vector<int>& mask_idx, const std::string& metric) {
    require(!mask_idx.empty(), "evaluate: empty mask");
    int c = static_cast<int>(logits.cols());
    std::vector<int> pred(mask_idx.size());
    for (size_t i = 0; i < mask_idx.size(); ++i) {
        int best = 0;
        logits.row(mask_idx[i]).maxCoeff(&best);
        pred[i] = best;
    }
    if (metric == "accuracy") {
        int hits = 0;
        for (size_t i = 0; i < mask_idx.size(); ++i)
            if (pred[i] == labels[static_cast<size_t>(mask_idx[i])]) ++hits;
        return static_cast<double>(hits) / static_cast<double>(mask_idx.size());
    }
    require(metric == "macro_f1", "unknown metric '" + metric + "'");
    std::vector<double> tp(static_cast<size_t>(c), 0), fp(static_cast<size_t>(c), 0),
        fn(static_cast<size_t>(c), 0);
    for (size_t i = 0; i < mask_idx.size(); ++i) {
        int y = labels[static_cast<size_t>(mask_idx[i])], p = pred[i];
        if (p == y)
            tp[static_cast<size_t>(p)] += 1;
        else {
            fp[static_cast<size_t>(p)] += 1;
            fn[static_cast<size_t>(y)] += 1;
        }
    }
    double f1 = 0.0;
    for (int k = 0; k < c; ++k) {
        double denom = 2 * tp[static_cast<size_t>(k)] + fp[static_cast<size_t>(k)] + fn[static_cast<size_t>(k)];
        if (denom > 0) f1 += 2 * tp[static_cast<size_t>(k)] / denom;
    }
    return f1 / c;
}

// The full model: projection, kNN and structure-learning paths, combination
// norm, affinity-guided gating, linear readout. Construction initializes all
// parameters and (when the affinity path is on) runs the surrogate-label
// pretraining once.
class HgulModel {
public:
    HgulModel(const HeteroGraph& graph, TrainConfig cfg) : g_(&graph), cfg_(std::move(cfg)) {
        cfg_.validate();
        int d = cfg_.d;
        classes_ = g_->num_classes();
        std::map<std::string, int> raw_dims, shared_dims;
        for (const auto& t : g_->node_types) {
            raw_dims[t] = static_cast<int>(g_->features.at(t).cols());
            shared_dims[t] = d;
        }
        init_mlp_params(store_, "mlp", raw_dims, d, cfg_.seed);
        if (!cfg_.disable_knn)
            init_rgcn_params(store_, {"knn.rgcn", shared_dims, d}, g_->relations, cfg_.seed);
        if (!cfg_.disable_gsl) {
            init_rgcn_params(store_, {"hgsl.rgcn", raw_dims, d}, g_->relations, cfg_.seed);
            init_edge_logits(store_, *g_, initial_projection());
        } else {
            // ablation path mirrors the structure path exactly (raw features,
            // same encoder shape), just without the refinement step
            init_rgcn_params(store_, {"base.rgcn", raw_dims, d}, g_->relations, cfg_.seed);
        }
        init_norm_params(store_, "norm", g_->node_types, d);
        if (!cfg_.disable_affinity) {
            auto prng = rng_stream(cfg_.seed, "pretrain");
            surrogate_ = pretrain_predict(*g_, cfg_.pretrain_epochs, prng(), std::min(d, 32), cfg_.lr);
            int na = static_cast<int>(g_->node_types.size());
            type_importance_ = Mat::Ones(na, na);
            if (!cfg_.freeze_type_importance) store_.create("aff.R", type_importance_);
            auto grng = rng_stream(cfg_.seed, "gate");
            store_.create("gate.w", init_linear(2 * d, d, grng));
            store_.create("gate.b", Mat::Zero(1, d));
            a_full_ = full_adjacency(*g_);
            type_ind_ = type_indicator(*g_);
        }
        auto orng = rng_stream(cfg_.seed, "readout");
        store_.create("out.w", init_linear(d, classes_, orng));
        store_.create("out.b", Mat::Zero(1, classes_));
        for (const auto& r : g_->relations) orig_adj_[r.name] = relation_adjacency(*g_, r);
        train_mask_ = g_->mask_vector(g_->train_idx);
    }

    struct Forward {
        ad::Var loss, l_task, l_reg, logits;
        std::map<std::string, Mat> refined_weights;  // structure path internals
        std::map<std::string, Mat> kept_mask;
    };

    Forward forward(ad::Tape& t, ParamBinder& bind, double tau, bool sample_noise,
                    std::uint64_t noise_seed, bool soft_ste = false) {
        VarMap projected = project_features(t, *g_, bind, "mlp");

        VarMap h_struct;
        ad::Var l_reg = t.constant(Mat::Zero(1, 1));
        Forward out;
        if (!cfg_.disable_gsl) {
            RefineResult rr = refine_and_encode(t, *g_, bind, cfg_.gumbel, tau, noise_seed,
                                                sample_noise, soft_ste, "hgsl.rgcn");
            h_struct = rr.representations;
            l_reg = rr.l_reg;
            out.refined_weights = std::move(rr.refined);
            out.kept_mask = std::move(rr.mask);
        } else {
            std::map<std::string, ad::Var> adj;
            for (const auto& r : g_->relations)
                adj[r.name] = normalize_relation(t, t.constant(orig_adj_.at(r.name)),
                                                 r.src_type == r.dst_type);
            VarMap raw;
            for (const auto& type : g_->node_types) raw[type] = t.constant(g_->features.at(type));
            h_struct = rgcn_forward(t, raw, adj, g_->relations, bind, "base.rgcn");
        }

        VarMap combined;
        if (!cfg_.disable_knn) {
            VarMap h_knn = knn_encode(t, *g_, projected, cfg_.knn, bind, "knn.rgcn");
            for (const auto& type : g_->node_types)
                combined[type] = graph_norm(t, t.add(h_struct.at(type), h_knn.at(type)), bind,
                                            "norm", type);
        } else {
            for (const auto& type : g_->node_types)
                combined[type] = graph_norm(t, h_struct.at(type), bind, "norm", type);
        }

        ad::Var h_t = combined.at(g_->target_type);
        if (!cfg_.disable_affinity) {
            ad::Var r = cfg_.freeze_type_importance ? t.constant(type_importance_)
                                                    : bind("aff.R");
            ad::Var a_bar = reweight_adjacency(t, a_full_, type_ind_, r);
            ad::Var b = ad::ppr_kernel(t, ad::normalize_adjacency(t, a_bar), cfg_.ppr.alpha,
                                       cfg_.ppr.k_iter, cfg_.ppr.tol);
            int off = g_->type_offset(g_->target_type), nt = g_->count(g_->target_type);
            ad::Var b_t = t.block(b, off, off, nt, nt);
            ad::Var y_hat = t.constant(surrogate_.y);
            ad::Var c_cls = t.matmul(t.matmul(t.transpose(y_hat), b_t), y_hat);
            ad::Var h_aff = affinity_features(t, c_cls, surrogate_.y, h_t);
            h_t = gate_fuse(t, h_t, h_aff, bind("gate.w"), bind("gate.b"));
        }

        out.logits = t.add_rowvec(t.matmul(h_t, bind("out.w")), bind("out.b"));
        out.l_task = t.cross_entropy(out.logits, g_->labels, train_mask_);
        out.l_reg = l_reg;
        out.loss = t.add(out.l_task, t.scale(l_reg, cfg_.gamma));
        return out;
    }

    // One full training run with per-epoch evaluation under disabled noise
    // and best-validation model selection.
    Metrics train(std::function<void(int, const Forward&)> step_hook = nullptr) {
        Metrics m;
        for (int e = 0; e < cfg_.epochs; ++e) {
            auto t0 = std::chrono::steady_clock::now();
            double tau = cfg_.gumbel.tau_at(e);
            std::uint64_t noise_seed = rng_stream(cfg_.seed, "noise:" + std::to_string(e))();
            EpochRecord rec;
            {
                ad::Tape t;
                ParamBinder bind(store_, t);
                Forward f = forward(t, bind, tau, /*sample_noise=*/true, noise_seed);
                rec.l_task = f.l_task->value(0, 0);
                rec.l_reg = f.l_reg->value(0, 0);
                rec.l = f.loss->value(0, 0);
                if (!std::isfinite(rec.l))
                    throw InvariantError("training diverged at epoch " + std::to_string(e));
                if (step_hook) step_hook(e, f);
                t.backward(f.loss);
                store_.adam_step(cfg_.lr, cfg_.wd);
            }
            {
                ad::Tape t;
                ParamBinder bind(store_, t);
                Forward f = forward(t, bind, tau, /*sample_noise=*/false, 0);
                store_.clear_bindings();
                const Mat& logits = f.logits->value;
                rec.train_metric = evaluate(logits, g_->labels, g_->train_idx, cfg_.metric);
                rec.val_metric = g_->val_idx.empty()
                                     ? rec.train_metric
                                     : evaluate(logits, g_->labels, g_->val_idx, cfg_.metric);
                rec.test_metric = g_->test_idx.empty()
                                      ? rec.train_metric
                                      : evaluate(logits, g_->labels, g_->test_idx, cfg_.metric);
            }
            rec.epoch = e;
            rec.tau = tau;
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (rec.val_metric > m.best_val) {
                m.best_val = rec.val_metric;
                m.best_epoch = e;
                m.best_val_test = rec.test_metric;
            }
            m.epochs.push_back(rec);
        }
        return m;
    }

    ParamStore& params() { return store_; }
    const TrainConfig& config() const { return cfg_; }
    const SurrogateLabels& surrogate() const { return surrogate_; }

private:
    // Projection under freshly initialized weights; seeds the edge logits.
    std::map<std::string, Mat> initial_projection() {
        ad::Tape t;
        ParamBinder bind(store_, t);
        VarMap proj = project_features(t, *g_, bind, "mlp");
        store_.clear_bindings();
        std::map<std::string, Mat> out;
        for (const auto& [type, v] : proj) out[type] = v->value;
        return out;
    }

    const HeteroGraph* g_;
    TrainConfig cfg_;
    ParamStore store_;
    SurrogateLabels surrogate_;
    Mat type_importance_, a_full_, type_ind_;
    std::map<std::string, Mat> orig_adj_;
    std::vector<char> train_mask_;
    int classes_ = 0;
};

inline double total_loss(double l_task, double l_reg, double gamma) {
    return l_task + gamma * l_reg;
}

// --- result files -----------------------------------------------------------

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline void write_epoch_csv_body(const Metrics& m, std::ostream& out) {
    out << "epoch,l_task,l_reg,l,tau,train_metric,val_metric,test_metric\n";
    for (const auto& r : m.epochs)
        out << r.epoch << ',' << fmt_double(r.l_task) << ',' << fmt_double(r.l_reg) << ','
            << fmt_double(r.l) << ',' << fmt_double(r.tau) << ',' << fmt_double(r.train_metric)
            << ',' << fmt_double(r.val_metric) << ',' << fmt_double(r.test_metric) << '\n';
}

inline void write_epoch_csv(const Metrics& m, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot open '" + path + "' for writing");
    write_epoch_csv_body(m, out);
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
    return {{"gamma", c.gamma},
            {"lr", c.lr},
            {"wd", c.wd},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"d", c.d},
            {"knn", {{"k", c.knn.k}, {"both_sides", c.knn.both_sides},
                     {"exclude_negative", c.knn.exclude_negative}}},
            {"gumbel", {{"tau0", c.gumbel.tau0}, {"tau_min", c.gumbel.tau_min},
                        {"decay", c.gumbel.decay}, {"delta", c.gumbel.delta}}},
            {"ppr", {{"alpha", c.ppr.alpha}, {"k_iter", c.ppr.k_iter}, {"tol", c.ppr.tol}}},
            {"disable_knn", c.disable_knn},
            {"disable_gsl", c.disable_gsl},
            {"disable_affinity", c.disable_affinity},
            {"freeze_type_importance", c.freeze_type_importance},
            {"metric", c.metric},
            {"pretrain_epochs", c.pretrain_epochs}};
}

inline void write_summary_json(const TrainConfig& cfg, const Metrics& m, const std::string& path) {
    nlohmann::json j;
    j["config"] = config_to_json(cfg);
    j["best_epoch"] = m.best_epoch;
    j["best_val_metric"] = m.best_val;
    j["test_metric_at_best_val"] = m.best_val_test;
    double total = 0.0;
    for (const auto& r : m.epochs) total += r.seconds;
    j["wall_clock_s"] = total;
    std::ofstream out(path);
    require(out.good(), "cannot open '" + path + "' for writing");
    out << j.dump(1) << "\n";
}

}  // namespace hgul
