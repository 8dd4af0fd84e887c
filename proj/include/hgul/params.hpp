#pragma once

#include "hgul/autodiff.hpp"

#include <map>
#include <string>
#include <vector>

namespace hgul {

// Named trainable matrices plus their Adam state. The creation order is the
// canonical layout for flatten()/set_flat(), so whole-model gradient checks
// see a stable parameter vector.
class ParamStore {
public:
    Mat& create(const std::string& name, Mat init) {
        require(params_.count(name) == 0, "parameter '" + name + "' already exists");
        order_.push_back(name);
        Param p;
        p.value = std::move(init);
        p.m = Mat::Zero(p.value.rows(), p.value.cols());
        p.v = Mat::Zero(p.value.rows(), p.value.cols());
        params_[name] = std::move(p);
        return params_[name].value;
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    Mat& value(const std::string& name) {
        require(has(name), "unknown parameter '" + name + "'");
        return params_.at(name).value;
    }

    const std::vector<std::string>& names() const { return order_; }

    // Bind a parameter onto the tape for one forward pass; gradients land on
    // the returned Var and are harvested by adam_step.
    ad::Var use(ad::Tape& t, const std::string& name) {
        require(has(name), "unknown parameter '" + name + "'");
        ad::Var v = t.param(params_.at(name).value);
        bound_.push_back({name, v});
        return v;
    }

    void clear_bindings() { bound_.clear(); }

    // Standard Adam (beta1=0.9, beta2=0.999, eps=1e-8) with decoupled weight
    // decay lr*wd*param. Frozen parameters are simply never bound.
    void adam_step(double lr, double wd) {
        ++step_;
        double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
        double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
        for (auto& [name, var] : bound_) {
            Param& p = params_.at(name);
            const Mat& g = var->grad;
            p.m = b1 * p.m + (1.0 - b1) * g;
            p.v = b2 * p.v + (1.0 - b2) * g.cwiseProduct(g);
            Mat mhat = p.m / c1;
            Mat vhat = p.v / c2;
            p.value.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
            if (wd > 0.0) p.value -= lr * wd * p.value;
        }
        bound_.clear();
    }

    int flat_size() const {
        int n = 0;
        for (const auto& name : order_) n += static_cast<int>(params_.at(name).value.size());
        return n;
    }

    Mat flatten() const {
        Mat x(flat_size(), 1);
        int off = 0;
        for (const auto& name : order_) {
            const Mat& v = params_.at(name).value;
            for (int i = 0; i < v.rows(); ++i)
                for (int j = 0; j < v.cols(); ++j) x(off++, 0) = v(i, j);
        }
        return x;
    }

    void set_flat(const Mat& x) {
        require(x.rows() == flat_size() && x.cols() == 1, "set_flat: size mismatch");
        int off = 0;
        for (const auto& name : order_) {
            Mat& v = params_.at(name).value;
            for (int i = 0; i < v.rows(); ++i)
                for (int j = 0; j < v.cols(); ++j) v(i, j) = x(off++, 0);
        }
    }

    // Slice one flat leaf Var into per-parameter Vars following the store
    // layout; lets check_gradients differentiate the whole model at once.
    std::map<std::string, ad::Var> bind_flat(ad::Tape& t, const ad::Var& flat) const {
        std::map<std::string, ad::Var> out;
        int off = 0;
        for (const auto& name : order_) {
            const Mat& v = params_.at(name).value;
            int len = static_cast<int>(v.size());
            out[name] = t.reshape(t.block(flat, off, 0, len, 1), static_cast<int>(v.rows()),
                                  static_cast<int>(v.cols()));
            off += len;
        }
        return out;
    }

private:
    struct Param {
        Mat value, m, v;
    };
    std::vector<std::string> order_;
    std::map<std::string, Param> params_;
    std::vector<std::pair<std::string, ad::Var>> bound_;
    long step_ = 0;
};

// Either live store bindings (training) or slices of one flat leaf
// (gradient checking); model forward code is identical for both.
class ParamBinder {
public:
    ParamBinder(ParamStore& store, ad::Tape& tape) : store_(&store), tape_(&tape) {}
    ParamBinder(std::map<std::string, ad::Var> vars) : vars_(std::move(vars)) {}

    ad::Var operator()(const std::string& name) {
        if (store_) return store_->use(*tape_, name);
        auto it = vars_.find(name);
        require(it != vars_.end(), "unbound parameter '" + name + "'");
        return it->second;
    }

private:
    ParamStore* store_ = nullptr;
    ad::Tape* tape_ = nullptr;
    std::map<std::string, ad::Var> vars_;
};

inline Mat init_linear(int fan_in, int fan_out, std::mt19937_64& rng) {
    double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return random_uniform(fan_in, fan_out, -b, b, rng);
}

}  // namespace hgul
