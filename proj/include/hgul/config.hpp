#pragma once

#include "hgul/graph.hpp"
#include "hgul/trainer.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace hgul {

// Flat key=value experiment configuration. Precedence: command-line --set
// overrides > config file > defaults. The resolved map is echoed verbatim
// into every result file so any run can be reproduced exactly.
class FlatConfig {
public:
    static FlatConfig from_file(const std::string& path) {
        FlatConfig c;
        std::ifstream in(path);
        require(in.good(), "cannot open config '" + path + "'");
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            size_t h = line.find('#');
            if (h != std::string::npos) line = line.substr(0, h);
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            size_t eq = line.find('=');
            require(eq != std::string::npos,
                    "config parse error at line " + std::to_string(lineno) + ": expected key=value");
            c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        return c;
    }

    void set(const std::string& key, const std::string& value) {
        if (values_.count(key) == 0) order_.push_back(key);
        values_[key] = value;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (...) {
            throw InvariantError("config field '" + key + "': not a number: " + it->second);
        }
    }

    long get_int(const std::string& key, long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            return std::stol(it->second);
        } catch (...) {
            throw InvariantError("config field '" + key + "': not an integer: " + it->second);
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw InvariantError("config field '" + key + "': not a boolean: " + it->second);
    }

    std::vector<std::string> get_list(const std::string& key) const {
        std::vector<std::string> out;
        auto it = values_.find(key);
        if (it == values_.end()) return out;
        std::stringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    std::vector<double> get_double_list(const std::string& key) const {
        std::vector<double> out;
        for (const auto& s : get_list(key)) out.push_back(std::stod(s));
        return out;
    }

    std::vector<int> get_int_list(const std::string& key) const {
        std::vector<int> out;
        for (const auto& s : get_list(key)) out.push_back(std::stoi(s));
        return out;
    }

    std::vector<std::string> echo_lines() const {
        std::vector<std::string> out;
        std::vector<std::string> keys = order_;
        std::sort(keys.begin(), keys.end());
        for (const auto& k : keys) out.push_back(k + "=" + values_.at(k));
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& line : echo_lines()) {
            size_t eq = line.find('=');
            j[line.substr(0, eq)] = line.substr(eq + 1);
        }
        return j;
    }

private:
    static std::string trim(const std::string& s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? "" : s.substr(a, b - a + 1);
    }

    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

inline TrainConfig train_config_from(const FlatConfig& c) {
    TrainConfig t;
    t.gamma = c.get_double("gamma", t.gamma);
    t.lr = c.get_double("lr", t.lr);
    t.wd = c.get_double("wd", t.wd);
    t.epochs = static_cast<int>(c.get_int("epochs", t.epochs));
    t.seed = static_cast<std::uint64_t>(c.get_int("seed", 0));
    t.d = static_cast<int>(c.get_int("d", t.d));
    t.knn.k = static_cast<int>(c.get_int("knn.k", t.knn.k));
    t.knn.both_sides = c.get_bool("knn.both_sides", t.knn.both_sides);
    t.knn.exclude_negative = c.get_bool("knn.exclude_negative", t.knn.exclude_negative);
    t.gumbel.tau0 = c.get_double("gumbel.tau0", t.gumbel.tau0);
    t.gumbel.tau_min = c.get_double("gumbel.tau_min", t.gumbel.tau_min);
    t.gumbel.decay = c.get_double("gumbel.decay", t.gumbel.decay);
    t.gumbel.delta = c.get_double("gumbel.delta", t.gumbel.delta);
    t.ppr.alpha = c.get_double("ppr.alpha", t.ppr.alpha);
    t.ppr.k_iter = static_cast<int>(c.get_int("ppr.k_iter", t.ppr.k_iter));
    t.ppr.tol = c.get_double("ppr.tol", t.ppr.tol);
    t.disable_knn = c.get_bool("disable_knn", false);
    t.disable_gsl = c.get_bool("disable_gsl", false);
    t.disable_affinity = c.get_bool("disable_affinity", false);
    t.freeze_type_importance = c.get_bool("freeze_type_importance", false);
    t.metric = c.get("metric", t.metric);
    t.pretrain_epochs = static_cast<int>(c.get_int("pretrain_epochs", t.pretrain_epochs));
    t.validate();
    return t;
}

// synthetic.types = paper:300,author:200
// synthetic.relations = paper:cites:paper:0.05:0.01,author:writes:paper:0.02:0.02
inline SyntheticConfig synthetic_config_from(const FlatConfig& c) {
    SyntheticConfig s;
    for (const auto& item : c.get_list("synthetic.types")) {
        size_t p = item.find(':');
        require(p != std::string::npos, "synthetic.types entries must be name:count");
        s.type_counts.push_back({item.substr(0, p), std::stoi(item.substr(p + 1))});
    }
    for (const auto& item : c.get_list("synthetic.relations")) {
        std::stringstream ss(item);
        std::string src, name, dst, intra, inter;
        require(std::getline(ss, src, ':') && std::getline(ss, name, ':') &&
                    std::getline(ss, dst, ':') && std::getline(ss, intra, ':') &&
                    std::getline(ss, inter, ':'),
                "synthetic.relations entries must be src:name:dst:intra_prob:inter_prob");
        s.relations.push_back({src, name, dst, std::stod(intra), std::stod(inter)});
    }
    s.feature_dim = static_cast<int>(c.get_int("synthetic.feature_dim", s.feature_dim));
    s.center_separation = c.get_double("synthetic.separation", s.center_separation);
    s.num_classes = static_cast<int>(c.get_int("synthetic.classes", s.num_classes));
    s.target_type = c.get("synthetic.target_type", "");
    s.train_frac = c.get_double("synthetic.train_frac", s.train_frac);
    s.val_frac = c.get_double("synthetic.val_frac", s.val_frac);
    s.seed = static_cast<std::uint64_t>(c.get_int("synthetic.seed", static_cast<long>(c.get_int("seed", 0))));
    s.validate();
    return s;
}

}  // namespace hgul
