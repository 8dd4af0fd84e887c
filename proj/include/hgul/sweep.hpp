#pragma once

#include "hgul/perturb.hpp"
#include "hgul/trainer.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace hgul {

inline int worker_count() {
    if (const char* env = std::getenv("HGUL_WORKERS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Run `cells` independent jobs on a bounded pool; results land in a
// preallocated slot per cell, so the merge order is deterministic.
template <class F>
void parallel_cells(int cells, F&& job) {
    int workers = std::min(worker_count(), std::max(cells, 1));
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < cells; i = next.fetch_add(1)) job(i);
        });
    for (auto& th : pool) th.join();
}

struct NamedConfig {
    std::string name;
    TrainConfig config;
};

struct SweepRow {
    double rate;
    std::string model;
    double mean, stddev;
    int repeats;
};

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
}

// For each (rate, model, repeat): perturb with a fresh seed, train, record
// the test metric at best validation; one row of mean +/- std per
// (rate, model). rate 0 reuses the clean graph, so it reduces to plain
// training with the same seeds.
inline std::vector<SweepRow> robustness_sweep(const HeteroGraph& g,
                                              const std::vector<double>& rates,
                                              const std::vector<NamedConfig>& models,
                                              int repeats, double removal_fraction = 0.5) {
    require(std::is_sorted(rates.begin(), rates.end()), "rates must be sorted ascending");
    require(repeats >= 1, "repeats must be >= 1");
    struct Cell {
        int rate_i, model_i, repeat;
        double metric;
    };
    std::vector<Cell> cells;
    for (size_t ri = 0; ri < rates.size(); ++ri)
        for (size_t mi = 0; mi < models.size(); ++mi)
            for (int rep = 0; rep < repeats; ++rep)
                cells.push_back({static_cast<int>(ri), static_cast<int>(mi), rep, 0.0});

    parallel_cells(static_cast<int>(cells.size()), [&](int i) {
        Cell& c = cells[static_cast<size_t>(i)];
        TrainConfig cfg = models[static_cast<size_t>(c.model_i)].config;
        cfg.seed = cfg.seed + static_cast<std::uint64_t>(c.repeat);
        const HeteroGraph* graph = &g;
        HeteroGraph perturbed;
        double rate = rates[static_cast<size_t>(c.rate_i)];
        if (rate > 0.0) {
            PerturbConfig pc;
            pc.rate = rate;
            pc.removal_fraction = removal_fraction;
            pc.seed = rng_stream(cfg.seed, "sweep-perturb:" + std::to_string(c.rate_i))();
            perturbed = perturb_graph(g, pc).graph;
            graph = &perturbed;
        }
        HgulModel model(*graph, cfg);
        c.metric = model.train().best_val_test;
    });

    std::vector<SweepRow> rows;
    for (size_t ri = 0; ri < rates.size(); ++ri)
        for (size_t mi = 0; mi < models.size(); ++mi) {
            std::vector<double> xs;
            for (const auto& c : cells)
                if (c.rate_i == static_cast<int>(ri) && c.model_i == static_cast<int>(mi))
                    xs.push_back(c.metric);
            auto [mean, sd] = mean_std(xs);
            rows.push_back({rates[ri], models[mi].name, mean, sd, repeats});
        }
    return rows;
}

inline void write_sweep_csv_body(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << "rate,model,mean,std,repeats\n";
    for (const auto& r : rows)
        out << fmt_double(r.rate) << ',' << r.model << ',' << fmt_double(r.mean) << ','
            << fmt_double(r.stddev) << ',' << r.repeats << '\n';
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot open '" + path + "' for writing");
    write_sweep_csv_body(rows, out);
}

struct SensitivityRow {
    int k;
    double delta, gamma;
    double mean, stddev;
    int repeats;
};

// Cartesian grid over (k, delta, gamma); each cell averages `repeats` seeded
// runs on the same graph.
inline std::vector<SensitivityRow> sensitivity_sweep(const HeteroGraph& g,
                                                     const TrainConfig& base,
                                                     const std::vector<int>& ks,
                                                     const std::vector<double>& deltas,
                                                     const std::vector<double>& gammas,
                                                     int repeats) {
    struct Cell {
        int idx, repeat;
        double metric;
    };
    int grid = static_cast<int>(ks.size() * deltas.size() * gammas.size());
    std::vector<Cell> cells;
    for (int i = 0; i < grid; ++i)
        for (int rep = 0; rep < repeats; ++rep) cells.push_back({i, rep, 0.0});

    auto decode = [&](int idx) {
        int gi = idx % static_cast<int>(gammas.size());
        int di = (idx / static_cast<int>(gammas.size())) % static_cast<int>(deltas.size());
        int ki = idx / static_cast<int>(gammas.size() * deltas.size());
        return std::tuple<int, double, double>(ks[static_cast<size_t>(ki)],
                                               deltas[static_cast<size_t>(di)],
                                               gammas[static_cast<size_t>(gi)]);
    };

    parallel_cells(static_cast<int>(cells.size()), [&](int i) {
        Cell& c = cells[static_cast<size_t>(i)];
        auto [k, delta, gamma] = decode(c.idx);
        TrainConfig cfg = base;
        cfg.knn.k = k;
        cfg.gumbel.delta = delta;
        cfg.gamma = gamma;
        cfg.seed = base.seed + static_cast<std::uint64_t>(c.repeat);
        HgulModel model(g, cfg);
        c.metric = model.train().best_val_test;
    });

    std::vector<SensitivityRow> rows;
    for (int i = 0; i < grid; ++i) {
        auto [k, delta, gamma] = decode(i);
        std::vector<double> xs;
        for (const auto& c : cells)
            if (c.idx == i) xs.push_back(c.metric);
        auto [mean, sd] = mean_std(xs);
        rows.push_back({k, delta, gamma, mean, sd, repeats});
    }
    return rows;
}

inline void write_sensitivity_csv_body(const std::vector<SensitivityRow>& rows,
                                       std::ostream& out) {
    out << "k,delta,gamma,mean,std,repeats\n";
    for (const auto& r : rows)
        out << r.k << ',' << fmt_double(r.delta) << ',' << fmt_double(r.gamma) << ','
            << fmt_double(r.mean) << ',' << fmt_double(r.stddev) << ',' << r.repeats << '\n';
}

inline void write_sensitivity_csv(const std::vector<SensitivityRow>& rows,
                                  const std::string& path) {
    std::ofstream out(path);
    require(out.good(), "cannot open '" + path + "' for writing");
    write_sensitivity_csv_body(rows, out);
}

}  // namespace hgul
