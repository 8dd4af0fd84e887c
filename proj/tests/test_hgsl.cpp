#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <hgul/hgsl.hpp>

using namespace hgul;
using ad::Tape;
using ad::Var;

namespace {

HeteroGraph tiny_graph(std::uint64_t seed) {
    SyntheticConfig sc;
    sc.type_counts = {{"a", 8}};
    sc.relations = {{"a", "e", "a", 0.5, 0.2}};
    sc.feature_dim = 3;
    sc.num_classes = 2;
    sc.seed = seed;
    return generate_synthetic(sc);
}

ParamStore make_store(const HeteroGraph& g, int d, std::uint64_t seed) {
    ParamStore store;
    std::map<std::string, int> raw_dims;
    for (const auto& t : g.node_types)
        raw_dims[t] = static_cast<int>(g.features.at(t).cols());
    init_rgcn_params(store, {"hgsl.rgcn", raw_dims, d}, g.relations, seed);
    std::map<std::string, Mat> projected;
    for (const auto& t : g.node_types) projected[t] = g.features.at(t);
    init_edge_logits(store, g, projected);
    return store;
}

}  // namespace

TEST_CASE("temperature annealing schedule") {
    GumbelConfig cfg;
    CHECK(cfg.tau_at(0) == doctest::Approx(1.0));
    CHECK(cfg.tau_at(1) == doctest::Approx(0.98));
    CHECK(cfg.tau_at(10) == doctest::Approx(std::pow(0.98, 10)));
    CHECK(cfg.tau_at(1000) == doctest::Approx(0.1));  // floor
    for (int e = 0; e < 300; ++e) CHECK(cfg.tau_at(e + 1) <= cfg.tau_at(e) + 1e-15);
    GumbelConfig bad;
    bad.delta = 1.5;
    CHECK_THROWS_AS(bad.validate(), InvariantError);
    bad = GumbelConfig{};
    bad.tau_min = 2.0;
    CHECK_THROWS_AS(bad.validate(), InvariantError);
}

TEST_CASE("edge logits initialize to endpoint cosine similarity") {
    HeteroGraph g = tiny_graph(1);
    ParamStore store = make_store(g, 4, 2);
    const auto& r = g.relations[0];
    Mat logits = store.value("hgsl.logits.e");
    REQUIRE(logits.rows() == static_cast<int>(r.edges.size()));
    const Mat& x = g.features.at("a");
    for (size_t e = 0; e < r.edges.size(); ++e) {
        auto u = x.row(r.edges[e].first);
        auto v = x.row(r.edges[e].second);
        double want = u.dot(v) / (u.norm() * v.norm() + 1e-12);
        CHECK(logits(static_cast<int>(e), 0) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("noise-free sample at tau=1 reduces to sigmoid(pi)") {
    Tape t;
    Mat pi0(3, 1);
    pi0 << 0.2, 0.5, 0.9;
    Var pi = t.constant(pi0);
    Mat y = gumbel_sample(t, pi, 1.0, Mat::Zero(3, 1))->value;
    for (int i = 0; i < 3; ++i)
        CHECK(y(i, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-pi0(i, 0)))).epsilon(1e-12));
}

TEST_CASE("sample mean matches the Monte-Carlo oracle at pi=0.5, tau=1") {
    const int n = 100000;
    auto rng = rng_stream(99, "mc");
    Mat noise = sample_gumbel_noise(n, rng);
    Tape t;
    Var pi = t.constant(Mat::Constant(n, 1, 0.5));
    Mat y = gumbel_sample(t, pi, 1.0, noise)->value;
    double mean = y.mean();
    // independent oracle with a different stream
    auto rng2 = rng_stream(7, "mc-oracle");
    Mat noise2 = sample_gumbel_noise(n, rng2);
    double oracle = 0.0, oracle_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double v = 1.0 / (1.0 + std::exp(-(0.5 + noise2(i, 0))));
        oracle += v;
        oracle_sq += v * v;
    }
    oracle /= n;
    double var = oracle_sq / n - oracle * oracle;
    double se = std::sqrt(var / n) * std::sqrt(2.0);  // both estimates carry noise
    CHECK(std::abs(mean - oracle) < 3.0 * se + 1e-12);
}

TEST_CASE("low temperature concentrates samples at the extremes") {
    const int n = 20000;
    auto rng = rng_stream(11, "conc");
    Mat noise = sample_gumbel_noise(n, rng);
    Tape t;
    Var pi = t.constant(Mat::Constant(n, 1, 0.5));
    auto near_frac = [&](double tau) {
        Mat y = gumbel_sample(t, pi, tau, noise)->value;
        int near = 0;
        for (int i = 0; i < n; ++i)
            if (y(i, 0) < 0.01 || y(i, 0) > 0.99) ++near;
        return static_cast<double>(near) / n;
    };
    // the noise density puts ~3% of its mass in the transition band at
    // tau = 0.01, so concentration is checked at two temperatures
    CHECK(near_frac(0.01) > 0.95);
    CHECK(near_frac(0.001) > 0.99);
    CHECK(near_frac(0.001) > near_frac(0.01));
}

TEST_CASE("straight-through estimator passes gradients unchanged") {
    Tape t;
    Var y = t.param(Mat::Constant(4, 1, 0.3));
    Var z = t.hard_threshold_ste(y, 0.5, false);
    t.backward(t.sum(z));
    CHECK((y->grad.array() - 1.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("delta boundary cases: keep-all and drop-all") {
    HeteroGraph g = tiny_graph(3);
    ParamStore store = make_store(g, 4, 4);
    Mat logits = store.value("hgsl.logits.e");
    GumbelConfig cfg;

    SUBCASE("delta = 0 keeps every edge and zeroes the penalty") {
        cfg.delta = 0.0;
        Tape t;
        ParamBinder bind(store, t);
        auto res = refine_and_encode(t, g, bind, cfg, 1.0, 0, false, false, "hgsl.rgcn");
        CHECK(res.l_reg->value(0, 0) == 0.0);
        CHECK((res.mask.at("e").array() - 1.0).abs().maxCoeff() == 0.0);
        CHECK((res.refined.at("e").array() - 1.0).abs().maxCoeff() == 0.0);
    }
    SUBCASE("delta = 1 drops every edge; penalty counts the dropped edges") {
        cfg.delta = 1.0;
        Tape t;
        ParamBinder bind(store, t);
        auto res = refine_and_encode(t, g, bind, cfg, 1.0, 0, false, false, "hgsl.rgcn");
        CHECK(res.mask.at("e").cwiseAbs().maxCoeff() == 0.0);
        CHECK(res.l_reg->value(0, 0) ==
              doctest::Approx(static_cast<double>(logits.rows())).epsilon(1e-12));
        // encoding equals the self-loop-only relational pass
        Tape t2;
        ParamBinder bind2(store, t2);
        std::map<std::string, Var> adj{
            {"e", normalize_relation(t2, t2.constant(Mat::Zero(8, 8)), true)}};
        VarMap raw{{"a", t2.constant(g.features.at("a"))}};
        Mat want = rgcn_forward(t2, raw, adj, g.relations, bind2, "hgsl.rgcn").at("a")->value;
        CHECK((res.representations.at("a")->value - want).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("support of the refined graph never leaves the original support") {
    HeteroGraph g = tiny_graph(5);
    ParamStore store = make_store(g, 4, 6);
    GumbelConfig cfg;
    for (std::uint64_t step = 0; step < 50; ++step) {
        Tape t;
        ParamBinder bind(store, t);
        auto res = refine_and_encode(t, g, bind, cfg, cfg.tau_at(static_cast<int>(step)),
                                     1000 + step, true, false, "hgsl.rgcn");
        // refined weights live on the original edge list by construction;
        // every kept entry must sit on an original edge and be 0/1-masked
        const Mat& mask = res.mask.at("e");
        const Mat& w = res.refined.at("e");
        for (int i = 0; i < mask.rows(); ++i) {
            CHECK((mask(i, 0) == 0.0 || mask(i, 0) == 1.0));
            if (mask(i, 0) == 0.0) CHECK(w(i, 0) == 0.0);
        }
    }
}

TEST_CASE("raising delta on frozen samples only drops edges") {
    HeteroGraph g = tiny_graph(7);
    ParamStore store = make_store(g, 4, 8);
    std::vector<double> deltas = {0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<Mat> masks;
    for (double d : deltas) {
        GumbelConfig cfg;
        cfg.delta = d;
        Tape t;
        ParamBinder bind(store, t);
        auto res = refine_and_encode(t, g, bind, cfg, 1.0, 77, true, false, "hgsl.rgcn");
        masks.push_back(res.mask.at("e"));
    }
    for (size_t i = 1; i < masks.size(); ++i)
        for (int e = 0; e < masks[i].rows(); ++e)
            CHECK(masks[i](e, 0) <= masks[i - 1](e, 0));  // kept set shrinks with delta
}

TEST_CASE("refine_and_encode equals composing the stage oracles") {
    HeteroGraph g = tiny_graph(9);
    ParamStore store = make_store(g, 4, 10);
    GumbelConfig cfg;
    std::uint64_t noise_seed = 4242;

    Tape t;
    ParamBinder bind(store, t);
    auto res = refine_and_encode(t, g, bind, cfg, 0.7, noise_seed, true, false, "hgsl.rgcn");

    // oracle composition with plain matrix code
    const auto& r = g.relations[0];
    int m = static_cast<int>(r.edges.size());
    Mat logits = store.value("hgsl.logits.e");
    auto rng = rng_stream(noise_seed, "gumbel:e");
    Mat noise = sample_gumbel_noise(m, rng);
    Mat pi = (1.0 + (-logits.array()).exp()).inverse().matrix();
    Mat y = (1.0 + (-(pi + noise).array() / 0.7).exp()).inverse().matrix();
    Mat z = (y.array() > cfg.delta).cast<double>().matrix();
    Mat w = z;  // kept edges keep their original unit weight
    double lreg = (z.array() - 1.0).matrix().squaredNorm();
    CHECK(res.l_reg->value(0, 0) == doctest::Approx(lreg).epsilon(1e-12));
    CHECK((res.refined.at("e") - w).cwiseAbs().maxCoeff() < 1e-14);

    Mat a = Mat::Zero(8, 8);
    for (int e = 0; e < m; ++e) a(r.edges[static_cast<size_t>(e)].second,
                                  r.edges[static_cast<size_t>(e)].first) += w(e, 0);
    Mat ah = normalize_adjacency(a);
    Mat want = g.features.at("a") * store.value("hgsl.rgcn.self.a") +
               ah * g.features.at("a") * store.value("hgsl.rgcn.rel.e");
    want.rowwise() += store.value("hgsl.rgcn.bias.a").row(0);
    CHECK((res.representations.at("a")->value - want).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("relation with no edges contributes self-loops only, no error") {
    HeteroGraph g = tiny_graph(11);
    MetaRelation empty;
    empty.src_type = empty.dst_type = "a";
    empty.name = "void";
    g.relations.push_back(empty);
    ParamStore store = make_store(g, 4, 12);
    GumbelConfig cfg;
    Tape t;
    ParamBinder bind(store, t);
    CHECK_NOTHROW(refine_and_encode(t, g, bind, cfg, 1.0, 0, true, false, "hgsl.rgcn"));
}
