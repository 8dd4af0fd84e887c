#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <hgul/affinity.hpp>
#include <hgul/gradcheck.hpp>

using namespace hgul;
using ad::Tape;
using ad::Var;

namespace {

Mat random_sym_adj(int n, double p, std::uint64_t seed) {
    auto rng = rng_stream(seed, "adj");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Mat a = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (u(rng) < p) a(i, j) = a(j, i) = 1.0;
    return a;
}

HeteroGraph two_type_graph(std::uint64_t seed) {
    SyntheticConfig sc;
    sc.type_counts = {{"a", 12}, {"b", 8}};
    sc.relations = {{"a", "aa", "a", 0.3, 0.1}, {"a", "ab", "b", 0.3, 0.1}};
    sc.feature_dim = 4;
    sc.num_classes = 3;
    sc.target_type = "a";
    sc.seed = seed;
    return generate_synthetic(sc);
}

}  // namespace

TEST_CASE("truncated kernel matches the dense resolvent under the series bound") {
    PprConfig cfg;
    cfg.alpha = 0.85;
    cfg.k_iter = 120;
    double series_bound = std::pow(cfg.alpha, cfg.k_iter + 1) / (1.0 - cfg.alpha);
    for (std::uint64_t s = 0; s < 50; ++s) {
        auto rng = rng_stream(s, "size");
        int n = 5 + static_cast<int>(rng() % 46);
        Mat ah = normalize_adjacency(random_sym_adj(n, 0.2, 1000 + s));
        Mat b = ppr_kernel(ah, cfg);
        Mat exact = (Mat::Identity(n, n) - cfg.alpha * ah).inverse();
        double err = (b - exact).cwiseAbs().maxCoeff();
        CHECK(err < 1e-6);
        // isolated nodes attain the bound exactly; allow rounding headroom
        CHECK(err <= series_bound * (1.0 + 1e-6));
    }
}

TEST_CASE("early stop respects the tolerance") {
    Mat ah = normalize_adjacency(random_sym_adj(20, 0.2, 5));
    PprConfig full{0.85, 400, 0.0};
    PprConfig stopped{0.85, 400, 1e-10};
    Mat exact = (Mat::Identity(20, 20) - 0.85 * ah).inverse();
    CHECK((ppr_kernel(ah, stopped) - exact).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((ppr_kernel(ah, full) - ppr_kernel(ah, stopped)).cwiseAbs().maxCoeff() < 1e-8);
    PprConfig bad{1.0, 10, 0.0};
    CHECK_THROWS_AS(ppr_kernel(ah, bad), InvariantError);
}

TEST_CASE("alpha = 0 collapses the class affinity to the class counts") {
    HeteroGraph g = two_type_graph(2);
    Mat ah = normalize_adjacency(random_sym_adj(12, 0.3, 3));
    Mat y = one_hot(g.labels, g.num_classes());
    PprConfig cfg;
    cfg.alpha = 0.0;
    Mat c = extended_affinity(ah, y, cfg).c_cls;
    std::vector<int> counts(static_cast<size_t>(g.num_classes()), 0);
    for (int l : g.labels) counts[static_cast<size_t>(l)]++;
    for (int i = 0; i < c.rows(); ++i)
        for (int j = 0; j < c.cols(); ++j)
            CHECK(c(i, j) == doctest::Approx(i == j ? counts[static_cast<size_t>(i)] : 0.0)
                                 .epsilon(1e-14));
}

TEST_CASE("extended affinity matches a brute-force fold") {
    Mat ah = normalize_adjacency(random_sym_adj(15, 0.25, 9));
    auto rng = rng_stream(10, "y");
    Mat y = random_uniform(15, 3, 0.0, 1.0, rng);
    PprConfig cfg{0.7, 200, 0.0};
    Mat want = y.transpose() * (Mat::Identity(15, 15) - 0.7 * ah).inverse() * y;
    CHECK((extended_affinity(ah, y, cfg).c_cls - want).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("single-type graph with unit importance reduces to the extended affinity") {
    SyntheticConfig sc;
    sc.type_counts = {{"a", 14}};
    sc.relations = {{"a", "aa", "a", 0.3, 0.15}};
    sc.feature_dim = 4;
    sc.num_classes = 3;
    sc.seed = 21;
    HeteroGraph g = generate_synthetic(sc);
    Mat y = one_hot(g.labels, 3);
    PprConfig cfg{0.85, 150, 0.0};
    Mat r = Mat::Ones(1, 1);
    Mat via_hetero = hetero_affinity(g, r, y, cfg).c_cls;
    Mat via_extended = extended_affinity(normalize_adjacency(full_adjacency(g)), y, cfg).c_cls;
    CHECK((via_hetero - via_extended).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("type reweighting scales blocks by the type-pair importance") {
    HeteroGraph g = two_type_graph(4);
    Mat r(2, 2);
    r << 2.0, 0.5,
         0.5, 3.0;
    Mat full = full_adjacency(g);
    Mat rw = reweight_adjacency(g, r);
    int na = 12;
    for (int i = 0; i < full.rows(); ++i)
        for (int j = 0; j < full.cols(); ++j) {
            double scale = r(i < na ? 0 : 1, j < na ? 0 : 1);
            CHECK(rw(i, j) == doctest::Approx(full(i, j) * scale).epsilon(1e-14));
        }
    // support never grows
    for (int i = 0; i < full.rows(); ++i)
        for (int j = 0; j < full.cols(); ++j)
            if (full(i, j) == 0.0) CHECK(rw(i, j) == 0.0);
}

TEST_CASE("reweighting on the tape matches the plain version and gradient-checks") {
    HeteroGraph g = two_type_graph(6);
    Mat r0(2, 2);
    r0 << 1.3, 0.4,
          0.4, 0.9;
    Mat full = full_adjacency(g);
    Mat tind = type_indicator(g);
    Tape t;
    Var r = t.param(r0);
    Mat got = reweight_adjacency(t, full, tind, r)->value;
    CHECK((got - reweight_adjacency(g, r0)).cwiseAbs().maxCoeff() < 1e-14);

    auto crng = rng_stream(31, "c");
    Mat coeff = random_uniform(static_cast<int>(full.rows()), static_cast<int>(full.cols()),
                               -1.0, 1.0, crng);
    CHECK(ad::check_gradients(
              [&](Tape& tt, Var rr) {
                  return tt.sum(tt.hadamard(reweight_adjacency(tt, full, tind, rr),
                                            tt.constant(coeff)));
              },
              r0) < 1e-6);
}

TEST_CASE("affinity operator with identity affinity averages within classes") {
    std::vector<int> labels = {0, 1, 0, 1, 0};
    Mat y = one_hot(labels, 2);
    Mat a = affinity_operator(Mat::Identity(2, 2), y);
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            double want = labels[static_cast<size_t>(i)] == labels[static_cast<size_t>(j)]
                              ? 1.0 / (labels[static_cast<size_t>(i)] == 0 ? 3.0 : 2.0)
                              : 0.0;
            CHECK(a(i, j) == doctest::Approx(want).epsilon(1e-14));
        }
        CHECK(a.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    auto xrng = rng_stream(1, "x");
    Mat x = random_uniform(5, 3, -1.0, 1.0, xrng);
    Mat h = affinity_features(Mat::Identity(2, 2), y, x);
    Mat class0 = (x.row(0) + x.row(2) + x.row(4)) / 3.0;
    CHECK((h.row(0) - class0).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((h.row(0) - h.row(2)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("tape affinity features agree with the plain path") {
    auto rng = rng_stream(12, "aff");
    Mat yh = random_uniform(7, 3, 0.0, 1.0, rng);
    for (int i = 0; i < 7; ++i) yh.row(i) /= yh.row(i).sum();
    Mat c = random_uniform(3, 3, 0.0, 1.0, rng);
    Mat x = random_uniform(7, 4, -1.0, 1.0, rng);
    Tape t;
    Mat got = affinity_features(t, t.constant(c), yh, t.constant(x))->value;
    Mat want = affinity_features(c, yh, x);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gate saturates to either input at extreme bias") {
    auto rng = rng_stream(14, "gate");
    Mat h0 = random_uniform(5, 3, -1.0, 1.0, rng);
    Mat ha0 = random_uniform(5, 3, -1.0, 1.0, rng);
    Mat w = Mat::Zero(6, 3);
    auto run = [&](double bias) {
        Tape t;
        return gate_fuse(t, t.constant(h0), t.constant(ha0), t.constant(w),
                         t.constant(Mat::Constant(1, 3, bias)))->value;
    };
    CHECK((run(-50.0) - h0).cwiseAbs().maxCoeff() < 1e-12);   // g -> 0 keeps h
    CHECK((run(50.0) - ha0).cwiseAbs().maxCoeff() < 1e-12);   // g -> 1 takes h_aff
    // interior gate stays a per-entry convex combination
    Mat mid = run(0.0);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 3; ++j) {
            double lo = std::min(h0(i, j), ha0(i, j)), hi = std::max(h0(i, j), ha0(i, j));
            CHECK(mid(i, j) >= lo - 1e-12);
            CHECK(mid(i, j) <= hi + 1e-12);
        }
}

TEST_CASE("gate gradients flow to both branches and the gate weights") {
    auto rng = rng_stream(15, "gateg");
    Mat h0 = random_uniform(4, 2, -1.0, 1.0, rng);
    Mat ha0 = random_uniform(4, 2, -1.0, 1.0, rng);
    Mat w0 = random_uniform(4, 2, -0.5, 0.5, rng);
    CHECK(ad::check_gradients(
              [&](Tape& t, Var w) {
                  return t.sum(gate_fuse(t, t.constant(h0), t.constant(ha0), w,
                                         t.constant(Mat::Zero(1, 2))));
              },
              w0) < 1e-6);
    CHECK(ad::check_gradients(
              [&](Tape& t, Var h) {
                  return t.sum(gate_fuse(t, h, t.constant(ha0), t.constant(w0),
                                         t.constant(Mat::Zero(1, 2))));
              },
              h0) < 1e-6);
}

TEST_CASE("pretrained surrogate labels are row-stochastic with exact train rows") {
    HeteroGraph g = two_type_graph(8);
    SurrogateLabels s = pretrain_predict(g, 60, 17);
    REQUIRE(s.y.rows() == 12);
    REQUIRE(s.y.cols() == 3);
    for (int i = 0; i < s.y.rows(); ++i) {
        CHECK(s.y.row(i).minCoeff() >= 0.0);
        CHECK(s.y.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (int i : g.train_idx) {
        CHECK(s.y(i, g.labels[static_cast<size_t>(i)]) == 1.0);
        CHECK(s.y.row(i).sum() == 1.0);
    }
    // determinism in the seed
    SurrogateLabels s2 = pretrain_predict(g, 60, 17);
    CHECK((s.y - s2.y).cwiseAbs().maxCoeff() == 0.0);
    SurrogateLabels s3 = pretrain_predict(g, 60, 18);
    CHECK((s.y - s3.y).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("pretraining fits the train split on an easy graph") {
    SyntheticConfig sc;
    sc.type_counts = {{"a", 40}};
    sc.relations = {{"a", "aa", "a", 0.3, 0.02}};
    sc.feature_dim = 8;
    sc.center_separation = 3.0;
    sc.num_classes = 2;
    sc.seed = 33;
    HeteroGraph g = generate_synthetic(sc);
    SurrogateLabels s = pretrain_predict(g, 150, 3);
    int correct = 0;
    for (int i : g.val_idx) {
        int pred;
        s.y.row(i).maxCoeff(&pred);
        if (pred == g.labels[static_cast<size_t>(i)]) ++correct;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(g.val_idx.size()) > 0.7);
}
