#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <hgul/encoders.hpp>

using namespace hgul;
using ad::Tape;
using ad::Var;

namespace {

Mat randm(int r, int c, std::uint64_t seed) {
    auto rng = rng_stream(seed, "enc");
    return random_uniform(r, c, -1.0, 1.0, rng);
}

}  // namespace

TEST_CASE("mlp forward matches the hand-rolled oracle") {
    ParamStore store;
    init_mlp_params(store, "mlp", {{"paper", 5}}, 4, 7);
    Mat x0 = randm(6, 5, 1);
    Tape t;
    ParamBinder bind(store, t);
    MlpVars p = bind_mlp(bind, "mlp", "paper");
    Mat got = mlp_forward(t, t.constant(x0), p)->value;

    Mat w1 = store.value("mlp.paper.w1"), b1 = store.value("mlp.paper.b1");
    Mat w2 = store.value("mlp.paper.w2"), b2 = store.value("mlp.paper.b2");
    Mat h = ((x0 * w1).rowwise() + b1.row(0)).cwiseMax(0.0);
    Mat want = (h * w2).rowwise() + b2.row(0);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("mlp init is deterministic in the seed and fan-in bounded") {
    ParamStore s1, s2;
    init_mlp_params(s1, "mlp", {{"a", 9}}, 4, 42);
    init_mlp_params(s2, "mlp", {{"a", 9}}, 4, 42);
    CHECK((s1.value("mlp.a.w1") - s2.value("mlp.a.w1")).cwiseAbs().maxCoeff() == 0.0);
    CHECK(s1.value("mlp.a.w1").cwiseAbs().maxCoeff() <= 1.0 / 3.0);  // 1/sqrt(9)
    ParamStore s3;
    init_mlp_params(s3, "mlp", {{"a", 9}}, 4, 43);
    CHECK((s1.value("mlp.a.w1") - s3.value("mlp.a.w1")).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("rgcn with one intra-type relation reduces to plain GCN") {
    // single type, identity self weight suppressed by zeroing: out = Ahat X W_r + X W_self + b
    int n = 7, din = 3, dout = 4;
    Mat x0 = randm(n, din, 2);
    Mat a = Mat::Zero(n, n);
    auto rng = rng_stream(3, "adj");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (u(rng) < 0.4) a(i, j) = a(j, i) = 1.0;
    Mat ah = normalize_adjacency(a);

    std::vector<MetaRelation> rels(1);
    rels[0].src_type = rels[0].dst_type = "n";
    rels[0].name = "e";
    ParamStore store;
    init_rgcn_params(store, {"g", {{"n", din}}, dout}, rels, 5);

    Tape t;
    ParamBinder bind(store, t);
    VarMap feats{{"n", t.constant(x0)}};
    std::map<std::string, Var> adj{{"e", t.constant(ah)}};
    Mat got = rgcn_forward(t, feats, adj, rels, bind, "g").at("n")->value;

    Mat want = x0 * store.value("g.self.n") + ah * x0 * store.value("g.rel.e");
    want.rowwise() += store.value("g.bias.n").row(0);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rgcn sums messages over relations into the same type") {
    int n = 5;
    Mat x = randm(n, 3, 6);
    std::vector<MetaRelation> rels(2);
    rels[0] = {"n", "r1", "n", {}, false};
    rels[1] = {"n", "r2", "n", {}, false};
    ParamStore store;
    init_rgcn_params(store, {"g", {{"n", 3}}, 2}, rels, 7);
    Mat a1 = randm(n, n, 8), a2 = randm(n, n, 9);

    Tape t;
    ParamBinder bind(store, t);
    VarMap feats{{"n", t.constant(x)}};
    std::map<std::string, Var> adj{{"r1", t.constant(a1)}, {"r2", t.constant(a2)}};
    Mat got = rgcn_forward(t, feats, adj, rels, bind, "g").at("n")->value;
    Mat want = x * store.value("g.self.n") + a1 * x * store.value("g.rel.r1") +
               a2 * x * store.value("g.rel.r2");
    want.rowwise() += store.value("g.bias.n").row(0);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rgcn is permutation equivariant") {
    int n = 8, din = 3, dout = 3;
    Mat x = randm(n, din, 10);
    Mat a = randm(n, n, 11).cwiseAbs();
    std::vector<MetaRelation> rels(1);
    rels[0] = {"n", "e", "n", {}, false};
    ParamStore store;
    init_rgcn_params(store, {"g", {{"n", din}}, dout}, rels, 12);

    auto run = [&](const Mat& xx, const Mat& aa) {
        Tape t;
        ParamBinder bind(store, t);
        VarMap feats{{"n", t.constant(xx)}};
        std::map<std::string, Var> adj{{"e", t.constant(aa)}};
        return rgcn_forward(t, feats, adj, rels, bind, "g").at("n")->value;
    };
    // permutation: rotate node order by 3
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(n);
    std::vector<int> pv(n);
    for (int i = 0; i < n; ++i) pv[static_cast<size_t>(i)] = (i + 3) % n;
    for (int i = 0; i < n; ++i) perm.indices()[i] = pv[static_cast<size_t>(i)];
    Mat p = perm.toDenseMatrix().cast<double>();

    Mat out = run(x, a);
    Mat out_perm = run(p * x, p * a * p.transpose());
    CHECK((out_perm - p * out).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cross-type relation routes messages dst <- src") {
    std::vector<MetaRelation> rels(1);
    rels[0] = {"a", "ab", "b", {}, false};
    Mat xa = randm(4, 2, 13), xb = randm(3, 2, 14);
    Mat aab = randm(3, 4, 15);  // dst x src
    ParamStore store;
    init_rgcn_params(store, {"g", {{"a", 2}, {"b", 2}}, 2}, rels, 16);
    Tape t;
    ParamBinder bind(store, t);
    VarMap feats{{"a", t.constant(xa)}, {"b", t.constant(xb)}};
    std::map<std::string, Var> adj{{"ab", t.constant(aab)}};
    VarMap out = rgcn_forward(t, feats, adj, rels, bind, "g");
    Mat want_b = xb * store.value("g.self.b") + aab * xa * store.value("g.rel.ab");
    want_b.rowwise() += store.value("g.bias.b").row(0);
    CHECK((out.at("b")->value - want_b).cwiseAbs().maxCoeff() < 1e-12);
    // type "a" receives no messages, only its self transform
    Mat want_a = xa * store.value("g.self.a");
    want_a.rowwise() += store.value("g.bias.a").row(0);
    CHECK((out.at("a")->value - want_a).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("graph norm standardizes columns then applies the affine") {
    int n = 50, d = 4;
    Mat x = randm(n, d, 20) * 3.0;
    ParamStore store;
    init_norm_params(store, "norm", {"n"}, d);
    {
        Tape t;
        ParamBinder bind(store, t);
        Mat y = graph_norm(t, t.constant(x), bind, "norm", "n")->value;
        // default affine (scale 1, shift 0): each column ~ zero mean unit variance
        for (int j = 0; j < d; ++j) {
            double mean = y.col(j).mean();
            double var = (y.col(j).array() - mean).square().sum() / n;
            CHECK(std::abs(mean) < 1e-12);
            CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps in the denominator
        }
    }
    // affine contract: scale and shift act per column after standardization
    store.value("norm.scale.n") = Mat::Constant(1, d, 2.0);
    store.value("norm.shift.n") = Mat::Constant(1, d, -1.0);
    Tape t;
    ParamBinder bind(store, t);
    Mat y = graph_norm(t, t.constant(x), bind, "norm", "n")->value;
    for (int j = 0; j < d; ++j) {
        CHECK(y.col(j).mean() == doctest::Approx(-1.0).epsilon(1e-9));
    }
}

TEST_CASE("constant column is mapped to the shift (no blow-up)") {
    ParamStore store;
    init_norm_params(store, "norm", {"n"}, 2);
    Mat x(4, 2);
    x << 3.0, 1.0, 3.0, 2.0, 3.0, 3.0, 3.0, 4.0;
    Tape t;
    ParamBinder bind(store, t);
    Mat y = graph_norm(t, t.constant(x), bind, "norm", "n")->value;
    CHECK(y.col(0).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::isfinite(y.col(1).cwiseAbs().maxCoeff()));
}
