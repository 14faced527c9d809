#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lanp/grad_check.hpp"
#include "lanp/networks.hpp"

using namespace lanp;

namespace {

Tensor random_matrix(RngStream& r, std::size_t rows, std::size_t cols, double s = 1.0) {
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = r.normal(0, s);
    return t;
}

// plain-loop matrix product for oracles
Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
    Tensor out({a.rows(), b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k)
            for (std::size_t j = 0; j < b.cols(); ++j)
                out.at(i, j) += a.at(i, k) * b.at(k, j);
    return out;
}

Tensor affine_oracle(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor out = matmul_oracle(x, w);
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out.at(i, j) += b[j];
    return out;
}

Tensor relu_oracle(Tensor t) {
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = std::max(0.0, t[i]);
    return t;
}

// explicit per-head attention: softmax(Q_h K_hᵀ / sqrt(d_h)) V_h, concatenated
Tensor attend_oracle(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
    std::size_t d = q.cols(), dh = d / (std::size_t)heads;
    Tensor out({q.rows(), d});
    for (int h = 0; h < heads; ++h) {
        std::size_t off = (std::size_t)h * dh;
        for (std::size_t i = 0; i < q.rows(); ++i) {
            std::vector<double> scores(k.rows());
            double mx = -1e300;
            for (std::size_t j = 0; j < k.rows(); ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += q.at(i, off + c) * k.at(j, off + c);
                scores[j] = s / std::sqrt((double)dh);
                mx = std::max(mx, scores[j]);
            }
            double denom = 0.0;
            for (double& s : scores) {
                s = std::exp(s - mx);
                denom += s;
            }
            for (std::size_t j = 0; j < k.rows(); ++j)
                for (std::size_t c = 0; c < dh; ++c)
                    out.at(i, off + c) += scores[j] / denom * v.at(j, off + c);
        }
    }
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Tensor permute_rows(const Tensor& t, const std::vector<std::size_t>& perm) {
    Tensor out({t.rows(), t.cols()});
    for (std::size_t i = 0; i < perm.size(); ++i)
        for (std::size_t c = 0; c < t.cols(); ++c) out.at(i, c) = t.at(perm[i], c);
    return out;
}

} // namespace

TEST_CASE("mlp: zero weights reduce to the bias") {
    Mlp mlp("m", MlpConfig{3, 2, {4}, MlpConfig::Final::kNone, 0.0});
    ParameterStore store;
    mlp.init(store, RngStream(1, 1));
    for (auto& [name, t] : store) t.fill(0.0);
    store.at("m.out.b") = Tensor::row({0.5, -1.5});
    RngStream r(2, 2);
    Graph g;
    Ctx ctx{g, store};
    Value out = mlp.forward(ctx, g.constant(random_matrix(r, 5, 3)));
    for (std::size_t row = 0; row < 5; ++row) {
        CHECK(out.val().at(row, 0) == doctest::Approx(0.5));
        CHECK(out.val().at(row, 1) == doctest::Approx(-1.5));
    }
}

TEST_CASE("mlp: identity affine layer passes input through") {
    Mlp mlp("m", MlpConfig{4, 4, {}, MlpConfig::Final::kNone, 0.0});
    ParameterStore store;
    mlp.init(store, RngStream(1, 1));
    Tensor& w = store.at("m.out.w");
    w.fill(0.0);
    for (std::size_t i = 0; i < 4; ++i) w.at(i, i) = 1.0;
    store.at("m.out.b").fill(0.0);
    RngStream r(3, 0);
    Tensor x = random_matrix(r, 6, 4);
    Graph g;
    Ctx ctx{g, store};
    CHECK(max_abs_diff(mlp.forward(ctx, g.constant(x)).val(), x) == 0.0);
}

TEST_CASE("mlp: random 2x128x1 net matches matrix oracle to 1e-12") {
    Mlp mlp("net", MlpConfig{2, 1, {128, 128}, MlpConfig::Final::kNone, 0.0});
    ParameterStore store;
    mlp.init(store, RngStream(77, 0));
    RngStream r(5, 9);
    Tensor x = random_matrix(r, 7, 2);
    Graph g;
    Ctx ctx{g, store};
    Tensor got = mlp.forward(ctx, g.constant(x)).val();

    Tensor h1 = relu_oracle(affine_oracle(x, store.at("net.fc1.w"), store.at("net.fc1.b")));
    Tensor h2 = relu_oracle(affine_oracle(h1, store.at("net.fc2.w"), store.at("net.fc2.b")));
    Tensor expect = affine_oracle(h2, store.at("net.out.w"), store.at("net.out.b"));
    CHECK(max_abs_diff(got, expect) < 1e-12);
}

TEST_CASE("mlp: softplus-floor and softmax heads") {
    Mlp sp("sp", MlpConfig{2, 3, {}, MlpConfig::Final::kSoftplusFloor, 0.01});
    Mlp sm("sm", MlpConfig{2, 3, {}, MlpConfig::Final::kSoftmax, 0.0});
    ParameterStore store;
    sp.init(store, RngStream(4, 4));
    sm.init(store, RngStream(4, 4));
    for (auto& [name, t] : store) t.fill(0.0);
    Graph g;
    Ctx ctx{g, store};
    Tensor x = Tensor::row({1.0, 2.0});
    Tensor vsp = sp.forward(ctx, g.constant(x)).val();
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(vsp[i] == doctest::Approx(std::log(2.0) + 0.01).epsilon(1e-12));
    Tensor vsm = sm.forward(ctx, g.constant(x)).val();
    for (std::size_t i = 0; i < 3; ++i) CHECK(vsm[i] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("self_attention: uniform kind maps every element to the set mean") {
    SelfAttention sa("sa", AttentionConfig{AttentionConfig::Kind::kUniform, 4, 6});
    ParameterStore store;
    sa.init(store, RngStream(1, 1));
    RngStream r(8, 2);
    Tensor reps = random_matrix(r, 5, 6);
    Graph g;
    Ctx ctx{g, store};
    Tensor out = sa.forward(ctx, g.constant(reps)).val();
    for (std::size_t c = 0; c < 6; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 5; ++i) mean += reps.at(i, c) / 5.0;
        for (std::size_t i = 0; i < 5; ++i) CHECK(out.at(i, c) == doctest::Approx(mean));
    }
}

TEST_CASE("self_attention: singleton set is a pure projection (softmax weight 1)") {
    AttentionConfig cfg{AttentionConfig::Kind::kMultiHead, 4, 16};
    SelfAttention sa("sa", cfg);
    ParameterStore store;
    sa.init(store, RngStream(10, 3));
    RngStream r(6, 6);
    Tensor rep = random_matrix(r, 1, 16);
    Graph g;
    Ctx ctx{g, store};
    Tensor got = sa.forward(ctx, g.constant(rep)).val();
    Tensor v = affine_oracle(rep, store.at("sa.v.w"), store.at("sa.v.b"));
    Tensor expect = affine_oracle(v, store.at("sa.o.w"), store.at("sa.o.b"));
    CHECK(max_abs_diff(got, expect) < 1e-12);
}

TEST_CASE("self_attention: multi-head matches explicit per-head softmax oracle to 1e-10") {
    AttentionConfig cfg{AttentionConfig::Kind::kMultiHead, 4, 32};
    SelfAttention sa("sa", cfg);
    ParameterStore store;
    sa.init(store, RngStream(21, 5));
    RngStream r(13, 1);
    Tensor reps = random_matrix(r, 3, 32);
    Graph g;
    Ctx ctx{g, store};
    Tensor got = sa.forward(ctx, g.constant(reps)).val();

    Tensor q = affine_oracle(reps, store.at("sa.q.w"), store.at("sa.q.b"));
    Tensor k = affine_oracle(reps, store.at("sa.k.w"), store.at("sa.k.b"));
    Tensor v = affine_oracle(reps, store.at("sa.v.w"), store.at("sa.v.b"));
    Tensor expect =
        affine_oracle(attend_oracle(q, k, v, 4), store.at("sa.o.w"), store.at("sa.o.b"));
    CHECK(max_abs_diff(got, expect) < 1e-10);
}

TEST_CASE("self_attention: output set permutes with the input set") {
    AttentionConfig cfg{AttentionConfig::Kind::kMultiHead, 4, 16};
    SelfAttention sa("sa", cfg);
    ParameterStore store;
    sa.init(store, RngStream(31, 7));
    RngStream r(17, 0);
    Tensor reps = random_matrix(r, 6, 16);
    std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};

    Graph g1;
    Ctx c1{g1, store};
    Tensor out = sa.forward(c1, g1.constant(reps)).val();
    Graph g2;
    Ctx c2{g2, store};
    Tensor out_p = sa.forward(c2, g2.constant(permute_rows(reps, perm))).val();
    CHECK(max_abs_diff(out_p, permute_rows(out, perm)) < 1e-9);
}

TEST_CASE("cross_attention: single context point ignores the query") {
    AttentionConfig cfg{AttentionConfig::Kind::kMultiHead, 4, 16};
    CrossAttention ca("ca", cfg, 1, 8);
    ParameterStore store;
    ca.init(store, RngStream(42, 1));
    RngStream r(19, 2);
    Tensor key = random_matrix(r, 1, 1);
    Tensor val = random_matrix(r, 1, 16);
    Graph g;
    Ctx ctx{g, store};
    Tensor q1 = Tensor::row({0.1});
    Tensor q2 = Tensor::row({9.7});
    Tensor o1 = ca.forward(ctx, g.constant(key), g.constant(val), g.constant(q1)).val();
    Tensor o2 = ca.forward(ctx, g.constant(key), g.constant(val), g.constant(q2)).val();
    CHECK(max_abs_diff(o1, o2) < 1e-12);

    Tensor v = affine_oracle(val, store.at("ca.v.w"), store.at("ca.v.b"));
    Tensor o = affine_oracle(v, store.at("ca.o.w"), store.at("ca.o.b"));
    Tensor expect = affine_oracle(o, store.at("ca.final.w"), store.at("ca.final.b"));
    CHECK(max_abs_diff(o1, expect) < 1e-12);
}

TEST_CASE("cross_attention: identical keys split the weight evenly") {
    AttentionConfig cfg{AttentionConfig::Kind::kMultiHead, 2, 8};
    CrossAttention ca("ca", cfg, 1, 4);
    ParameterStore store;
    ca.init(store, RngStream(50, 4));
    RngStream r(23, 3);
    Tensor keys({2, 1});
    keys[0] = keys[1] = 1.7;
    Tensor vals = random_matrix(r, 2, 8);
    Tensor query = Tensor::row({4.2});
    Graph g;
    Ctx ctx{g, store};
    Tensor got = ca.forward(ctx, g.constant(keys), g.constant(vals), g.constant(query)).val();

    Tensor mean_val({1, 8});
    for (std::size_t c = 0; c < 8; ++c) mean_val[c] = 0.5 * (vals.at(0, c) + vals.at(1, c));
    Tensor v = affine_oracle(mean_val, store.at("ca.v.w"), store.at("ca.v.b"));
    Tensor o = affine_oracle(v, store.at("ca.o.w"), store.at("ca.o.b"));
    Tensor expect = affine_oracle(o, store.at("ca.final.w"), store.at("ca.final.b"));
    CHECK(max_abs_diff(got, expect) < 1e-10);
}

TEST_CASE("cross_attention: random 5-context case matches explicit softmax oracle to 1e-10") {
    AttentionConfig cfg{AttentionConfig::Kind::kMultiHead, 4, 24};
    CrossAttention ca("ca", cfg, 1, 8);
    ParameterStore store;
    ca.init(store, RngStream(61, 9));
    RngStream r(29, 4);
    Tensor keys = random_matrix(r, 5, 1, 2.0);
    Tensor vals = random_matrix(r, 5, 24);
    Tensor queries = random_matrix(r, 3, 1, 2.0);
    Graph g;
    Ctx ctx{g, store};
    Tensor got = ca.forward(ctx, g.constant(keys), g.constant(vals), g.constant(queries)).val();

    auto embed = [&](const Tensor& x) {
        Tensor h = relu_oracle(
            affine_oracle(x, store.at("ca.embed.fc1.w"), store.at("ca.embed.fc1.b")));
        return relu_oracle(
            affine_oracle(h, store.at("ca.embed.fc2.w"), store.at("ca.embed.fc2.b")));
    };
    Tensor k = affine_oracle(embed(keys), store.at("ca.k.w"), store.at("ca.k.b"));
    Tensor q = affine_oracle(embed(queries), store.at("ca.q.w"), store.at("ca.q.b"));
    Tensor v = affine_oracle(vals, store.at("ca.v.w"), store.at("ca.v.b"));
    Tensor att = attend_oracle(q, k, v, 4);
    Tensor o = affine_oracle(att, store.at("ca.o.w"), store.at("ca.o.b"));
    Tensor expect = affine_oracle(o, store.at("ca.final.w"), store.at("ca.final.b"));
    CHECK(max_abs_diff(got, expect) < 1e-10);
}

TEST_CASE("cross_attention: permutation of the context set leaves outputs unchanged") {
    AttentionConfig cfg{AttentionConfig::Kind::kMultiHead, 4, 16};
    CrossAttention ca("ca", cfg, 1, 8);
    ParameterStore store;
    ca.init(store, RngStream(70, 2));
    RngStream r(31, 5);
    Tensor keys = random_matrix(r, 7, 1, 2.0);
    Tensor vals = random_matrix(r, 7, 16);
    Tensor queries = random_matrix(r, 4, 1, 2.0);
    std::vector<std::size_t> perm = {6, 2, 0, 4, 1, 5, 3};

    Graph g1;
    Ctx c1{g1, store};
    Tensor a = ca.forward(c1, g1.constant(keys), g1.constant(vals), g1.constant(queries)).val();
    Graph g2;
    Ctx c2{g2, store};
    Tensor b = ca.forward(c2, g2.constant(permute_rows(keys, perm)),
                          g2.constant(permute_rows(vals, perm)), g2.constant(queries))
                   .val();
    CHECK(max_abs_diff(a, b) < 1e-9);
}

TEST_CASE("attention weights are a softmax: rows sum to one") {
    RngStream r(37, 8);
    Graph g;
    Tensor scores = random_matrix(r, 6, 9, 3.0);
    Tensor sm = g.row_softmax(g.constant(scores)).val();
    for (std::size_t i = 0; i < 6; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 9; ++j) {
            CHECK(sm.at(i, j) >= 0.0);
            s += sm.at(i, j);
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("networks: gradient check passes for every block") {
    ParameterStore store;
    Mlp mlp("m", MlpConfig{2, 3, {8, 8}, MlpConfig::Final::kSoftplusFloor, 0.01});
    SelfAttention sa("sa", AttentionConfig{AttentionConfig::Kind::kMultiHead, 2, 8});
    CrossAttention ca("ca", AttentionConfig{AttentionConfig::Kind::kMultiHead, 2, 8}, 1, 4);
    mlp.init(store, RngStream(91, 0));
    sa.init(store, RngStream(91, 0));
    ca.init(store, RngStream(91, 0));
    RngStream r(41, 6);
    Tensor x = random_matrix(r, 5, 2);
    Tensor reps = random_matrix(r, 5, 8);
    Tensor keys = random_matrix(r, 5, 1);
    Tensor queries = random_matrix(r, 3, 1);

    auto build = [&](Graph& g) {
        Ctx ctx{g, store};
        Value m = mlp.forward(ctx, g.constant(x));
        Value s = sa.forward(ctx, g.constant(reps));
        Value c = ca.forward(ctx, g.constant(keys), s, g.constant(queries));
        return g.add(g.sum_all(g.square(m)), g.sum_all(g.square(c)));
    };
    GradCheckOptions opts;
    opts.max_coords = 300;
    GradCheckReport rep = grad_check(build, store, opts);
    CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("self_attention: empty set rejected") {
    SelfAttention sa("sa", AttentionConfig{AttentionConfig::Kind::kMultiHead, 4, 8});
    ParameterStore store;
    sa.init(store, RngStream(1, 1));
    Graph g;
    Ctx ctx{g, store};
    CHECK_THROWS_AS(sa.forward(ctx, g.constant(Tensor::zeros(0, 8))), ShapeError);
}
