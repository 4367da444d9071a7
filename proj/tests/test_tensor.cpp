#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cbsa/error.hpp"
#include "cbsa/tape.hpp"
#include "cbsa/tensor.hpp"
#include "test_util.hpp"

using namespace cbsa;

TEST_CASE("matmul basics") {
    Tensor i2 = Tensor::identity(2);
    Tensor r = matmul(i2, i2);
    CHECK(r.at(0, 0) == 1.0);
    CHECK(r.at(0, 1) == 0.0);
    CHECK(r.at(1, 1) == 1.0);

    Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
    Tensor b = Tensor::from_rows({{1}, {1}});
    Tensor c = matmul(a, b);
    CHECK(c.rows() == 2);
    CHECK(c.cols() == 1);
    CHECK(c.at(0, 0) == doctest::Approx(3.0));
    CHECK(c.at(1, 0) == doctest::Approx(7.0));

    Tensor x(3, 5), y(5, 2);
    Tensor z = matmul(x, y);
    CHECK(z.rows() == 3);
    CHECK(z.cols() == 2);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor a(2, 3), b(4, 2);
    try {
        matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x2]") != std::string::npos);
    }
}

TEST_CASE("elementwise ops") {
    Tensor z = Tensor::scalar(0.0);
    CHECK(sigmoid(z)[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pow_t(Tensor::scalar(0.25), 1.0)[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(log_t(Tensor::scalar(std::exp(1.0)))[0] == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(log_t(Tensor::scalar(-1.0)), DomainError);
    CHECK_THROWS_AS(log_t(Tensor::scalar(0.0)), DomainError);
    CHECK_THROWS_AS(pow_t(Tensor::scalar(-0.5), 2.0), DomainError);

    Tensor a(2, 2), b(2, 3);
    CHECK_THROWS_AS(add(a, b), ShapeError);
    CHECK_THROWS_AS(mul(a, b), ShapeError);
}

TEST_CASE("softmax_rows") {
    Tensor eq = Tensor::full(1, 4, 2.5);
    Tensor u = softmax_rows(eq, 1.0);
    for (int j = 0; j < 4; ++j) CHECK(u[j] == doctest::Approx(0.25).epsilon(1e-12));

    Tensor x = Tensor::row({0.0, std::log(3.0)});
    Tensor s = softmax_rows(x, 1.0);
    CHECK(s[0] == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(s[1] == doctest::Approx(0.75).epsilon(1e-10));

    Tensor y = Tensor::row({1.0, 2.0});
    Tensor t = softmax_rows(y, 1e6);
    CHECK(t[0] == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(t[1] == doctest::Approx(0.5).epsilon(1e-5));

    // Property: random rows sum to 1 within 1e-9, entries strictly in (0,1).
    Rng rng(7);
    for (int it = 0; it < 50; ++it) {
        Tensor m = Tensor::gaussian(3, 5, 4.0, rng);
        Tensor p = softmax_rows(m, rng.uniform(0.05, 3.0));
        for (int i = 0; i < 3; ++i) {
            double s2 = 0.0;
            for (int j = 0; j < 5; ++j) {
                s2 += p.at(i, j);
                CHECK(p.at(i, j) > 0.0);
                CHECK(p.at(i, j) < 1.0);
            }
            CHECK(std::fabs(s2 - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("l2_normalize_rows") {
    Tensor v = Tensor::row({3.0, 4.0});
    Tensor n = l2_normalize_rows(v);
    CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-12));

    Tensor unit = Tensor::row({1.0, 0.0, 0.0});
    Tensor n2 = l2_normalize_rows(unit);
    CHECK(n2[0] == 1.0);
    CHECK(n2[1] == 0.0);

    CHECK_THROWS_AS(l2_normalize_rows(Tensor::row({0.0, 0.0})), DomainError);

    Rng rng(11);
    for (int it = 0; it < 20; ++it) {
        Tensor m = Tensor::gaussian(4, 6, 1.0, rng);
        Tensor p = l2_normalize_rows(m);
        for (int i = 0; i < 4; ++i)
            CHECK(std::fabs(row_norm(p, i) - 1.0) < 1e-9);
    }
}

TEST_CASE("backward on simple graphs") {
    // d(x^2)/dx at 3 is 6
    {
        Param x("x", Tensor::scalar(3.0));
        Graph g;
        Var xv = g.use(x);
        Var y = g.tape().mul(xv, xv);
        g.backward(y);
        CHECK(x.grad[0] == doctest::Approx(6.0).epsilon(1e-12));
    }
    // d(sigmoid)/dx at 0 is 0.25
    {
        Param x("x", Tensor::scalar(0.0));
        Graph g;
        Var y = g.tape().sigmoid(g.use(x));
        g.backward(y);
        CHECK(x.grad[0] == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("backward rejects non-scalar root") {
    Param x("x", Tensor::full(2, 2, 1.0));
    Graph g;
    Var y = g.tape().sigmoid(g.use(x));
    CHECK_THROWS_AS(g.backward(y), ContractError);
}

TEST_CASE("random 6-op composite graph matches finite differences") {
    auto res = testutil::run_graph_fd_sweep(1, /*seed0=*/42, /*n_ops=*/6);
    CHECK_MESSAGE(res.ok, res.detail);
}

TEST_CASE("100 random composite graphs pass the gradient oracle") {
    auto res = testutil::run_graph_fd_sweep(100, /*seed0=*/1000, /*n_ops=*/8);
    CHECK_MESSAGE(res.ok, res.detail);
    CHECK(res.checked > 1000);
}

TEST_CASE("backward is linear across roots") {
    auto build = [](Graph& g, std::vector<Param>& ps) {
        Var a = g.use(ps[0]);
        Var b = g.use(ps[1]);
        Var m = g.tape().matmul(a, b);
        Var s = g.tape().sigmoid(m);
        Var r1 = g.tape().mean(s);
        Var r2 = g.tape().mean(g.tape().mul(m, m));
        return std::pair{r1, r2};
    };
    Rng rng(3);
    std::vector<Param> base;
    base.emplace_back("a", Tensor::gaussian(3, 2, 1.0, rng));
    base.emplace_back("b", Tensor::gaussian(2, 3, 1.0, rng));

    auto run = [&](int which) {  // 0: r1, 1: r2, 2: r1+r2
        std::vector<Param> ps = base;
        for (auto& p : ps) p.zero_grad();
        Graph g;
        auto [r1, r2] = build(g, ps);
        Var root = which == 0 ? r1 : which == 1 ? r2 : g.tape().add(r1, r2);
        g.backward(root);
        std::vector<Tensor> grads;
        for (auto& p : ps) grads.push_back(p.grad);
        return grads;
    };
    auto g1 = run(0), g2 = run(1), gs = run(2);
    for (std::size_t p = 0; p < gs.size(); ++p)
        for (std::size_t i = 0; i < gs[p].size(); ++i)
            CHECK(gs[p][i] == doctest::Approx(g1[p][i] + g2[p][i]).epsilon(1e-12));
}

TEST_CASE("gradient buffers match node shapes after backward") {
    Param a("a", Tensor::full(2, 3, 0.5));
    Param b("b", Tensor::full(3, 2, 0.25));
    Graph g;
    Var av = g.use(a), bv = g.use(b);
    Var m = g.tape().matmul(av, bv);
    Var r = g.tape().mean(g.tape().sigmoid(m));
    g.backward(r);
    CHECK(g.tape().grad(m).shape() == g.tape().value(m).shape());
    CHECK(g.tape().grad(av).shape() == a.value.shape());
    CHECK(a.grad.shape() == a.value.shape());
    CHECK(b.grad.shape() == b.value.shape());
}

TEST_CASE("constants receive no gradient tracking") {
    Param a("a", Tensor::full(2, 2, 0.5));
    Graph g;
    Var av = g.use(a);
    Var cv = g.constant(Tensor::full(2, 2, 3.0));
    Var m = g.tape().mul(av, cv);
    Var r = g.tape().mean(m);
    g.backward(r);
    CHECK_FALSE(g.tape().requires_grad(cv));
    CHECK(g.tape().grad(cv).empty());
    CHECK(a.grad[0] == doctest::Approx(0.75));  // 3.0 / 4 cells
}

TEST_CASE("finite outputs on finite inputs") {
    Rng rng(99);
    for (int it = 0; it < 30; ++it) {
        Tensor m = Tensor::gaussian(3, 4, 10.0, rng);
        CHECK(sigmoid(m).all_finite());
        CHECK(softmax_rows(m, 0.07).all_finite());
        CHECK(tanh_t(m).all_finite());
        CHECK(affine(m, 3.0, -1.0).all_finite());
    }
}
