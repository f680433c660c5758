#include <cmath>

#include "doctest.h"
#include "layl/errors.hpp"
#include "layl/fdcheck.hpp"
#include "layl/rng.hpp"
#include "layl/tape.hpp"

using namespace layl;

TEST_CASE("d/dx of x^2 at 3 is 6") {
    ParamStore ps;
    int x = ps.add_group("x", {1}, {3.0});
    Tape t(&ps);
    Val xv = t.leaf(x);
    Val y = t.record(OpKind::Mul, {xv, xv});
    t.backward(y);
    CHECK(ps.group(x).grad[0] == 6.0);
}

TEST_CASE("sigmoid at 0: value 0.5, derivative 0.25") {
    ParamStore ps;
    int x = ps.add_group("x", {1}, {0.0});
    Tape t(&ps);
    Val y = t.sigmoid(t.leaf(x));
    CHECK(t.scalar_value(y) == 0.5);
    t.backward(t.sum(y));
    CHECK(ps.group(x).grad[0] == 0.25);
}

TEST_CASE("softplus at -50 neither overflows nor loses positivity") {
    ParamStore ps;
    int x = ps.add_group("x", {1}, {-50.0});
    Tape t(&ps);
    Val y = t.softplus(t.leaf(x));
    double v = t.scalar_value(y);
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
    CHECK(v < 1e-20);
    t.backward(y);
    double g = ps.group(x).grad[0];
    CHECK(std::isfinite(g));
    CHECK(g >= 0.0);
    CHECK(g < 1e-20);
}

TEST_CASE("product rule: f(a,b) = a*b at (2,5) gives grads (5,2)") {
    ParamStore ps;
    int a = ps.add_group("a", {1}, {2.0});
    int b = ps.add_group("b", {1}, {5.0});
    Tape t(&ps);
    Val y = t.mul(t.leaf(a), t.leaf(b));
    t.backward(y);
    CHECK(ps.group(a).grad[0] == 5.0);
    CHECK(ps.group(b).grad[0] == 2.0);
}

TEST_CASE("backward rejects non-scalar outputs") {
    ParamStore ps;
    int a = ps.add_group("a", {2}, {1.0, 2.0});
    Tape t(&ps);
    Val y = t.mul(t.leaf(a), t.leaf(a));
    CHECK_THROWS_AS(t.backward(y), ContractError);
}

TEST_CASE("unreachable parameters get exact zero gradients") {
    ParamStore ps;
    int a = ps.add_group("a", {1}, {2.0});
    int b = ps.add_group("b", {1}, {3.0});
    Tape t(&ps);
    Val y = t.mul(t.leaf(a), t.leaf(a));
    t.backward(y);
    CHECK(ps.group(b).grad[0] == 0.0);
}

TEST_CASE("gradient of a sum equals sum of gradients") {
    auto build = [](Tape& t, Val x, int which) {
        Val sq = t.mul(x, x);
        Val lin = t.mul(x, t.constant(Tensor({3}, {1.0, -2.0, 0.5})));
        if (which == 0) return t.sum(sq);
        if (which == 1) return t.sum(lin);
        return t.add(t.sum(sq), t.sum(lin));
    };

    std::vector<double> init{0.3, -1.1, 2.2};
    std::vector<double> g1, g2, g12;
    for (int which : {0, 1, 2}) {
        ParamStore ps;
        int x = ps.add_group("x", {3}, init);
        Tape t(&ps);
        t.backward(build(t, t.leaf(x), which));
        auto& g = ps.group(x).grad;
        if (which == 0) g1 = g;
        if (which == 1) g2 = g;
        if (which == 2) g12 = g;
    }
    for (size_t i = 0; i < 3; ++i) CHECK(g12[i] == g1[i] + g2[i]);
}

TEST_CASE("replaying the same tape yields bit-identical gradients") {
    auto run = []() {
        ParamStore ps;
        int x = ps.add_group("x", {4}, {0.1, 0.7, -0.4, 1.3});
        Tape t(&ps);
        Val xv = t.leaf(x);
        Val y = t.sum(t.sigmoid(t.mul(t.sin(xv), t.exp(t.mul(xv, xv)))));
        t.backward(y);
        return ps.group(x).grad;
    };
    auto a = run();
    auto b = run();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("backward twice on one tape resets adjoints") {
    ParamStore ps;
    int x = ps.add_group("x", {1}, {1.5});
    Tape t(&ps);
    Val y = t.mul(t.leaf(x), t.leaf(x));
    t.backward(y);
    double first = ps.group(x).grad[0];
    ps.zero_grads();
    t.backward(y);
    CHECK(ps.group(x).grad[0] == first);
}

TEST_CASE("matmul forward and backward match hand computations") {
    ParamStore ps;
    int a = ps.add_group("a", {2, 2}, {1.0, 2.0, 3.0, 4.0});
    int b = ps.add_group("b", {2, 2}, {5.0, 6.0, 7.0, 8.0});
    Tape t(&ps);
    Val c = t.matmul(t.leaf(a), t.leaf(b));
    const Tensor& v = t.value(c);
    CHECK(v.at(0) == 19.0);
    CHECK(v.at(1) == 22.0);
    CHECK(v.at(2) == 43.0);
    CHECK(v.at(3) == 50.0);
    t.backward(t.sum(c));
    // d(sum)/dA = ones @ B^T, d(sum)/dB = A^T @ ones
    CHECK(ps.group(a).grad == std::vector<double>{11.0, 15.0, 11.0, 15.0});
    CHECK(ps.group(b).grad == std::vector<double>{4.0, 4.0, 6.0, 6.0});
}

TEST_CASE("batched matmul flattens leading dims") {
    Tape t;
    Tensor x({2, 2, 3});
    for (int i = 0; i < 12; ++i) x.at(i) = double(i);
    Tensor w({3, 1}, {1.0, 10.0, 100.0});
    Val y = t.matmul(t.constant(x), t.constant(w));
    CHECK(t.value(y).shape == std::vector<int>{2, 2, 1});
    CHECK(t.value(y).at(0) == 0.0 + 10.0 + 200.0);
    CHECK(t.value(y).at(3) == 9.0 + 100.0 + 1100.0);
}

TEST_CASE("concat forward and backward slice correctly") {
    ParamStore ps;
    int a = ps.add_group("a", {2, 1}, {1.0, 2.0});
    int b = ps.add_group("b", {2, 2}, {3.0, 4.0, 5.0, 6.0});
    Tape t(&ps);
    Val c = t.concat({t.leaf(a), t.leaf(b)}, 1);
    CHECK(t.value(c).shape == std::vector<int>{2, 3});
    CHECK(t.value(c).data == std::vector<double>{1.0, 3.0, 4.0, 2.0, 5.0, 6.0});
    Val weighted = t.mul(c, t.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6})));
    t.backward(t.sum(weighted));
    CHECK(ps.group(a).grad == std::vector<double>{1.0, 4.0});
    CHECK(ps.group(b).grad == std::vector<double>{2.0, 3.0, 5.0, 6.0});
}

TEST_CASE("broadcast backward sums over expanded dims") {
    ParamStore ps;
    int a = ps.add_group("a", {1, 3}, {1.0, 2.0, 3.0});
    Tape t(&ps);
    Val e = t.broadcast(t.leaf(a), {4, 3});
    t.backward(t.sum(e));
    CHECK(ps.group(a).grad == std::vector<double>{4.0, 4.0, 4.0});
}

TEST_CASE("sum and mean along an axis") {
    Tape t;
    Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
    Val v = t.constant(x);
    CHECK(t.value(t.sum_axis(v, 1, false)).data == std::vector<double>{6.0, 15.0});
    CHECK(t.value(t.sum_axis(v, 1, true)).shape == std::vector<int>{2, 1});
    CHECK(t.value(t.mean_axis(v, 0, false)).data == std::vector<double>{2.5, 3.5, 4.5});
    CHECK(t.scalar_value(t.mean(v)) == 3.5);
}

TEST_CASE("elementwise max/min send gradient to the first argument on ties") {
    ParamStore ps;
    int a = ps.add_group("a", {2}, {1.0, 5.0});
    int b = ps.add_group("b", {2}, {1.0, 2.0});
    Tape t(&ps);
    t.backward(t.sum(t.max(t.leaf(a), t.leaf(b))));
    CHECK(ps.group(a).grad == std::vector<double>{1.0, 1.0});  // tie at index 0 goes to a
    CHECK(ps.group(b).grad == std::vector<double>{0.0, 0.0});

    ps.zero_grads();
    Tape t2(&ps);
    t2.backward(t2.sum(t2.min(t2.leaf(a), t2.leaf(b))));
    CHECK(ps.group(a).grad == std::vector<double>{1.0, 0.0});
    CHECK(ps.group(b).grad == std::vector<double>{0.0, 1.0});
}

TEST_CASE("reduction max picks the first maximal element") {
    ParamStore ps;
    int a = ps.add_group("a", {4}, {3.0, 7.0, 7.0, 1.0});
    Tape t(&ps);
    t.backward(t.max_reduce(t.leaf(a)));
    CHECK(ps.group(a).grad == std::vector<double>{0.0, 1.0, 0.0, 0.0});
}

TEST_CASE("log and sqrt reject negative inputs") {
    Tape t;
    CHECK_THROWS_AS(t.log(t.constant(Tensor::scalar(-1.0))), DomainError);
    CHECK_THROWS_AS(t.sqrt(t.constant(Tensor::scalar(-1.0))), DomainError);
}

TEST_CASE("record rejects non-primitive kinds") {
    Tape t;
    Val c = t.constant(Tensor::scalar(1.0));
    CHECK_THROWS_AS(t.record(OpKind::Leaf, {c}), ContractError);
}

TEST_CASE("finite differences agree on a quadratic to 1e-9") {
    ParamStore ps;
    int x = ps.add_group("x", {3}, {0.4, -1.0, 2.5});
    auto loss = [&]() {
        Tape t(&ps);
        Val xv = t.leaf(x);
        Val q = t.sum(t.mul(xv, xv));
        return t.scalar_value(q);
    };
    auto grad = [&]() {
        ps.zero_grads();
        Tape t(&ps);
        Val xv = t.leaf(x);
        Val q = t.sum(t.mul(xv, xv));
        t.backward(q);
        return t.scalar_value(q);
    };
    FdReport r = finite_diff_check(ps, loss, grad, 1e-4);
    CHECK(r.max_rel < 1e-9);
}

TEST_CASE("finite-difference harness aborts on non-deterministic losses") {
    ParamStore ps;
    ps.add_group("x", {1}, {1.0});
    int calls = 0;
    auto loss = [&]() { return double(++calls); };
    auto grad = [&]() { return 0.0; };
    CHECK_THROWS_AS(finite_diff_check(ps, loss, grad, 1e-4), ContractError);
}

TEST_CASE("all-frozen store yields an empty report") {
    ParamStore ps;
    int x = ps.add_group("x", {2}, {1.0, 2.0});
    ps.group(x).frozen = true;
    auto loss = [&]() { return 0.0; };
    FdReport r = finite_diff_check(ps, loss, loss, 1e-4);
    CHECK(r.groups.empty());
    CHECK(r.max_rel == 0.0);
}

TEST_CASE("gradient accumulation order is deterministic across runs") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        ParamStore ps;
        std::vector<double> init(16);
        for (auto& v : init) v = rng.normal();
        int x = ps.add_group("x", {16}, init);
        // Shard-style accumulation: several backward passes into one buffer.
        for (int shard = 0; shard < 4; ++shard) {
            Tape t(&ps);
            Val xv = t.leaf(x);
            Tensor w({16});
            for (int i = 0; i < 16; ++i) w.at(i) = double(shard + 1) * 0.25 * double(i % 3);
            t.backward(t.sum(t.mul(t.sigmoid(xv), t.constant(w))));
        }
        return ps.group(x).grad;
    };
    auto a = run(5);
    auto b = run(5);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
