#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

#include "pita/autodiff.hpp"
#include "pita/random.hpp"
#include "pita/tensor.hpp"
#include "test_support.hpp"

using namespace pita;
using pita::testing::fd_gradients;
using pita::testing::max_rel_error;

TEST_CASE("matmul identity and projector") {
    Tape tape;
    NodeId eye = tape.constant(Tensor::from_rows({{1, 0}, {0, 1}}));
    NodeId a = tape.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
    NodeId prod = tape.matmul(eye, a);
    CHECK(tape.value(prod).data() == std::vector<double>{1, 2, 3, 4});

    NodeId proj = tape.constant(Tensor::from_rows({{1, 0}, {0, 0}}));
    NodeId b = tape.constant(Tensor::from_rows({{5, 6}, {7, 8}}));
    NodeId selected = tape.matmul(proj, b);
    CHECK(tape.value(selected).data() == std::vector<double>{5, 6, 0, 0});
}

TEST_CASE("matmul gradient equals row sums of the other operand") {
    RandomStream rng(11);
    Tensor a = Tensor::zeros({3, 4});
    Tensor b = Tensor::zeros({4, 2});
    for (std::size_t i = 0; i < a.numel(); ++i) a[i] = rng.uniform(-1, 1);
    for (std::size_t i = 0; i < b.numel(); ++i) b[i] = rng.uniform(-1, 1);

    Tape tape;
    NodeId an = tape.constant(a);
    NodeId bn = tape.constant(b);
    NodeId root = tape.sum(tape.matmul(an, bn));
    Gradients grads = tape.backward(root);

    // d(sum(AB))/dA[i][k] sums row k of B, independent of i.
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t k = 0; k < 4; ++k) {
            double expected = b.at(k, 0) + b.at(k, 1);
            CHECK(grads.at(an).at(i, k) == doctest::Approx(expected).epsilon(1e-12));
        }
    }

    auto oracle = [](const std::vector<Tensor>& leaves) {
        Tape t;
        return t.value(t.sum(t.matmul(t.constant(leaves[0]), t.constant(leaves[1])))).item();
    };
    std::vector<Tensor> fd = fd_gradients(oracle, {a, b});
    CHECK(max_rel_error({grads.at(an), grads.at(bn)}, fd) < 1e-8);
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    Tape tape;
    NodeId a = tape.constant(Tensor::zeros({2, 3}));
    NodeId b = tape.constant(Tensor::zeros({2, 3}));
    CHECK_THROWS_WITH_AS(tape.matmul(a, b),
                         "matmul: inner dimensions of [2x3] and [2x3] do not agree",
                         std::invalid_argument);
}

TEST_CASE("elementwise values and local gradients") {
    Tape tape;
    NodeId zero = tape.constant(Tensor::vector({0.0}));
    NodeId th = tape.tanh(zero);
    CHECK(tape.value(th)[0] == 0.0);
    Gradients g1 = tape.backward(tape.sum(th));
    CHECK(g1.at(zero)[0] == doctest::Approx(1.0));

    Tape tape2;
    NodeId half_pi = tape2.constant(Tensor::vector({std::numbers::pi / 2}));
    NodeId s = tape2.sin(half_pi);
    CHECK(tape2.value(s)[0] == doctest::Approx(1.0));
    Gradients g2 = tape2.backward(tape2.sum(s));
    CHECK(g2.at(half_pi)[0] == doctest::Approx(std::cos(std::numbers::pi / 2)).epsilon(1e-12));
}

TEST_CASE("square gradient of a random vector is twice the vector") {
    RandomStream rng(3);
    Tensor v = Tensor::zeros({6});
    for (std::size_t i = 0; i < v.numel(); ++i) v[i] = rng.uniform(-2, 2);

    Tape tape;
    NodeId vn = tape.constant(v);
    Gradients grads = tape.backward(tape.sum(tape.square(vn)));
    for (std::size_t i = 0; i < v.numel(); ++i) {
        CHECK(grads.at(vn)[i] == doctest::Approx(2.0 * v[i]).epsilon(1e-12));
    }

    auto oracle = [](const std::vector<Tensor>& leaves) {
        Tape t;
        return t.value(t.sum(t.square(t.constant(leaves[0])))).item();
    };
    CHECK(max_rel_error({grads.at(vn)}, fd_gradients(oracle, {v})) < 1e-8);
}

TEST_CASE("elementwise ops name both shapes on mismatch") {
    Tape tape;
    NodeId a = tape.constant(Tensor::zeros({2, 2}));
    NodeId b = tape.constant(Tensor::zeros({2, 3}));
    CHECK_THROWS_WITH_AS(tape.add(a, b), "add: operand shapes [2x2] and [2x3] do not match",
                         std::invalid_argument);
}

TEST_CASE("backward of a bare input is one") {
    Tape tape;
    NodeId x = tape.constant(Tensor::scalar(4.0));
    Gradients grads = tape.backward(x);
    CHECK(grads.at(x)[0] == 1.0);
}

TEST_CASE("backward rejects a non-scalar root") {
    Tape tape;
    NodeId x = tape.constant(Tensor::vector({1.0, 2.0}));
    CHECK_THROWS_AS(tape.backward(x), std::invalid_argument);
}

TEST_CASE("nodes the root does not reach keep zero adjoints") {
    Tape tape;
    NodeId x = tape.constant(Tensor::vector({1.0, 2.0}));
    NodeId unused = tape.tanh(tape.constant(Tensor::vector({3.0})));
    NodeId root = tape.sum(tape.square(x));
    Gradients grads = tape.backward(root);
    CHECK(grads.at(unused)[0] == 0.0);
    CHECK(grads.at(x)[0] == 2.0);
    CHECK(grads.at(x)[1] == 4.0);
}

namespace {

double mlp_loss(Tape& tape, const std::vector<Tensor>& leaves, std::vector<NodeId>* ids) {
    // 3-layer tanh MLP with a sum-of-squares loss against fixed targets.
    NodeId input = tape.constant(leaves[0]);
    NodeId h = input;
    for (int layer = 0; layer < 3; ++layer) {
        NodeId w = tape.constant(leaves[1 + 2 * layer]);
        NodeId b = tape.constant(leaves[2 + 2 * layer]);
        if (ids) {
            ids->push_back(w);
            ids->push_back(b);
        }
        h = tape.add_row(tape.matmul(h, w), b);
        if (layer < 2) h = tape.tanh(h);
    }
    NodeId target = tape.constant(leaves[7]);
    NodeId loss = tape.sum(tape.square(tape.sub(h, target)));
    return tape.value(loss).item();
}

std::vector<Tensor> mlp_leaves(std::uint64_t seed) {
    RandomStream rng(seed);
    auto filled = [&](std::vector<std::size_t> shape, double scale) {
        Tensor t = Tensor::zeros(std::move(shape));
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-scale, scale);
        return t;
    };
    return {filled({2, 4}, 1.0),                     // input batch
            filled({4, 8}, 0.5), filled({8}, 0.2),   // layer 1
            filled({8, 8}, 0.5), filled({8}, 0.2),   // layer 2
            filled({8, 1}, 0.5), filled({1}, 0.2),   // layer 3
            filled({2, 1}, 1.0)};                    // target
}

}  // namespace

TEST_CASE("full mlp gradients match central finite differences") {
    std::vector<Tensor> leaves = mlp_leaves(17);
    Tape tape;
    std::vector<NodeId> param_ids;
    mlp_loss(tape, leaves, &param_ids);
    NodeId root = static_cast<NodeId>(tape.size() - 1);
    Gradients grads = tape.backward(root);

    auto oracle = [](const std::vector<Tensor>& vals) {
        Tape t;
        return mlp_loss(t, vals, nullptr);
    };
    std::vector<Tensor> fd = fd_gradients(oracle, leaves);

    std::vector<Tensor> analytic;
    std::vector<Tensor> numeric;
    for (std::size_t i = 0; i < param_ids.size(); ++i) {
        analytic.push_back(grads.at(param_ids[i]));
        numeric.push_back(fd[1 + i]);
    }
    CHECK(max_rel_error(analytic, numeric) < 1e-5);
}

namespace {

/// Composed graph touching every op kind.
double composed_loss(Tape& tape, const std::vector<Tensor>& leaves, std::vector<NodeId>* ids) {
    NodeId a = tape.constant(leaves[0]);    // [3x4]
    NodeId b = tape.constant(leaves[1]);    // [4x5]
    NodeId c = tape.constant(leaves[2]);    // [3x5]
    NodeId row = tape.constant(leaves[3]);  // [5]
    if (ids) {
        ids->push_back(a);
        ids->push_back(b);
        ids->push_back(c);
        ids->push_back(row);
    }
    NodeId m = tape.add_row(tape.matmul(a, b), row);
    NodeId mixed = tape.mul(tape.tanh(m), tape.sin(c));
    NodeId trig = tape.add(mixed, tape.cos(tape.scale(c, 0.5)));
    NodeId sliced = tape.slice_cols(trig, 0, 2, 2);
    NodeId rest = tape.slice_cols(trig, 1, 1, 3);
    NodeId relu_branch = tape.relu(tape.sub(rest, tape.slice_cols(m, 0, 1, 3)));
    NodeId loss = tape.add(tape.sum(tape.square(sliced)), tape.sum(relu_branch));
    return tape.value(loss).item();
}

}  // namespace

TEST_CASE("gradient correctness property over random composed graphs") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        RandomStream rng(seed * 977);
        auto filled = [&](std::vector<std::size_t> shape) {
            Tensor t = Tensor::zeros(std::move(shape));
            for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.5, 1.5);
            return t;
        };
        std::vector<Tensor> leaves = {filled({3, 4}), filled({4, 5}), filled({3, 5}), filled({5})};

        Tape tape;
        std::vector<NodeId> leaf_ids;
        composed_loss(tape, leaves, &leaf_ids);
        Gradients grads = tape.backward(static_cast<NodeId>(tape.size() - 1));

        auto oracle = [](const std::vector<Tensor>& vals) {
            Tape t;
            return composed_loss(t, vals, nullptr);
        };
        std::vector<Tensor> fd = fd_gradients(oracle, leaves);
        std::vector<Tensor> analytic;
        for (NodeId id : leaf_ids) analytic.push_back(grads.at(id));
        CHECK(max_rel_error(analytic, fd) < 1e-4);
    }
}

TEST_CASE("adjoints from multiple consumers accumulate additively") {
    Tensor v = Tensor::vector({0.3, -0.7, 1.1});

    // Shared subexpression: s = tanh(v) consumed twice.
    Tape shared;
    NodeId sv = shared.constant(v);
    NodeId s = shared.tanh(sv);
    NodeId shared_root = shared.sum(shared.add(shared.square(s), shared.mul(s, s)));
    Gradients gs = shared.backward(shared_root);

    // Equivalent graph with the subexpression duplicated.
    Tape dup;
    NodeId dv = dup.constant(v);
    NodeId s1 = dup.tanh(dv);
    NodeId s2 = dup.tanh(dv);
    NodeId dup_root = dup.sum(dup.add(dup.square(s1), dup.mul(s2, s2)));
    Gradients gd = dup.backward(dup_root);

    for (std::size_t i = 0; i < v.numel(); ++i) {
        CHECK(gs.at(sv)[i] == doctest::Approx(gd.at(dv)[i]).epsilon(1e-14));
    }
}

TEST_CASE("identical graphs give bit-identical values and gradients") {
    auto run = [](std::vector<double>& values_out, std::vector<double>& grads_out) {
        RandomStream rng(99);
        Tensor a = Tensor::zeros({4, 4});
        for (std::size_t i = 0; i < a.numel(); ++i) a[i] = rng.uniform(-1, 1);
        Tape tape;
        NodeId an = tape.constant(a);
        NodeId out = tape.sum(tape.square(tape.tanh(tape.matmul(an, an))));
        values_out = tape.value(out).data();
        grads_out = tape.backward(out).at(an).data();
    };
    std::vector<double> v1, g1, v2, g2;
    run(v1, g1);
    run(v2, g2);
    CHECK(std::memcmp(v1.data(), v2.data(), v1.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("slice_cols gathers strided columns and scatters gradients back") {
    Tape tape;
    NodeId m = tape.constant(Tensor::from_rows({{0, 1, 2, 3, 4, 5}, {6, 7, 8, 9, 10, 11}}));
    NodeId sliced = tape.slice_cols(m, 1, 2, 3);
    CHECK(tape.value(sliced).data() == std::vector<double>{1, 3, 5, 7, 9, 11});

    Gradients grads = tape.backward(tape.sum(sliced));
    CHECK(grads.at(m).data() == std::vector<double>{0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1});

    CHECK_THROWS_AS(tape.slice_cols(m, 4, 2, 3), std::invalid_argument);
}
