// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "testutil.hpp"
#include "vqamix/graph.hpp"
#include "vqamix/optim.hpp"

using namespace vqamix;
using testutil::check_gradients;
using testutil::random_tensor;

TEST_CASE("tensor shape and data invariants") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.shape_str() == "[2x3]");
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  Parameter p("w", Tensor::from({2, 2}, {1, 2, 3, 4}));
  CHECK(p.grad.same_shape(p.value));
}

TEST_CASE("matmul identity and dot product") {
  Graph g;
  Var a = g.constant(Tensor::from({2, 2}, {1, 0, 0, 1}));
  Var b = g.constant(Tensor::from({2, 2}, {3, 4, 5, 6}));
  Var c = matmul(a, b);
  CHECK(c.value().vec() == std::vector<double>{3, 4, 5, 6});

  Var u = g.constant(Tensor::from({1, 2}, {1, 2}));
  Var v = g.constant(Tensor::from({2, 1}, {3, 4}));
  CHECK(matmul(u, v).value()[0] == doctest::Approx(11.0).epsilon(1e-15));
}

TEST_CASE("matmul matches triple-loop oracle") {
  Rng rng(99);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  Graph g;
  Tensor got = matmul(g.constant(a), g.constant(b)).value();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) {
      double ref = 0.0;
      for (int k = 0; k < 4; ++k) ref += a.at(i, k) * b.at(k, j);
      CHECK(std::abs(got.at(i, j) - ref) < 1e-12);
    }
}

TEST_CASE("matmul dimension error names both shapes") {
  Graph g;
  Var a = g.constant(Tensor({3, 4}));
  Var b = g.constant(Tensor({5, 2}));
  CHECK_THROWS_WITH_AS(matmul(a, b), "matmul: inner dimensions disagree: [3x4] vs [5x2]",
                       DimensionError);
}

TEST_CASE("layernorm collapses constant rows and standardizes pairs") {
  Graph g;
  Var gain = g.constant(Tensor::full({4}, 1.0));
  Var bias = g.constant(Tensor({4}));
  Var x = g.constant(Tensor::full({1, 4}, 7.0));
  Tensor y = layernorm(x, gain, bias, 1e-5).value();
  for (int i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(0.0).epsilon(1e-12));

  Var gain2 = g.constant(Tensor::full({2}, 1.0));
  Var bias2 = g.constant(Tensor({2}));
  Var x2 = g.constant(Tensor::from({1, 2}, {1, 3}));
  Tensor y2 = layernorm(x2, gain2, bias2, 1e-12).value();
  CHECK(y2[0] == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(y2[1] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("layernorm statistics on random rows") {
  Rng rng(5);
  Graph g;
  int R = 8, d = 32;
  Var x = g.constant(random_tensor({R, d}, rng));
  Var gain = g.constant(Tensor::full({d}, 1.0));
  Var bias = g.constant(Tensor({d}));
  Tensor y = layernorm(x, gain, bias, 1e-9).value();
  for (int r = 0; r < R; ++r) {
    double mean = 0, var = 0;
    for (int j = 0; j < d; ++j) mean += y.at(r, j);
    mean /= d;
    for (int j = 0; j < d; ++j) var += (y.at(r, j) - mean) * (y.at(r, j) - mean);
    var /= d;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-3);
  }
}

TEST_CASE("layernorm rejects zero-width last axis") {
  Graph g;
  Var x = g.constant(Tensor({3, 0}));
  Var gain = g.constant(Tensor({0}));
  Var bias = g.constant(Tensor({0}));
  CHECK_THROWS_AS(layernorm(x, gain, bias, 1e-5), DimensionError);
}

TEST_CASE("cross entropy equals ln V on uniform logits") {
  for (int V : {2, 8, 1024}) {
    Graph g;
    Var logits = g.constant(Tensor::full({3, V}, 0.37));
    std::vector<int> targets = {0, V / 2, V - 1};
    double loss = softmax_cross_entropy(logits, targets, -1).value().item();
    CHECK(std::abs(loss - std::log(static_cast<double>(V))) < 1e-9);
  }
}

TEST_CASE("cross entropy near-perfect prediction and hand case") {
  Graph g;
  Tensor t({2, 8});
  t.fill(-30.0);
  t.at(0, 3) = 30.0;
  t.at(1, 5) = 30.0;
  double loss = softmax_cross_entropy(g.constant(t), {3, 5}, -1).value().item();
  CHECK(loss >= 0.0);
  CHECK(loss < 1e-3);

  Var two = g.constant(Tensor::from({1, 2}, {0.0, std::log(3.0)}));
  double hand = softmax_cross_entropy(two, {1}, -1).value().item();
  CHECK(hand == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy ignore handling") {
  Graph g;
  Tensor t({2, 4});
  t.fill(1.0);
  Var logits = g.constant(t);
  const int ignore = 0;
  // second position ignored -> same value as a single uniform row
  double loss = softmax_cross_entropy(logits, {2, ignore}, ignore).value().item();
  CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK_THROWS_AS(softmax_cross_entropy(logits, {ignore, ignore}, ignore), NumericError);
  CHECK_THROWS_AS(softmax_cross_entropy(logits, {9, 1}, ignore), DimensionError);
}

TEST_CASE("cross entropy is non-negative on random inputs") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    Graph g;
    Var logits = g.constant(random_tensor({5, 16}, rng, -3.0, 3.0));
    std::vector<int> targets;
    for (int i = 0; i < 5; ++i) targets.push_back(rng.uniform_int(0, 15));
    CHECK(softmax_cross_entropy(logits, targets, -1).value().item() >= 0.0);
  }
}

TEST_CASE("backward of sum of squares gives 2x") {
  Parameter x("x", Tensor::from({3}, {1, 2, 3}));
  Graph g;
  Var xv = g.param(x);
  Var loss = sum(mul(xv, xv));
  g.backward(loss);
  CHECK(x.grad.vec() == std::vector<double>{2, 4, 6});
  CHECK(x.grad_live);
}

TEST_CASE("backward rejects a second call, non-scalar roots, unfinalized graphs") {
  Parameter x("x", Tensor::from({2}, {1, 2}));
  Graph g;
  Var loss = sum(g.param(x));
  CHECK_THROWS_AS(g.backward(), NumericError);  // not finalized
  g.backward(loss);
  CHECK_THROWS_AS(g.backward(), NumericError);  // second call

  Graph g2;
  Var nonscalar = g2.param(x);
  CHECK_THROWS_AS(g2.mark_output(nonscalar), DimensionError);
}

TEST_CASE("matmul gradients match finite differences") {
  Rng rng(7);
  Parameter a("a", random_tensor({3, 4}, rng));
  Parameter b("b", random_tensor({4, 2}, rng));
  auto build = [&](Graph& g) { return sum(matmul(g.param(a), g.param(b))); };
  auto res = check_gradients({&a, &b}, build, 1e-4);
  INFO(res.first_failure);
  CHECK(res.ok());
}

TEST_CASE("every elementwise and reduction kernel matches finite differences") {
  Rng rng(11);
  Parameter a("a", random_tensor({4, 5}, rng));
  Parameter b("b", random_tensor({4, 5}, rng));
  Parameter row("row", random_tensor({5}, rng));

  SUBCASE("add+mul+scale") {
    auto build = [&](Graph& g) {
      return sum(scale(mul(add(g.param(a), g.param(b)), g.param(a)), 0.7));
    };
    auto res = check_gradients({&a, &b}, build, 1e-4);
    INFO(res.first_failure);
    CHECK(res.ok());
  }
  SUBCASE("add_rowvec") {
    auto build = [&](Graph& g) { return sum(add_rowvec(g.param(a), g.param(row))); };
    auto res = check_gradients({&a, &row}, build, 1e-4);
    CHECK(res.ok());
  }
  SUBCASE("gelu") {
    auto build = [&](Graph& g) { return sum(gelu(g.param(a))); };
    auto res = check_gradients({&a}, build, 1e-4);
    CHECK(res.ok());
  }
  SUBCASE("transpose+reshape+slice+concat") {
    auto build = [&](Graph& g) {
      Var t = transpose(g.param(a));                       // [5x4]
      Var r = reshape(t, {4, 5});
      Var s = slice_cols(r, 1, 3);                         // [4x3]
      Var c = concat_cols({s, slice_cols(g.param(b), 0, 2)});
      Var rows = concat_rows({c, c});
      return sum(mul(rows, rows));
    };
    auto res = check_gradients({&a, &b}, build, 1e-4);
    INFO(res.first_failure);
    CHECK(res.ok());
  }
  SUBCASE("softmax_rows") {
    Tensor weights = random_tensor({4, 5}, rng);
    auto build = [&](Graph& g) {
      Var y = softmax_rows(g.param(a));
      return sum(mul(y, g.constant(weights)));
    };
    auto res = check_gradients({&a}, build, 1e-4);
    CHECK(res.ok());
  }
  SUBCASE("layernorm") {
    Parameter lnb("lnb", random_tensor({5}, rng));
    auto build = [&](Graph& g) {
      Var y = layernorm(g.param(a), g.param(row), g.param(lnb), 1e-5);
      return sum(mul(y, y));
    };
    auto res = check_gradients({&a, &row, &lnb}, build, 1e-4);
    INFO(res.first_failure);
    CHECK(res.ok());
  }
}

TEST_CASE("embedding, relative bias and cross entropy gradients") {
  Rng rng(13);
  Parameter table("table", random_tensor({6, 4}, rng));
  Parameter bias("bias", random_tensor({5, 2}, rng));

  SUBCASE("embed_rows") {
    std::vector<int> ids = {0, 3, 3, 5};
    auto build = [&](Graph& g) {
      Var e = embed_rows(g.param(table), ids);
      return sum(mul(e, e));
    };
    auto res = check_gradients({&table}, build, 1e-4);
    CHECK(res.ok());
  }
  SUBCASE("rel_bias") {
    IntMat buckets(3, 3);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) buckets.at(r, c) = (r + c) % 5;
    auto build = [&](Graph& g) {
      Var bmat = rel_bias(g.param(bias), buckets, 1);
      return sum(mul(bmat, bmat));
    };
    auto res = check_gradients({&bias}, build, 1e-4);
    CHECK(res.ok());
  }
  SUBCASE("softmax_cross_entropy") {
    Parameter logits("logits", random_tensor({4, 6}, rng));
    std::vector<int> targets = {2, 0, -1, 5};
    auto build = [&](Graph& g) { return softmax_cross_entropy(g.param(logits), targets, -1); };
    auto res = check_gradients({&logits}, build, 1e-4);
    INFO(res.first_failure);
    CHECK(res.ok());
  }
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(17);
  Parameter img("img", random_tensor({6, 6, 2}, rng));
  Parameter kern("kern", random_tensor({3, 3, 2, 3}, rng, -0.5, 0.5));
  Parameter cb("cb", random_tensor({3}, rng));
  auto build = [&](Graph& g) {
    Var y = conv2d(g.param(img), g.param(kern), g.param(cb), 2, 1);
    return sum(mul(y, y));
  };
  auto res = check_gradients({&img, &kern, &cb}, build, 1e-4);
  INFO(res.first_failure);
  CHECK(res.ok());
}

TEST_CASE("kernels are deterministic for identical inputs") {
  Rng rng(23);
  Tensor a = random_tensor({4, 4}, rng);
  auto run = [&]() {
    Graph g;
    Var x = g.constant(a);
    Var y = softmax_rows(matmul(gelu(x), transpose(x)));
    return y.value().vec();
  };
  CHECK(run() == run());
}

TEST_CASE("sgd and adam single-step arithmetic") {
  Parameter p("p", Tensor::scalar(1.0));

  SUBCASE("sgd") {
    Optimizer opt({OptKind::sgd, 0.1}, {&p});
    p.grad[0] = 0.5;
    p.grad_live = true;
    opt.step();
    CHECK(p.value[0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(opt.step_count() == 1);
  }
  SUBCASE("adam first step moves by about lr") {
    Optimizer opt({OptKind::adam, 0.001}, {&p});
    p.grad[0] = 1.0;
    p.grad_live = true;
    opt.step();
    CHECK(p.value[0] == doctest::Approx(1.0 - 0.001).epsilon(1e-6));
  }
  SUBCASE("zero gradient is a fixed point") {
    Optimizer sgd({OptKind::sgd, 0.1}, {&p});
    p.grad_live = true;
    sgd.step();
    CHECK(p.value[0] == 1.0);
    Optimizer adam({OptKind::adam, 0.1}, {&p});
    adam.step();
    CHECK(std::abs(p.value[0] - 1.0) < 1e-12);
  }
  SUBCASE("missing gradient is a named error") {
    Optimizer opt({OptKind::adam, 0.001}, {&p});
    CHECK_THROWS_WITH_AS(opt.step(), "optimizer step: no gradient for parameter 'p'",
                         NumericError);
  }
}

TEST_CASE("optimizer step counter increments by one per step") {
  Parameter p("p", Tensor::scalar(2.0));
  Optimizer opt({OptKind::adam, 0.01}, {&p});
  for (int i = 1; i <= 5; ++i) {
    p.grad[0] = 0.1;
    p.grad_live = true;
    opt.step();
    CHECK(opt.step_count() == static_cast<uint64_t>(i));
    opt.zero_grad();
  }
}
