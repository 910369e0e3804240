#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "relgp/params.hpp"
#include "relgp/tensor.hpp"
#include "test_util.hpp"

using namespace relgp;

namespace {

// Naive triple-loop matmul oracle, independent of the op implementation.
std::vector<double> matmul_oracle(const std::vector<double>& a,
                                  const std::vector<double>& b, int m, int k, int n) {
  std::vector<double> c(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      for (int t = 0; t < k; ++t) c[i * n + j] += a[i * k + t] * b[t * n + j];
  return c;
}

// FD check of a scalar-valued composite over a single fresh parameter.
double fd_check_unary(const std::function<Value(const Value&)>& body, Shape shape,
                      uint64_t seed, double lo = -1.0, double hi = 1.0) {
  ParameterStore store(seed);
  Rng rng(seed + 17);
  auto init = testutil::random_vec(static_cast<size_t>(shape.numel()), rng, lo, hi);
  store.param("x", shape, InitSpec::zeros());
  store.data("x") = init;
  auto f = [&](ParameterStore& s) { return body(s.get("x")); };
  return check_gradients(f, store, 1e-5, 64, seed).max_rel_err;
}

}  // namespace

TEST_CASE("relu forward matches spec example") {
  Value v = constant(Shape{3}, {-1.0, 0.0, 2.0});
  Value r = relu(v);
  CHECK(r.data() == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("softmax of a uniform row is uniform") {
  Value v = constant(Shape{1, 4}, {0.7, 0.7, 0.7, 0.7});
  Value s = row_softmax(v);
  for (double p : s.data()) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("matmul equals naive triple-loop oracle") {
  Rng rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    int m = 1 + static_cast<int>(rng.below(6));
    int k = 1 + static_cast<int>(rng.below(6));
    int n = 1 + static_cast<int>(rng.below(6));
    auto a = testutil::random_vec(static_cast<size_t>(m) * k, rng);
    auto b = testutil::random_vec(static_cast<size_t>(k) * n, rng);
    Value c = matmul(constant(Shape{m, k}, a), constant(Shape{k, n}, b));
    auto expect = matmul_oracle(a, b, m, k, n);
    REQUIRE(c.shape() == Shape{m, n});
    for (size_t i = 0; i < expect.size(); ++i)
      CHECK(c.data()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(matmul(zeros(Shape{2, 3}), zeros(Shape{4, 2})), Error);
}

TEST_CASE("d/dx x^2 at x=3 is 6") {
  ParameterStore store(1);
  store.param("x", Shape{}, InitSpec::zeros());
  store.data("x") = {3.0};
  Value x = store.get("x");
  Value y = mul(x, x);
  backward(y);
  CHECK(store.grad("x")[0] == doctest::Approx(6.0));
}

TEST_CASE("softmax cross-entropy gradient is p minus one-hot") {
  ParameterStore store(2);
  store.param("logits", Shape{1, 5}, InitSpec::uniform(1.0));
  Value logits = store.get("logits");
  Value probs = row_softmax(logits);
  int64_t target = 3;
  Value p_target = gather_per_row(probs, {target});
  Value loss = scale(sum_all(vlog(p_target)), -1.0);
  backward(loss);
  const auto& g = store.grad("logits");
  const auto& p = probs.data();
  for (int64_t j = 0; j < 5; ++j) {
    double expect = p[j] - (j == target ? 1.0 : 0.0);
    CHECK(g[j] == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("two-layer perceptron gradient matches finite differences") {
  ParameterStore store(3);
  store.param("W1", Shape{4, 6}, InitSpec::glorot());
  store.param("b1", Shape{6}, InitSpec::uniform(0.1));
  store.param("W2", Shape{6, 2}, InitSpec::glorot());
  store.param("b2", Shape{2}, InitSpec::uniform(0.1));
  Rng rng(99);
  auto xdata = testutil::random_vec(12, rng);
  auto f = [&](ParameterStore& s) {
    Value x = constant(Shape{3, 4}, xdata);
    Value h = relu(add_rowvec(matmul(x, s.get("W1")), s.get("b1")));
    Value out = add_rowvec(matmul(h, s.get("W2")), s.get("b2"));
    return mean_all(mul(out, out));
  };
  auto report = check_gradients(f, store, 1e-5, 64, 7);
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("per-op finite-difference agreement on random inputs") {
  CHECK(fd_check_unary([](const Value& x) { return sum_all(relu(x)); }, Shape{5, 3}, 10) < 1e-4);
  CHECK(fd_check_unary([](const Value& x) { return mean_all(mul(x, x)); }, Shape{7}, 11) < 1e-4);
  CHECK(fd_check_unary([](const Value& x) { return sum_all(vlog(x)); }, Shape{6}, 12, 0.2,
                       2.0) < 1e-4);
  CHECK(fd_check_unary([](const Value& x) { return sum_all(vabs(x)); }, Shape{6}, 13) < 1e-4);
  CHECK(fd_check_unary([](const Value& x) { return sum_all(pow_const(x, 3.0)); }, Shape{4},
                       14) < 1e-4);
  CHECK(fd_check_unary([](const Value& x) { return sum_all(row_softmax(x)); }, Shape{3, 4},
                       15) < 1e-4);
  CHECK(fd_check_unary(
            [](const Value& x) {
              Value p = causal_row_softmax(x);
              return sum_all(mul(p, p));
            },
            Shape{4, 4}, 16) < 1e-4);
  CHECK(fd_check_unary([](const Value& x) { return sum_all(mean_rows(x)); }, Shape{5, 2},
                       17) < 1e-4);
  CHECK(fd_check_unary([](const Value& x) { return sum_all(transpose(x)); }, Shape{3, 5},
                       18) < 1e-4);
  CHECK(fd_check_unary(
            [](const Value& x) {
              return sum_all(mul(slice_rows(x, 1, 2), slice_rows(x, 0, 2)));
            },
            Shape{4, 3}, 19) < 1e-4);
  CHECK(fd_check_unary(
            [](const Value& x) {
              return sum_all(mul(select_row(x, 2), select_row(x, 0)));
            },
            Shape{4, 3}, 20) < 1e-4);
  CHECK(fd_check_unary(
            [](const Value& x) {
              Value g = embedding_lookup(x, {0, 2, 2, 1});
              return mean_all(mul(g, g));
            },
            Shape{3, 4}, 21) < 1e-4);
  CHECK(fd_check_unary(
            [](const Value& x) {
              Value r = reshape(x, Shape{2, 6});
              return sum_all(mul(r, r));
            },
            Shape{12}, 22) < 1e-4);
  CHECK(fd_check_unary(
            [](const Value& x) {
              Value s = segment_sum_rows(x, {{0, 1, 2}, {}, {3, 0}});
              return sum_all(mul(s, s));
            },
            Shape{4, 3}, 23) < 1e-4);
  CHECK(fd_check_unary(
            [](const Value& x) {
              Value c = concat_cols(x, x);
              return sum_all(mul(c, c));
            },
            Shape{3, 2}, 24) < 1e-4);
  CHECK(fd_check_unary(
            [](const Value& x) {
              Value parts = concat_rows({slice_rows(x, 0, 1), slice_rows(x, 2, 1)});
              return sum_all(mul(parts, parts));
            },
            Shape{3, 4}, 25) < 1e-4);
  CHECK(fd_check_unary(
            [](const Value& x) { return sum_all(mul(gather1d(x, {1, 3, 3}), gather1d(x, {0, 1, 2}))); },
            Shape{5}, 26) < 1e-4);
  CHECK(fd_check_unary(
            [](const Value& x) { return sum_all(sub_from_const(2.0, scale(x, 3.0))); },
            Shape{4}, 27) < 1e-4);
}

TEST_CASE("layer_norm gradient matches finite differences for all three inputs") {
  ParameterStore store(5);
  store.param("x", Shape{4, 6}, InitSpec::uniform(1.0));
  store.param("g", Shape{6}, InitSpec::uniform(1.0));
  store.param("b", Shape{6}, InitSpec::uniform(0.5));
  auto f = [](ParameterStore& s) {
    Value y = layer_norm(s.get("x"), s.get("g"), s.get("b"));
    return sum_all(mul(y, y));
  };
  CHECK(check_gradients(f, store, 1e-5, 64, 3).max_rel_err < 1e-4);
}

TEST_CASE("matmul gradients match finite differences") {
  ParameterStore store(6);
  store.param("A", Shape{3, 4}, InitSpec::uniform(1.0));
  store.param("B", Shape{4, 5}, InitSpec::uniform(1.0));
  auto f = [](ParameterStore& s) {
    Value c = matmul(s.get("A"), s.get("B"));
    return mean_all(mul(c, c));
  };
  CHECK(check_gradients(f, store, 1e-5, 64, 3).max_rel_err < 1e-4);
}

TEST_CASE("causal softmax ignores future columns") {
  Rng rng(7);
  auto data = testutil::random_vec(16, rng);
  Value a = constant(Shape{4, 4}, data);
  Value p = causal_row_softmax(a);
  // Row i sums to 1 over columns 0..i, zeros beyond.
  for (int i = 0; i < 4; ++i) {
    double s = 0.0;
    for (int j = 0; j <= i; ++j) s += p.data()[i * 4 + j];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    for (int j = i + 1; j < 4; ++j) CHECK(p.data()[i * 4 + j] == 0.0);
  }
  // Perturbing a masked entry changes nothing.
  auto data2 = data;
  data2[0 * 4 + 3] += 100.0;
  Value p2 = causal_row_softmax(constant(Shape{4, 4}, data2));
  CHECK(p.data() == p2.data());
}

TEST_CASE("backward is deterministic and accumulates over repeated calls") {
  ParameterStore store(8);
  store.param("W", Shape{3, 3}, InitSpec::glorot());
  auto run = [&](ParameterStore& s) {
    Value x = constant(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
    Value y = matmul(x, s.get("W"));
    return sum_all(mul(y, y));
  };
  store.zero_grad();
  backward(run(store));
  auto g1 = store.grad("W");
  backward(run(store));
  auto g2 = store.grad("W");
  for (size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == 2.0 * g1[i]);

  store.zero_grad();
  backward(run(store));
  CHECK(store.grad("W") == g1);  // bitwise identical
}

TEST_CASE("backward rejects non-scalar and non-finite losses") {
  ParameterStore store(9);
  store.param("x", Shape{2}, InitSpec::uniform(1.0));
  CHECK_THROWS_AS(backward(store.get("x")), Error);
  try {
    backward(store.get("x"));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonScalarLoss);
  }
  store.data("x") = {0.0, -1.0};
  Value bad = sum_all(vlog(store.get("x")));  // log(0) = -inf
  try {
    backward(bad);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteLoss);
  }
}

TEST_CASE("check_gradients on a linear model is near-exact") {
  ParameterStore store(10);
  store.param("w", Shape{4}, InitSpec::uniform(1.0));
  auto f = [](ParameterStore& s) {
    Value x = constant(Shape{4}, {0.3, -0.7, 1.1, 0.25});
    return sum_all(mul(s.get("w"), x));
  };
  CHECK(check_gradients(f, store, 1e-5, 16, 5).max_rel_err < 1e-10);
}

TEST_CASE("frozen parameters receive no gradient") {
  ParameterStore store(11);
  store.param("w", Shape{3}, InitSpec::uniform(1.0), /*frozen=*/true);
  store.param("v", Shape{3}, InitSpec::uniform(1.0));
  Value y = sum_all(mul(store.get("w"), store.get("v")));
  backward(y);
  CHECK_FALSE(store.has_grad("w"));
  CHECK(store.has_grad("v"));
}

TEST_CASE("checkpoint round-trips bitwise") {
  std::string dir = testutil::temp_dir("ckpt");
  ParameterStore a(12);
  a.param("m/W", Shape{3, 2}, InitSpec::glorot());
  a.param("m/b", Shape{2}, InitSpec::uniform(0.3));
  a.save_checkpoint(dir + "/a.ckpt");

  ParameterStore b(999);  // different init seed; values come from the file
  b.param("m/W", Shape{3, 2}, InitSpec::zeros());
  b.param("m/b", Shape{2}, InitSpec::zeros());
  b.load_checkpoint(dir + "/a.ckpt");
  CHECK(b.data("m/W") == a.data("m/W"));
  CHECK(b.data("m/b") == a.data("m/b"));

  b.save_checkpoint(dir + "/b.ckpt");
  CHECK(testutil::read_file(dir + "/a.ckpt") == testutil::read_file(dir + "/b.ckpt"));
}
