#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "artkit/grad_check.hpp"
#include "artkit/rng.hpp"
#include "artkit/tensor.hpp"

using namespace artkit;
using ad::Tensor;
using T = double;

TEST_CASE("rng is counter-based and fork streams are independent") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  Rng c(42);
  Rng child1 = c.fork(1);
  (void)c.next_u64();
  Rng child2 = c.fork(1);  // fork does not consume parent state
  REQUIRE(child1.next_u64() == child2.next_u64());

  Rng d(7);
  double mean = 0;
  for (int i = 0; i < 10000; ++i) mean += d.normal();
  mean /= 10000;
  REQUIRE(std::abs(mean) < 0.05);
}

TEST_CASE("shape mismatch errors name both shapes") {
  Tensor<T> a = Tensor<T>::zeros({2, 3});
  Tensor<T> b = Tensor<T>::zeros({3, 3});
  try {
    (void)ad::add(a, b);
    FAIL("expected shape error");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    REQUIRE(msg.find("[2,3]") != std::string::npos);
    REQUIRE(msg.find("[3,3]") != std::string::npos);
  }
}

TEST_CASE("softmax of equal logits is uniform and sums to one") {
  int n = 7;
  Tensor<T> x = Tensor<T>::full({1, n}, 0.37);
  Tensor<T> y = ad::softmax_rows(x);
  double sum = 0;
  for (int j = 0; j < n; ++j) {
    REQUIRE(y(0, j) == Catch::Approx(1.0 / n).epsilon(1e-12));
    sum += y(0, j);
  }
  REQUIRE(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("softmax output is a probability simplex point") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<T> vals(12);
    for (auto& v : vals) v = rng.uniform(-30, 30);
    Tensor<T> y = ad::softmax_rows(Tensor<T>::constant({3, 4}, vals));
    for (int i = 0; i < 3; ++i) {
      double sum = 0;
      for (int j = 0; j < 4; ++j) {
        REQUIRE(y(i, j) >= 0.0);
        sum += y(i, j);
      }
      REQUIRE(std::abs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("bce_with_logits saturates for confident correct logits") {
  Tensor<T> logit = Tensor<T>::constant({1, 1}, {20.0});
  Tensor<T> label = Tensor<T>::constant({1, 1}, {1.0});
  REQUIRE(ad::bce_with_logits(logit, label).item() < 1e-6);
}

TEST_CASE("kl_categorical of identical logits is zero") {
  Rng rng(5);
  std::vector<T> vals(8);
  for (auto& v : vals) v = rng.uniform(-4, 4);
  Tensor<T> x = Tensor<T>::constant({2, 4}, vals);
  REQUIRE(std::abs(ad::kl_categorical_rows(x, x).item()) < 1e-12);
}

TEST_CASE("kl_categorical matches a direct computation") {
  Tensor<T> p = Tensor<T>::constant({1, 3}, {0.2, -0.5, 1.0});
  Tensor<T> q = Tensor<T>::constant({1, 3}, {-1.0, 0.4, 0.1});
  auto softmax = [](std::vector<double> v) {
    double mx = *std::max_element(v.begin(), v.end()), s = 0;
    for (auto& x : v) {
      x = std::exp(x - mx);
      s += x;
    }
    for (auto& x : v) x /= s;
    return v;
  };
  auto ps = softmax({0.2, -0.5, 1.0});
  auto qs = softmax({-1.0, 0.4, 0.1});
  double want = 0;
  for (int j = 0; j < 3; ++j) want += ps[size_t(j)] * std::log(ps[size_t(j)] / qs[size_t(j)]);
  REQUIRE(ad::kl_categorical_rows(p, q).item() == Catch::Approx(want).epsilon(1e-10));
}

TEST_CASE("gumbel softmax weights sum to one") {
  Rng rng(11);
  std::vector<T> vals(6);
  for (auto& v : vals) v = rng.uniform(-3, 3);
  Tensor<T> logits = Tensor<T>::constant({1, 6}, vals);
  Tensor<T> w = ad::gumbel_softmax(logits, T(1.0), rng);
  double sum = 0;
  for (int j = 0; j < 6; ++j) sum += w(0, j);
  REQUIRE(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("gumbel softmax with zero noise and tiny tau is one-hot at argmax") {
  Tensor<T> logits = Tensor<T>::constant({1, 4}, {0.3, 2.0, -1.0, 1.9});
  Tensor<T> zero = Tensor<T>::zeros({1, 4});
  Tensor<T> w = ad::gumbel_softmax(logits, zero, T(1e-4));
  REQUIRE(w(0, 1) == Catch::Approx(1.0).margin(1e-6));
  for (int j : {0, 2, 3}) REQUIRE(w(0, j) < 1e-6);
}

TEST_CASE("gumbel softmax with zero noise, equal logits, tau 1 is uniform") {
  Tensor<T> logits = Tensor<T>::full({1, 5}, 0.7);
  Tensor<T> zero = Tensor<T>::zeros({1, 5});
  Tensor<T> w = ad::gumbel_softmax(logits, zero, T(1.0));
  for (int j = 0; j < 5; ++j)
    REQUIRE(w(0, j) == Catch::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("grad of sum of squares is exact") {
  Rng rng(17);
  std::vector<T> vals(10);
  for (auto& v : vals) v = rng.uniform(-2, 2);
  Tensor<T> theta = Tensor<T>::param({2, 5}, vals);
  auto f = [&]() { return ad::sum_all(ad::mul(theta, theta)); };
  double err = ad::grad_check<T>(f, {theta}, {.eps = 1e-6});
  REQUIRE(err < 1e-8);
}

TEST_CASE("elementwise, matmul and reduction ops pass finite differences") {
  Rng rng(23);
  auto rand_param = [&](std::vector<int> shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    std::vector<T> vals(static_cast<size_t>(n));
    for (auto& v : vals) v = rng.uniform(-1.5, 1.5);
    return Tensor<T>::param(shape, vals);
  };

  Tensor<T> a = rand_param({3, 4});
  Tensor<T> b = rand_param({4, 2});
  Tensor<T> c = rand_param({3, 2});
  Tensor<T> row = rand_param({1, 2});
  Tensor<T> target = Tensor<T>::constant({3, 2}, std::vector<T>(6, 0.25));

  auto f = [&]() {
    Tensor<T> h = ad::add_rowvec(ad::matmul(a, b), row);
    h = ad::gelu(h);
    h = ad::add(h, ad::sigmoid(c));
    h = ad::mul(h, ad::tanh_(c));
    Tensor<T> s = ad::softmax_rows(h);
    return ad::add(ad::mse(s, target), ad::l1(h, target));
  };
  REQUIRE(ad::grad_check<T>(f, {a, b, c, row}) < 1e-4);
}

TEST_CASE("slice, concat, gather, transpose, reshape pass finite differences") {
  Rng rng(29);
  std::vector<T> vals(24);
  for (auto& v : vals) v = rng.uniform(-1, 1);
  Tensor<T> a = Tensor<T>::param({4, 6}, vals);

  auto f = [&]() {
    Tensor<T> left = ad::slice_cols(a, 0, 3);
    Tensor<T> right = ad::slice_cols(a, 3, 3);
    Tensor<T> rows = ad::gather_rows(a, {0, 2, 2, 3});
    Tensor<T> cat = ad::concat_rows<T>({left, right});
    Tensor<T> t = ad::transpose(ad::concat_cols<T>(
        {ad::slice_rows(cat, 0, 4), ad::reshape(rows, {4, 6})}));
    return ad::mean_all(ad::mul(t, t));
  };
  REQUIRE(ad::grad_check<T>(f, {a}) < 1e-4);
}

TEST_CASE("softmax, log_softmax, layernorm, bce, kl pass finite differences") {
  Rng rng(31);
  auto rand_param = [&](std::vector<int> shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    std::vector<T> vals(static_cast<size_t>(n));
    for (auto& v : vals) v = rng.uniform(-1.5, 1.5);
    return Tensor<T>::param(shape, vals);
  };
  Tensor<T> x = rand_param({3, 5});
  Tensor<T> q = rand_param({3, 5});
  Tensor<T> gain = rand_param({1, 5});
  Tensor<T> bias = rand_param({1, 5});
  Tensor<T> labels = Tensor<T>::constant({3, 5}, [&] {
    std::vector<T> v(15);
    for (auto& u : v) u = rng.bernoulli(0.5) ? 1.0 : 0.0;
    return v;
  }());

  auto f = [&]() {
    Tensor<T> ln = ad::layernorm_rows(x, gain, bias);
    Tensor<T> loss = ad::bce_with_logits(ln, labels);
    loss = ad::add(loss, ad::kl_categorical_rows(x, q));
    loss = ad::add(loss, ad::mean_all(ad::log_softmax_rows(ln)));
    return loss;
  };
  REQUIRE(ad::grad_check<T>(f, {x, q, gain, bias}) < 1e-4);
}

TEST_CASE("gumbel softmax path with frozen noise passes finite differences") {
  Rng rng(37);
  std::vector<T> vals(8), noise(8);
  for (auto& v : vals) v = rng.uniform(-1, 1);
  for (auto& v : noise) v = rng.gumbel();
  Tensor<T> logits = Tensor<T>::param({2, 4}, vals);
  Tensor<T> g = Tensor<T>::constant({2, 4}, noise);
  Tensor<T> mix = Tensor<T>::param({4, 3}, [&] {
    std::vector<T> v(12);
    for (auto& u : v) u = rng.uniform(-1, 1);
    return v;
  }());

  auto f = [&]() {
    Tensor<T> w = ad::gumbel_softmax(logits, g, T(0.7));
    return ad::mean_all(ad::mul(ad::matmul(w, mix), ad::matmul(w, mix)));
  };
  REQUIRE(ad::grad_check<T>(f, {logits, mix}) < 1e-4);
}
