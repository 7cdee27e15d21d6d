#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "artkit/checkpoint.hpp"
#include "artkit/grad_check.hpp"
#include "artkit/nn.hpp"

using namespace artkit;
using ad::Tensor;
using T = double;

namespace {

Tensor<T> rand_const(Rng& rng, std::vector<int> shape, double lo = -1,
                     double hi = 1) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<T> vals(static_cast<size_t>(n));
  for (auto& v : vals) v = rng.uniform(lo, hi);
  return Tensor<T>::constant(shape, vals);
}

}  // namespace

TEST_CASE("bigru output has length 2h and both directions see a singleton") {
  nn::ParamStore<T> ps(1);
  nn::BiGru<T> gru(ps, "gru", 5, 4);
  Rng rng(2);
  Tensor<T> x = rand_const(rng, {1, 5});

  Tensor<T> out1 = gru({x});
  REQUIRE(out1.shape() == std::vector<int>{1, 8});

  // For a single element the summary is gru_fwd([x]) ++ gru_bwd([x]).
  Tensor<T> manual =
      ad::concat_cols<T>({gru.fwd.run({x}), gru.bwd.run({x})});
  for (int j = 0; j < 8; ++j)
    REQUIRE(out1(0, j) == Catch::Approx(manual(0, j)).epsilon(1e-12));

  Tensor<T> y = rand_const(rng, {1, 5});
  Tensor<T> out3 = gru({x, y, x});
  REQUIRE(out3.shape() == std::vector<int>{1, 8});
  REQUIRE(gru({y}).value() != out1.value());
}

TEST_CASE("bigru gradient matches finite differences") {
  nn::ParamStore<T> ps(3);
  nn::BiGru<T> gru(ps, "gru", 3, 2);
  Rng rng(4);
  std::vector<Tensor<T>> seq = {rand_const(rng, {1, 3}),
                                rand_const(rng, {1, 3}),
                                rand_const(rng, {1, 3})};
  auto f = [&]() {
    Tensor<T> h = gru(seq);
    return ad::mean_all(ad::mul(h, h));
  };
  std::vector<Tensor<T>> params;
  for (const auto& item : ps.items()) params.push_back(item.tensor);
  REQUIRE(ad::grad_check<T>(f, params) < 1e-4);
}

TEST_CASE("single token attends to itself with weight one") {
  Rng rng(5);
  Tensor<T> q = rand_const(rng, {1, 6});
  Tensor<T> w = nn::attention_weights(q, q);
  REQUIRE(w.shape() == std::vector<int>{1, 1});
  REQUIRE(w(0, 0) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cross attention is invariant to permuting context tokens") {
  nn::ParamStore<T> ps(6);
  nn::AttentionBlock<T> block(ps, "blk", 8, 2, 16, /*cross=*/true);
  Rng rng(7);
  Tensor<T> x = rand_const(rng, {3, 8});
  Tensor<T> c0 = rand_const(rng, {1, 8});
  Tensor<T> c1 = rand_const(rng, {1, 8});
  Tensor<T> c2 = rand_const(rng, {1, 8});

  Tensor<T> out_a = block(x, ad::concat_rows<T>({c0, c1, c2}));
  Tensor<T> out_b = block(x, ad::concat_rows<T>({c2, c0, c1}));
  for (size_t i = 0; i < out_a.value().size(); ++i)
    REQUIRE(out_a.value()[i] == Catch::Approx(out_b.value()[i]).margin(1e-10));
}

TEST_CASE("attention block with no context tokens omits the cross term") {
  nn::ParamStore<T> ps(8);
  nn::AttentionBlock<T> block(ps, "blk", 8, 2, 16, /*cross=*/true);
  Rng rng(9);
  Tensor<T> x = rand_const(rng, {2, 8});
  Tensor<T> with_none = block(x, std::nullopt);
  Tensor<T> with_empty = block(x, Tensor<T>::zeros({0, 8}));
  REQUIRE(with_none.value() == with_empty.value());
}

TEST_CASE("attention block gradient matches finite differences") {
  nn::ParamStore<T> ps(10);
  nn::AttentionBlock<T> block(ps, "blk", 4, 2, 8, /*cross=*/true);
  Rng rng(11);
  Tensor<T> x = rand_const(rng, {2, 4});
  Tensor<T> ctx = rand_const(rng, {3, 4});
  auto f = [&]() {
    Tensor<T> h = block(x, ctx);
    return ad::mean_all(ad::mul(h, h));
  };
  std::vector<Tensor<T>> params;
  for (const auto& item : ps.items()) params.push_back(item.tensor);
  REQUIRE(ad::grad_check<T>(f, params) < 1e-4);
}

TEST_CASE("mlp and adamw can fit a tiny regression") {
  nn::ParamStore<T> ps(12);
  nn::Mlp<T> mlp(ps, "mlp", {2, 16, 1}, nn::Act::kTanh);
  nn::AdamW<T> opt(ps, {.lr = 3e-2});
  Rng rng(13);
  Tensor<T> x = rand_const(rng, {16, 2});
  std::vector<T> ys(16);
  for (int i = 0; i < 16; ++i)
    ys[size_t(i)] = 0.5 * x(i, 0) - 0.25 * x(i, 1) + 0.1;
  Tensor<T> y = Tensor<T>::constant({16, 1}, ys);

  double first = 0, last = 0;
  for (int step = 0; step < 200; ++step) {
    ps.zero_grad();
    Tensor<T> loss = ad::mse(mlp(x), y);
    ad::backward(loss);
    opt.step();
    if (step == 0) first = loss.item();
    last = loss.item();
  }
  REQUIRE(last < first * 0.01);
}

TEST_CASE("parameter init does not depend on registration order") {
  nn::ParamStore<T> a(77), b(77);
  Tensor<T> a1 = a.add_glorot("alpha", 3, 4);
  Tensor<T> a2 = a.add_glorot("beta", 3, 4);
  Tensor<T> b2 = b.add_glorot("beta", 3, 4);
  Tensor<T> b1 = b.add_glorot("alpha", 3, 4);
  REQUIRE(a1.value() == b1.value());
  REQUIRE(a2.value() == b2.value());
  REQUIRE(a1.value() != a2.value());
}

TEST_CASE("checkpoint round trip restores values and config") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "artkit_test_ckpt.bin";

  nn::ParamStore<T> ps(14);
  ps.add_glorot("w1", 4, 3);
  ps.add_normal("w2", {2, 5}, 0.3);
  nlohmann::json cfg = {{"d_model", 128}, {"profile", "desk"}};
  nn::save_checkpoint(ps, path.string(), cfg);

  nn::ParamStore<T> fresh(999);
  fresh.add_glorot("w1", 4, 3);
  fresh.add_normal("w2", {2, 5}, 0.3);
  nlohmann::json got = nn::load_checkpoint(fresh, path.string());
  REQUIRE(got == cfg);
  REQUIRE(nn::peek_checkpoint_config(path.string()) == cfg);

  // Values round-trip through f32 storage.
  for (size_t i = 0; i < ps.items().size(); ++i) {
    const auto& orig = ps.items()[i].tensor.value();
    const auto& back = fresh.items()[i].tensor.value();
    for (size_t j = 0; j < orig.size(); ++j)
      REQUIRE(back[j] == Catch::Approx(orig[j]).margin(1e-6));
  }

  // Same store saved twice gives identical bytes.
  fs::path path2 = fs::temp_directory_path() / "artkit_test_ckpt2.bin";
  nn::save_checkpoint(ps, path2.string(), cfg);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  REQUIRE(s1 == s2);
  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("mismatched checkpoint shape is rejected") {
  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "artkit_test_ckpt3.bin";
  nn::ParamStore<T> ps(15);
  ps.add_glorot("w", 4, 3);
  nn::save_checkpoint(ps, path.string());

  nn::ParamStore<T> other(15);
  other.add_glorot("w", 3, 4);
  REQUIRE_THROWS_AS(nn::load_checkpoint(other, path.string()),
                    std::runtime_error);
  fs::remove(path);
}
