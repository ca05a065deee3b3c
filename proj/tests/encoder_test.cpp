#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>

#include "manet/encoder.hpp"
#include "manet/rng.hpp"

using namespace manet;

namespace {
EncoderConfig toy_config() {
  EncoderConfig cfg;
  cfg.image_size = 64;
  cfg.patch_size = 16;
  cfg.embed_dim = 32;
  cfg.depth = 2;
  cfg.heads = 4;
  cfg.mlp_ratio = 4;
  return cfg;
}

Tensor random_image(int channels, int hw, RandomSource& rng) {
  std::vector<float> d(static_cast<size_t>(channels) * hw * hw);
  for (auto& v : d) v = static_cast<float>(rng.uniform());
  return Tensor({channels, hw, hw}, std::move(d));
}
}  // namespace

TEST_CASE("backbone element count matches the published scale") {
  EncoderConfig vitb;  // defaults: 1024px, c=768, depth 12
  auto t0 = std::chrono::steady_clock::now();
  size_t count = SamEncoder::count_parameters(vitb);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // patch embed 590,592 + positional 3,145,728 + 12 x 7,087,872
  CHECK(count == 88790784ULL);
  double reference = 89.7e6;
  CHECK(std::abs(static_cast<double>(count) - reference) / reference < 0.05);
  CHECK(secs < 1.0);
}

TEST_CASE("depth-0 count follows the closed form") {
  EncoderConfig cfg = toy_config();
  cfg.depth = 0;
  size_t expected = 16 * 16 * 3 * 32 + 32   // patch kernels + bias
                    + 4 * 4 * 32;           // positional table
  CHECK(SamEncoder::count_parameters(cfg) == expected);
}

TEST_CASE("counting registry agrees with an allocating one") {
  EncoderConfig cfg = toy_config();
  ParamRegistry reg(3);
  SamEncoder enc(cfg, reg, true);
  CHECK(SamEncoder::count_parameters(cfg) == reg.count_prefix("encoder."));
  // every backbone tensor is frozen
  CHECK(reg.count_prefix_trainable("encoder.", true) == 0);
}

TEST_CASE("patch_embed produces the token grid") {
  ParamRegistry reg(5);
  SamEncoder enc(toy_config(), reg, true);
  RandomSource rng(9);
  Tensor img = random_image(3, 64, rng);
  Tensor tokens = enc.patch_embed(img);
  CHECK(tokens.shape() == std::vector<int>{16, 32});

  // zero image -> bias broadcast plus positional table
  Tensor zeros = Tensor::zeros({3, 64, 64});
  Tensor zt = enc.patch_embed(zeros);
  const Parameter* bias = reg.find("encoder.patch_embed.bias");
  const Parameter* pos = reg.find("encoder.pos_embed");
  REQUIRE(bias != nullptr);
  REQUIRE(pos != nullptr);
  for (int t = 0; t < 16; ++t) {
    for (int j = 0; j < 32; ++j) {
      float expect = bias->tensor.ptr()[j] + pos->tensor.ptr()[t * 32 + j];
      CHECK(zt.ptr()[t * 32 + j] == doctest::Approx(expect).epsilon(1e-6));
    }
  }

  CHECK_THROWS_AS(enc.patch_embed(Tensor::zeros({1, 64, 64})), std::invalid_argument);
  CHECK_THROWS_AS(enc.patch_embed(Tensor::zeros({3, 48, 48})), std::invalid_argument);
}

TEST_CASE("lift_dsm replicates the channel bit-identically") {
  RandomSource rng(4);
  Tensor dsm = random_image(1, 16, rng);
  Tensor lifted = SamEncoder::lift_dsm(dsm);
  CHECK(lifted.shape() == std::vector<int>{3, 16, 16});
  for (int ch = 0; ch < 3; ++ch) {
    for (size_t i = 0; i < dsm.numel(); ++i) {
      CHECK(lifted.ptr()[ch * dsm.numel() + i] == dsm.ptr()[i]);
    }
  }
  CHECK_THROWS_AS(SamEncoder::lift_dsm(Tensor::zeros({2, 8, 8})), std::invalid_argument);
}

TEST_CASE("shared weights: identical inputs give bitwise-identical branches") {
  ParamRegistry reg(11);
  SamEncoder enc(toy_config(), reg, true);
  install_adapters(enc, 8, AdapterMode::kNone);
  RandomSource rng(2);
  Tensor dsm = random_image(1, 64, rng);
  Tensor img = SamEncoder::lift_dsm(dsm);
  auto [fx, fy] = enc.encode_pair(img, dsm);
  CHECK(fx.shape() == std::vector<int>{32, 4, 4});
  CHECK(fy.shape() == std::vector<int>{32, 4, 4});
  for (size_t i = 0; i < fx.numel(); ++i) CHECK(fx.ptr()[i] == fy.ptr()[i]);
}

TEST_CASE("branches reference the same backbone tensor objects") {
  ParamRegistry reg(12);
  SamEncoder enc(toy_config(), reg, true);
  const Parameter* wq = reg.find("encoder.block0.attn.wq");
  REQUIRE(wq != nullptr);
  CHECK(enc.blocks()[0].attn.wq.impl().get() == wq->tensor.impl().get());
}

TEST_CASE("differing modalities produce finite, distinct features") {
  ParamRegistry reg(13);
  SamEncoder enc(toy_config(), reg, true);
  RandomSource rng(21);
  Tensor img = random_image(3, 64, rng);
  Tensor dsm = random_image(1, 64, rng);
  auto [fx, fy] = enc.encode_pair(img, dsm);
  bool all_finite = true, any_diff = false;
  for (size_t i = 0; i < fx.numel(); ++i) {
    if (!std::isfinite(fx.ptr()[i]) || !std::isfinite(fy.ptr()[i])) all_finite = false;
    if (fx.ptr()[i] != fy.ptr()[i]) any_diff = true;
  }
  CHECK(all_finite);
  CHECK(any_diff);

  CHECK_THROWS_AS(enc.encode_pair(img, Tensor::zeros({1, 32, 32})), std::invalid_argument);
}

TEST_CASE("attention weights are row-stochastic") {
  RandomSource rng(31);
  int n = 16, c = 32, heads = 4;
  auto rand2 = [&](int r, int co) {
    std::vector<float> d(static_cast<size_t>(r) * co);
    for (auto& v : d) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    return Tensor({r, co}, std::move(d));
  };
  auto rand1 = [&](int r) {
    std::vector<float> d(static_cast<size_t>(r));
    for (auto& v : d) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    return Tensor({r}, std::move(d));
  };
  AttentionParams p{rand2(c, c), rand1(c), rand2(c, c), rand1(c),
                    rand2(c, c), rand1(c), rand2(c, c), rand1(c)};
  Tensor x = rand2(n, c);
  Tensor attn;
  Tensor out = attention_forward(x, p, heads, &attn);
  CHECK(out.shape() == std::vector<int>{n, c});
  REQUIRE(attn.shape() == std::vector<int>{heads, n, n});
  for (int h = 0; h < heads; ++h) {
    for (int r = 0; r < n; ++r) {
      double s = 0.0;
      for (int col = 0; col < n; ++col) s += attn.ptr()[(h * n + r) * n + col];
      CHECK(std::abs(s - 1.0) < 1e-5);
    }
  }
}

TEST_CASE("adapter installation ledger") {
  int c = 32, c_hat = 8, depth = 2;
  size_t per_adapter = static_cast<size_t>(2 * c * c_hat + c_hat + c + 1);

  SUBCASE("standard: two adapters per block per branch") {
    ParamRegistry reg(41);
    SamEncoder enc(toy_config(), reg, true);
    install_adapters(enc, c_hat, AdapterMode::kStandard);
    CHECK(reg.count_prefix("adapters.") == static_cast<size_t>(depth) * 2 * 2 * per_adapter);
    CHECK(reg.count_prefix_trainable("adapters.", false) == 0);
  }

  SUBCASE("mmadapter swaps the MLP-stage pair for one dual-projection module") {
    ParamRegistry reg_std(42), reg_mm(42);
    SamEncoder a(toy_config(), reg_std, true);
    SamEncoder b(toy_config(), reg_mm, true);
    install_adapters(a, c_hat, AdapterMode::kStandard);
    install_adapters(b, c_hat, AdapterMode::kMmAdapter);
    // net ledger: per block, +2 lambdas and -2 s scalars -> equal totals
    CHECK(reg_mm.count_prefix("adapters.") == reg_std.count_prefix("adapters."));
    // and the structural diff is visible by name
    CHECK(reg_mm.find("adapters.block0.mm.lambda1") != nullptr);
    CHECK(reg_mm.find("adapters.block0.mlp_x.s") == nullptr);
    CHECK(reg_std.find("adapters.block0.mlp_x.s") != nullptr);
  }

  SUBCASE("none leaves zero trainable encoder parameters") {
    ParamRegistry reg(43);
    SamEncoder enc(toy_config(), reg, true);
    install_adapters(enc, c_hat, AdapterMode::kNone);
    CHECK(reg.count_trainable(true) == 0);
  }

  SUBCASE("reinstall and invalid combinations are rejected") {
    ParamRegistry reg(44);
    SamEncoder enc(toy_config(), reg, true);
    install_adapters(enc, c_hat, AdapterMode::kStandard);
    CHECK_THROWS_AS(install_adapters(enc, c_hat, AdapterMode::kStandard), std::logic_error);

    ParamRegistry reg2(45);
    SamEncoder single(toy_config(), reg2, false);
    CHECK_THROWS_AS(install_adapters(single, c_hat, AdapterMode::kMmAdapter),
                    std::invalid_argument);
  }
}
