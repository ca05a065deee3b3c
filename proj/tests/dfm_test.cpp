#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "manet/dfm.hpp"
#include "manet/rng.hpp"

using namespace manet;

namespace {
Tensor rand_chw(int c, int h, int w, RandomSource& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<float> d(static_cast<size_t>(c) * h * w);
  for (auto& v : d) v = static_cast<float>(rng.uniform(lo, hi));
  return Tensor({c, h, w}, std::move(d));
}

void zero_param(ParamRegistry& reg, const std::string& name) {
  Parameter* p = reg.find(name);
  REQUIRE(p != nullptr);
  std::fill(p->tensor.impl()->data.begin(), p->tensor.impl()->data.end(), 0.0f);
}

void zero_se(ParamRegistry& reg, const std::string& prefix) {
  for (const char* leaf : {".w1", ".b1", ".w2", ".b2"}) {
    zero_param(reg, prefix + leaf);
  }
}

// registration leaves w2/b2 at zero (identity start); give every excitation
// weight a generic value when a test needs non-trivial gates
void randomize_se(ParamRegistry& reg, const std::string& prefix, RandomSource& rng) {
  for (const char* leaf : {".w1", ".b1", ".w2", ".b2"}) {
    Parameter* p = reg.find(prefix + leaf);
    REQUIRE(p != nullptr);
    for (auto& v : p->tensor.impl()->data) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  }
}
}  // namespace

TEST_CASE("channel plan follows the quarter/half/full/full split") {
  CHECK(dfm_channels(32) == std::vector<int>{8, 16, 32, 32});
  CHECK(dfm_channels(768) == std::vector<int>{192, 384, 768, 768});
  CHECK_THROWS_AS(dfm_channels(2), std::invalid_argument);
  CHECK_THROWS_AS(dfm_channels(30), std::invalid_argument);
}

TEST_CASE("pyramid emits the four-rung scale ladder") {
  RandomSource rng(3);
  ParamRegistry reg(5);
  PyramidParams pyr = register_pyramid(reg, "dfm.pyramid_x", 32);

  SUBCASE("16x16 grid") {
    Tensor f = rand_chw(32, 16, 16, rng);
    auto levels = pyramid_expand(f, pyr);
    REQUIRE(levels.size() == 4);
    CHECK(levels[0].shape() == std::vector<int>{8, 64, 64});
    CHECK(levels[1].shape() == std::vector<int>{16, 32, 32});
    CHECK(levels[2].shape() == std::vector<int>{32, 16, 16});
    CHECK(levels[3].shape() == std::vector<int>{32, 8, 8});
  }
  SUBCASE("4x4 grid") {
    Tensor f = rand_chw(32, 4, 4, rng);
    auto levels = pyramid_expand(f, pyr);
    CHECK(levels[0].shape() == std::vector<int>{8, 16, 16});
    CHECK(levels[3].shape() == std::vector<int>{32, 2, 2});
  }
  SUBCASE("odd extent rejected") {
    Tensor f = rand_chw(32, 5, 5, rng);
    CHECK_THROWS_AS(pyramid_expand(f, pyr), std::invalid_argument);
  }
}

TEST_CASE("excitation gates are strictly inside (0,1)") {
  RandomSource rng(11);
  ParamRegistry reg(7);
  SEFusionParams se = register_se(reg, "dfm.se0", 16);
  randomize_se(reg, "dfm.se0.x", rng);
  Tensor f = rand_chw(16, 8, 8, rng, -3.0, 3.0);
  Tensor gate = se_gate(f, se.x);
  REQUIRE(gate.shape() == std::vector<int>{16});
  for (size_t i = 0; i < gate.numel(); ++i) {
    CHECK(gate.ptr()[i] > 0.0f);
    CHECK(gate.ptr()[i] < 1.0f);
  }
}

TEST_CASE("zeroed excitation weights reduce fusion to the plain average") {
  RandomSource rng(13);
  ParamRegistry reg(9);
  SEFusionParams se = register_se(reg, "dfm.se0", 12);
  zero_se(reg, "dfm.se0.x");
  zero_se(reg, "dfm.se0.y");
  Tensor fx = rand_chw(12, 6, 6, rng);
  Tensor fy = rand_chw(12, 6, 6, rng);
  Tensor fused = se_fuse(fx, fy, se);
  for (size_t i = 0; i < fused.numel(); ++i) {
    float want = 0.5f * (fx.ptr()[i] + fy.ptr()[i]);
    CHECK(std::abs(fused.ptr()[i] - want) <= 1e-6f);
  }
}

TEST_CASE("a freshly registered fusion starts as the exact average") {
  // w2/b2 init to zero, so an untrained module must behave like mean fusion
  // and the squeeze stage only unlocks once w2 moves off zero.
  RandomSource rng(14);
  ParamRegistry reg(12);
  SEFusionParams se = register_se(reg, "dfm.se0", 8);
  Tensor fx = rand_chw(8, 4, 4, rng);
  Tensor fy = rand_chw(8, 4, 4, rng);
  Tensor fused = se_fuse(fx, fy, se);
  for (size_t i = 0; i < fused.numel(); ++i) {
    CHECK(fused.ptr()[i] == 0.5f * (fx.ptr()[i] + fy.ptr()[i]));
  }

  auto grad_is_zero = [&](const std::string& name) {
    const Parameter* p = reg.find(name);
    REQUIRE(p != nullptr);
    if (p->tensor.impl()->grad.empty()) return true;
    for (float g : p->tensor.impl()->grad)
      if (g != 0.0f) return false;
    return true;
  };
  ops::mean(se_fuse(fx, fy, se)).backward();
  CHECK(grad_is_zero("dfm.se0.x.w1"));   // blocked by the zero w2
  CHECK(!grad_is_zero("dfm.se0.x.w2"));  // the gate itself learns immediately
}

TEST_CASE("a silent second modality leaves only the gated first") {
  RandomSource rng(17);
  ParamRegistry reg(10);
  SEFusionParams se = register_se(reg, "dfm.se0", 8);
  randomize_se(reg, "dfm.se0.x", rng);
  randomize_se(reg, "dfm.se0.y", rng);
  Tensor fx = rand_chw(8, 4, 4, rng);
  Tensor fy = Tensor::zeros({8, 4, 4});
  Tensor fused = se_fuse(fx, fy, se);
  Tensor gx = se_gate(fx, se.x);
  for (int c = 0; c < 8; ++c) {
    for (int i = 0; i < 16; ++i) {
      float want = gx.ptr()[c] * fx.ptr()[c * 16 + i];
      CHECK(fused.ptr()[c * 16 + i] == doctest::Approx(want).epsilon(1e-5));
    }
  }
}

TEST_CASE("fusion matches a scalar-arithmetic reference") {
  RandomSource rng(19);
  ParamRegistry reg(21);
  int c = 4;
  SEFusionParams se = register_se(reg, "dfm.se0", c);
  randomize_se(reg, "dfm.se0.x", rng);
  randomize_se(reg, "dfm.se0.y", rng);
  Tensor fx = rand_chw(c, 2, 2, rng);
  Tensor fy = rand_chw(c, 2, 2, rng);
  Tensor fused = se_fuse(fx, fy, se);

  auto ref_gate = [&](const Tensor& f, const SEPathParams& p) {
    int mid = p.w1.shape()[1];
    std::vector<double> gap(c, 0.0), hidden(mid), gate(c);
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < 4; ++i) gap[ch] += f.ptr()[ch * 4 + i];
      gap[ch] /= 4.0;
    }
    for (int m = 0; m < mid; ++m) {
      double a = p.b1.ptr()[m];
      for (int ch = 0; ch < c; ++ch) a += gap[ch] * p.w1.ptr()[ch * mid + m];
      hidden[m] = a > 0.0 ? a : 0.0;
    }
    for (int ch = 0; ch < c; ++ch) {
      double a = p.b2.ptr()[ch];
      for (int m = 0; m < mid; ++m) a += hidden[m] * p.w2.ptr()[m * c + ch];
      gate[ch] = 1.0 / (1.0 + std::exp(-a));
    }
    return gate;
  };
  auto gx = ref_gate(fx, se.x);
  auto gy = ref_gate(fy, se.y);
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < 4; ++i) {
      double want = gx[ch] * fx.ptr()[ch * 4 + i] + gy[ch] * fy.ptr()[ch * 4 + i];
      CHECK(fused.ptr()[ch * 4 + i] == doctest::Approx(want).epsilon(1e-4));
    }
  }
}

TEST_CASE("fusion is linear once the gates are frozen at one half") {
  RandomSource rng(23);
  ParamRegistry reg(25);
  SEFusionParams se = register_se(reg, "dfm.se0", 8);
  zero_se(reg, "dfm.se0.x");
  zero_se(reg, "dfm.se0.y");
  Tensor fx = rand_chw(8, 4, 4, rng);
  Tensor fy = rand_chw(8, 4, 4, rng);
  Tensor base = se_fuse(fx, fy, se);
  Tensor scaled = se_fuse(ops::scale(fx, 3.0f), ops::scale(fy, 3.0f), se);
  for (size_t i = 0; i < base.numel(); ++i) {
    CHECK(scaled.ptr()[i] == doctest::Approx(3.0f * base.ptr()[i]).epsilon(1e-5));
  }
}

TEST_CASE("dual-branch module fuses every rung and keeps everything trainable") {
  ParamRegistry reg(31);
  DeepFusion dfm(reg, 32, /*dual=*/true, /*se_enabled=*/true);
  RandomSource rng(29);
  for (int i = 0; i < 4; ++i) {
    randomize_se(reg, "dfm.se" + std::to_string(i) + ".x", rng);
    randomize_se(reg, "dfm.se" + std::to_string(i) + ".y", rng);
  }
  Tensor fx = rand_chw(32, 8, 8, rng);
  Tensor fy = rand_chw(32, 8, 8, rng);
  auto levels = dfm.forward_pair(fx, fy);
  REQUIRE(levels.size() == 4);
  CHECK(levels[0].shape() == std::vector<int>{8, 32, 32});
  CHECK(levels[3].shape() == std::vector<int>{32, 4, 4});
  for (const auto& lv : levels) {
    for (size_t i = 0; i < lv.numel(); ++i) CHECK(std::isfinite(lv.ptr()[i]));
  }
  CHECK(reg.count_prefix("dfm.") == reg.count_prefix_trainable("dfm.", true));

  // gradient reaches both modality pyramids through the fused output
  Tensor loss = ops::mean(levels[0]);
  for (size_t i = 1; i < levels.size(); ++i) loss = ops::add(loss, ops::mean(levels[i]));
  loss.backward();
  auto grad_nonzero = [&](const std::string& name) {
    const Parameter* p = reg.find(name);
    REQUIRE(p != nullptr);
    if (p->tensor.impl()->grad.empty()) return false;
    for (float g : p->tensor.impl()->grad)
      if (g != 0.0f) return true;
    return false;
  };
  CHECK(grad_nonzero("dfm.pyramid_x.up4.weight"));
  CHECK(grad_nonzero("dfm.pyramid_y.up4.weight"));
  CHECK(grad_nonzero("dfm.se0.x.w1"));
  CHECK(grad_nonzero("dfm.se0.y.w1"));
}

TEST_CASE("disabled fusion averages the two pyramids") {
  ParamRegistry reg(33);
  DeepFusion dfm(reg, 32, true, /*se_enabled=*/false);
  CHECK(reg.count_prefix("dfm.se0.") == 0);
  RandomSource rng(35);
  Tensor fx = rand_chw(32, 4, 4, rng);
  Tensor fy = rand_chw(32, 4, 4, rng);
  auto levels = dfm.forward_pair(fx, fy);
  auto lx = pyramid_expand(fx, dfm.pyramid_x());
  auto ly = pyramid_expand(fy, dfm.pyramid_y());
  for (size_t l = 0; l < 4; ++l) {
    for (size_t i = 0; i < levels[l].numel(); ++i) {
      float want = 0.5f * (lx[l].ptr()[i] + ly[l].ptr()[i]);
      CHECK(levels[l].ptr()[i] == doctest::Approx(want).epsilon(1e-6));
    }
  }
}

TEST_CASE("single-modality module gates its own pyramid only") {
  ParamRegistry reg(37);
  DeepFusion dfm(reg, 32, /*dual=*/false, true);
  CHECK(reg.find("dfm.pyramid_y.up4.weight") == nullptr);
  CHECK(reg.find("dfm.se0.y.w1") == nullptr);
  CHECK(reg.find("dfm.se0.x.w1") != nullptr);
  RandomSource rng(39);
  Tensor fx = rand_chw(32, 4, 4, rng);
  auto levels = dfm.forward_single(fx);
  REQUIRE(levels.size() == 4);
  CHECK(levels[0].shape() == std::vector<int>{8, 16, 16});
  CHECK_THROWS_AS(dfm.forward_pair(fx, fx), std::logic_error);
}
