#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "manet/adapters.hpp"
#include "manet/rng.hpp"

using namespace manet;

namespace {
Tensor rand2(int r, int c, RandomSource& rng, double lo = -0.5, double hi = 0.5) {
  std::vector<float> d(static_cast<size_t>(r) * c);
  for (auto& v : d) v = static_cast<float>(rng.uniform(lo, hi));
  return Tensor({r, c}, std::move(d));
}
Tensor rand1(int n, RandomSource& rng, double lo = -0.5, double hi = 0.5) {
  std::vector<float> d(static_cast<size_t>(n));
  for (auto& v : d) v = static_cast<float>(rng.uniform(lo, hi));
  return Tensor({n}, std::move(d));
}

LayerNormParams make_ln(int c, RandomSource& rng) {
  return {rand1(c, rng, 0.5, 1.5), rand1(c, rng, -0.2, 0.2)};
}

BottleneckParams make_bottleneck(int c, int c_hat, RandomSource& rng) {
  return {rand2(c, c_hat, rng), rand1(c_hat, rng), rand2(c_hat, c, rng), rand1(c, rng)};
}

// plain double-precision reference for the down/up projection around a layer norm
std::vector<double> reference_adapter(const Tensor& x, const LayerNormParams& ln,
                                      const BottleneckParams& p) {
  int n = x.shape()[0], c = x.shape()[1];
  int c_hat = p.w_d.shape()[1];
  std::vector<double> out(static_cast<size_t>(n) * c, 0.0);
  for (int i = 0; i < n; ++i) {
    const float* row = x.ptr() + static_cast<size_t>(i) * c;
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += row[j];
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= c;
    double inv = 1.0 / std::sqrt(var + 1e-6);
    std::vector<double> normed(c), hidden(c_hat);
    for (int j = 0; j < c; ++j)
      normed[j] = (row[j] - mu) * inv * ln.gamma.ptr()[j] + ln.beta.ptr()[j];
    for (int k = 0; k < c_hat; ++k) {
      double a = p.b_d.ptr()[k];
      for (int j = 0; j < c; ++j) a += normed[j] * p.w_d.ptr()[j * c_hat + k];
      hidden[k] = a > 0.0 ? a : 0.0;
    }
    for (int j = 0; j < c; ++j) {
      double a = p.b_u.ptr()[j];
      for (int k = 0; k < c_hat; ++k) a += hidden[k] * p.w_u.ptr()[k * c + j];
      out[static_cast<size_t>(i) * c + j] = a;
    }
  }
  return out;
}
}  // namespace

TEST_CASE("adapter path matches a scalar-arithmetic reference") {
  RandomSource rng(7);
  int n = 5, c = 4, c_hat = 2;
  Tensor x = rand2(n, c, rng, -1.0, 1.0);
  LayerNormParams ln = make_ln(c, rng);
  BottleneckParams p = make_bottleneck(c, c_hat, rng);
  AdapterParams ad{p, Tensor({1}, {0.5f})};

  Tensor got = adapter_forward(x, ln, ad);
  auto want = reference_adapter(x, ln, p);
  REQUIRE(got.shape() == std::vector<int>{n, c});
  for (size_t i = 0; i < got.numel(); ++i) {
    CHECK(got.ptr()[i] == doctest::Approx(want[i]).epsilon(1e-4));
  }
}

TEST_CASE("zero up-projection silences the adapter") {
  RandomSource rng(8);
  int n = 3, c = 6, c_hat = 2;
  Tensor x = rand2(n, c, rng, -1.0, 1.0);
  LayerNormParams ln = make_ln(c, rng);
  BottleneckParams p = make_bottleneck(c, c_hat, rng);
  p.w_u = Tensor::zeros({c_hat, c});
  p.b_u = Tensor::zeros({c});
  Tensor out = adapter_forward(x, ln, {p, Tensor({1}, {0.5f})});
  for (size_t i = 0; i < out.numel(); ++i) CHECK(out.ptr()[i] == 0.0f);
}

TEST_CASE("relu cuts fully negative pre-activations") {
  int n = 2, c = 4, c_hat = 3;
  Tensor x = Tensor({n, c}, std::vector<float>{1, 2, 3, 4, -1, 0.5f, 2, -3});
  LayerNormParams ln{Tensor::full({c}, 1.0f), Tensor::zeros({c})};
  BottleneckParams p{Tensor::zeros({c, c_hat}), Tensor({c_hat}, {-1.0f, -2.0f, -0.5f}),
                     Tensor::full({c_hat, c}, 1.0f), Tensor::zeros({c})};
  Tensor out = adapter_forward(x, ln, {p, Tensor({1}, {0.5f})});
  for (size_t i = 0; i < out.numel(); ++i) CHECK(out.ptr()[i] == 0.0f);
}

TEST_CASE("scaled residual composition") {
  RandomSource rng(9);
  int n = 4, c = 8;
  Tensor x = rand2(n, c, rng);
  Tensor mlp_out = rand2(n, c, rng);
  Tensor x_a = rand2(n, c, rng);
  Tensor s = Tensor({1}, {0.37f});
  Tensor out = block_residual_std(x, mlp_out, x_a, s);
  for (size_t i = 0; i < out.numel(); ++i) {
    float want = mlp_out.ptr()[i] + 0.37f * x_a.ptr()[i] + x.ptr()[i];
    CHECK(out.ptr()[i] == doctest::Approx(want).epsilon(1e-6));
  }
}

namespace {
struct MmFixture {
  int n = 6, c = 8, c_hat = 2;
  Tensor x, y;
  LayerNormParams ln;
  MlpParams mlp;
  MMAdapterParams mm;

  explicit MmFixture(uint64_t seed, float lambda1, float lambda2) {
    RandomSource rng(seed);
    x = rand2(n, c, rng, -1.0, 1.0);
    y = rand2(n, c, rng, -1.0, 1.0);
    ln = make_ln(c, rng);
    mlp = {rand2(c, 4 * c, rng), rand1(4 * c, rng), rand2(4 * c, c, rng), rand1(c, rng)};
    mm = {make_bottleneck(c, c_hat, rng), make_bottleneck(c, c_hat, rng),
          Tensor({1}, {lambda1}), Tensor({1}, {lambda2})};
  }
};
}  // namespace

TEST_CASE("unit blend weights reduce the dual module to two independent adapters") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    MmFixture f(100 + seed, 1.0f, 1.0f);
    auto [xo, yo] = mmadapter_forward(f.x, f.y, f.ln, f.mlp, f.mm);

    Tensor one({1}, {1.0f});
    Tensor x_std = block_residual_std(
        f.x, mlp_forward(apply_ln(f.x, f.ln), f.mlp),
        adapter_forward(f.x, f.ln, {f.mm.x, one}), one);
    Tensor y_std = block_residual_std(
        f.y, mlp_forward(apply_ln(f.y, f.ln), f.mlp),
        adapter_forward(f.y, f.ln, {f.mm.y, one}), one);

    for (size_t i = 0; i < xo.numel(); ++i) {
      CHECK(std::abs(xo.ptr()[i] - x_std.ptr()[i]) <= 1e-6f);
      CHECK(std::abs(yo.ptr()[i] - y_std.ptr()[i]) <= 1e-6f);
    }
  }
}

TEST_CASE("zero blend weight injects only the opposite branch") {
  MmFixture f(55, 0.0f, 1.0f);
  auto [xo, yo] = mmadapter_forward(f.x, f.y, f.ln, f.mlp, f.mm);
  (void)yo;
  // x output minus its own mlp residual must equal the y-branch adapter signal
  Tensor base = ops::add(mlp_forward(apply_ln(f.x, f.ln), f.mlp), f.x);
  Tensor y_a = bottleneck_forward(apply_ln(f.y, f.ln), f.mm.y);
  for (size_t i = 0; i < xo.numel(); ++i) {
    float injected = xo.ptr()[i] - base.ptr()[i];
    CHECK(injected == doctest::Approx(y_a.ptr()[i]).epsilon(1e-4));
  }
}

TEST_CASE("symmetric configuration yields symmetric outputs") {
  MmFixture f(77, 0.5f, 0.5f);
  f.y = f.x;
  f.mm.y = f.mm.x;
  auto [xo, yo] = mmadapter_forward(f.x, f.y, f.ln, f.mlp, f.mm);
  for (size_t i = 0; i < xo.numel(); ++i) CHECK(xo.ptr()[i] == yo.ptr()[i]);
}

TEST_CASE("gradients reach the blend weights and projections") {
  MmFixture f(88, 0.5f, 0.5f);
  for (Tensor* t : {&f.mm.x.w_d, &f.mm.x.b_d, &f.mm.x.w_u, &f.mm.x.b_u,
                    &f.mm.y.w_d, &f.mm.y.b_d, &f.mm.y.w_u, &f.mm.y.b_u,
                    &f.mm.lambda1, &f.mm.lambda2}) {
    t->impl()->requires_grad = true;
  }
  auto [xo, yo] = mmadapter_forward(f.x, f.y, f.ln, f.mlp, f.mm);
  Tensor loss = ops::mean(ops::add(xo, yo));
  loss.backward();

  auto nonzero_grad = [](const Tensor& t) {
    if (t.impl()->grad.empty()) return false;
    for (float g : t.impl()->grad)
      if (g != 0.0f) return true;
    return false;
  };
  CHECK(nonzero_grad(f.mm.x.w_u));
  CHECK(nonzero_grad(f.mm.y.w_u));
  CHECK(nonzero_grad(f.mm.lambda1));
  CHECK(nonzero_grad(f.mm.lambda2));
}

TEST_CASE("registered module starts at the documented initialisation") {
  ParamRegistry reg(123);
  register_mmadapter(reg, "adapters.block0.mm", 16, 4);
  const Parameter* wu = reg.find("adapters.block0.mm.x.w_u");
  const Parameter* l1 = reg.find("adapters.block0.mm.lambda1");
  const Parameter* wd = reg.find("adapters.block0.mm.x.w_d");
  REQUIRE(wu != nullptr);
  REQUIRE(l1 != nullptr);
  REQUIRE(wd != nullptr);
  for (size_t i = 0; i < wu->tensor.numel(); ++i) CHECK(wu->tensor.ptr()[i] == 0.0f);
  CHECK(l1->tensor.ptr()[0] == 0.5f);
  CHECK(l1->clamp_unit_interval);
  CHECK(l1->trainable);
  bool any_nonzero = false;
  for (size_t i = 0; i < wd->tensor.numel(); ++i)
    if (wd->tensor.ptr()[i] != 0.0f) any_nonzero = true;
  CHECK(any_nonzero);
  // truncated draw stays within two standard deviations
  for (size_t i = 0; i < wd->tensor.numel(); ++i)
    CHECK(std::abs(wd->tensor.ptr()[i]) <= 0.04f + 1e-7f);
}
