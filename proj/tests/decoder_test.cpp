#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "manet/model.hpp"
#include "manet/rng.hpp"

using namespace manet;

namespace {
Tensor rand_chw(int c, int h, int w, RandomSource& rng) {
  std::vector<float> d(static_cast<size_t>(c) * h * w);
  for (auto& v : d) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return Tensor({c, h, w}, std::move(d));
}

std::vector<Tensor> toy_ladder(int c, int grid, RandomSource& rng) {
  auto ch = dfm_channels(c);
  return {rand_chw(ch[0], grid * 4, grid * 4, rng), rand_chw(ch[1], grid * 2, grid * 2, rng),
          rand_chw(ch[2], grid, grid, rng), rand_chw(ch[3], grid / 2, grid / 2, rng)};
}

ModelConfig toy_model_config() {
  ModelConfig cfg;
  cfg.tile = 64;
  cfg.embed_dim = 32;
  cfg.depth = 2;
  cfg.heads = 4;
  cfg.bottleneck = 8;
  cfg.classes = 6;
  return cfg;
}
}  // namespace

TEST_CASE("decoder maps the ladder to full-resolution class logits") {
  ParamRegistry reg(3);
  Decoder dec(reg, 32, 6);
  RandomSource rng(5);
  auto ladder = toy_ladder(32, 4, rng);
  Tensor logits = dec.decode(ladder, 64, 64);
  CHECK(logits.shape() == std::vector<int>{6, 64, 64});
  for (size_t i = 0; i < logits.numel(); ++i) CHECK(std::isfinite(logits.ptr()[i]));
  CHECK(reg.count_prefix("decoder.") == reg.count_prefix_trainable("decoder.", true));
}

TEST_CASE("zero features give exactly uniform class scores") {
  ParamRegistry reg(7);
  Decoder dec(reg, 32, 6);
  auto ch = dfm_channels(32);
  std::vector<Tensor> ladder = {Tensor::zeros({ch[0], 16, 16}), Tensor::zeros({ch[1], 8, 8}),
                                Tensor::zeros({ch[2], 4, 4}), Tensor::zeros({ch[3], 2, 2})};
  Tensor logits = dec.decode(ladder, 64, 64);
  // biases start at zero and every op maps zero to zero
  for (size_t i = 0; i < logits.numel(); ++i) CHECK(logits.ptr()[i] == 0.0f);
  Tensor probs = ops::softmax(logits, 0);
  for (size_t i = 0; i < probs.numel(); ++i) {
    CHECK(probs.ptr()[i] == doctest::Approx(1.0f / 6.0f).epsilon(1e-6));
  }
}

TEST_CASE("ladder contract violations are rejected") {
  ParamRegistry reg(9);
  Decoder dec(reg, 32, 6);
  RandomSource rng(11);
  auto good = toy_ladder(32, 4, rng);

  auto bad_count = good;
  bad_count.pop_back();
  CHECK_THROWS_AS(dec.decode(bad_count, 64, 64), std::invalid_argument);

  auto bad_channels = good;
  bad_channels[1] = rand_chw(99, 8, 8, rng);
  CHECK_THROWS_AS(dec.decode(bad_channels, 64, 64), std::invalid_argument);

  auto bad_spacing = good;
  bad_spacing[1] = rand_chw(16, 6, 6, rng);
  CHECK_THROWS_AS(dec.decode(bad_spacing, 64, 64), std::invalid_argument);

  CHECK_THROWS_AS(dec.decode(good, 128, 128), std::invalid_argument);
}

TEST_CASE("full model forward covers every mode") {
  RandomSource rng(13);
  Tensor optical = rand_chw(3, 64, 64, rng);
  Tensor dsm = rand_chw(1, 64, 64, rng);

  SUBCASE("dual modality with cross-modal adapters") {
    Model model(toy_model_config(), 21);
    Tensor logits = model.forward(optical, dsm);
    CHECK(logits.shape() == std::vector<int>{6, 64, 64});
    for (size_t i = 0; i < logits.numel(); ++i) CHECK(std::isfinite(logits.ptr()[i]));
  }

  SUBCASE("optical-only with standard adapters") {
    ModelConfig cfg = toy_model_config();
    cfg.modality = Modality::kOptical;
    cfg.adapter = AdapterMode::kStandard;
    Model model(cfg, 22);
    Tensor logits = model.forward(optical, Tensor());
    CHECK(logits.shape() == std::vector<int>{6, 64, 64});
  }

  SUBCASE("fusion ablation still decodes") {
    ModelConfig cfg = toy_model_config();
    cfg.dfm = false;
    Model model(cfg, 23);
    Tensor logits = model.forward(optical, dsm);
    CHECK(logits.shape() == std::vector<int>{6, 64, 64});
  }

  SUBCASE("config validation") {
    ModelConfig cfg = toy_model_config();
    cfg.adapter = AdapterMode::kMmAdapter;
    cfg.modality = Modality::kOptical;
    CHECK_THROWS_AS(Model(cfg, 1), std::invalid_argument);

    ModelConfig bad_tile = toy_model_config();
    bad_tile.tile = 60;
    CHECK_THROWS_AS(Model(bad_tile, 1), std::invalid_argument);

    ModelConfig bad_bottleneck = toy_model_config();
    bad_bottleneck.bottleneck = 32;
    CHECK_THROWS_AS(Model(bad_bottleneck, 1), std::invalid_argument);
  }
}

TEST_CASE("trainable set is adapters, fusion and decoder; backbone frozen") {
  Model model(toy_model_config(), 31);
  const ParamRegistry& reg = model.registry();
  CHECK(reg.count_prefix_trainable("encoder.", true) == 0);
  CHECK(reg.count_prefix("adapters.") == reg.count_prefix_trainable("adapters.", true));
  CHECK(reg.count_prefix("dfm.") == reg.count_prefix_trainable("dfm.", true));
  CHECK(reg.count_prefix("decoder.") == reg.count_prefix_trainable("decoder.", true));
  CHECK(reg.count_trainable(true) ==
        reg.count_prefix("adapters.") + reg.count_prefix("dfm.") + reg.count_prefix("decoder."));
}

TEST_CASE("structure registration matches the live model parameter-for-parameter") {
  ModelConfig cfg = toy_model_config();
  Model model(cfg, 41);
  ParamRegistry counted(0, /*counting_only=*/true);
  Model::register_structure(cfg, counted);
  REQUIRE(counted.size() == model.registry().size());
  for (size_t i = 0; i < counted.size(); ++i) {
    CHECK(counted.at(i).name == model.registry().at(i).name);
    CHECK(counted.at(i).shape == model.registry().at(i).shape);
    CHECK(counted.at(i).trainable == model.registry().at(i).trainable);
  }
}

TEST_CASE("identical seeds build identical models") {
  ModelConfig cfg = toy_model_config();
  Model a(cfg, 77), b(cfg, 77);
  RandomSource rng(17);
  Tensor optical = rand_chw(3, 64, 64, rng);
  Tensor dsm = rand_chw(1, 64, 64, rng);
  Tensor la = a.forward(optical, dsm);
  Tensor lb = b.forward(optical, dsm);
  for (size_t i = 0; i < la.numel(); ++i) CHECK(la.ptr()[i] == lb.ptr()[i]);
}
