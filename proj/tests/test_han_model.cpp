#include <cmath>

#include "doctest.h"
#include "han/gradcheck.hpp"
#include "han/han_model.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace han;

namespace {

ModelConfig tiny(std::uint32_t skip = 2) {
  ModelConfig c;
  c.regions_per_side = 2;
  c.feature_dim = 4;
  c.hidden = 5;
  c.layers = 2;
  c.skip = skip;
  c.frames = 6;
  c.classes = 3;
  return c;
}

}  // namespace

TEST_CASE("layer2_schedule examples") {
  CHECK(layer2_schedule(4, 2) == std::vector<std::size_t>{2, 4});
  CHECK(layer2_schedule(3, 2) == std::vector<std::size_t>{2, 3});
  CHECK(layer2_schedule(5, 1) == std::vector<std::size_t>{1, 2, 3, 4, 5});
  CHECK(layer2_schedule(1, 7) == std::vector<std::size_t>{1});
  CHECK_THROWS_AS(layer2_schedule(0, 2), EmptySequenceError);
}

TEST_CASE("layer2_schedule properties") {
  for (std::size_t T = 1; T <= 60; ++T) {
    for (std::size_t k = 1; k <= 15; ++k) {
      const auto s = layer2_schedule(T, k);
      CHECK(s.back() == T);
      CHECK(s.size() == T / k + (T % k != 0 ? 1 : 0));
      for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] > s[i - 1]);
      for (std::size_t i = 0; i + 1 < s.size(); ++i) CHECK(s[i] % k == 0);
    }
  }
}

TEST_CASE("all-zero model gives uniform class probabilities") {
  const ModelConfig cfg = tiny();
  const HanModel model(cfg);
  Rng rng(1);
  const Sample s = random_sample(cfg, rng);
  const auto r = forward(model, s.cubes_p, s.cubes_q);
  for (double p : r.class_probs) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  for (double h : r.encoding.h_f) CHECK(h == 0.0);
}

TEST_CASE("T=1 steps each layer once for any k") {
  for (std::uint32_t k : {1u, 2u, 5u}) {
    ModelConfig cfg = tiny(k);
    cfg.frames = 1;
    Rng rng(k);
    const HanModel model = HanModel::initialized(cfg, rng);
    const Sample s = random_sample(cfg, rng);
    const auto r = forward(model, s.cubes_p, s.cubes_q);
    CHECK(r.trace.schedule == std::vector<std::size_t>{1});
    CHECK(r.trace.frames.size() == 1);
    CHECK(r.trace.layer2.size() == 1);
  }
}

TEST_CASE("forward invariants on random models") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig cfg = tiny(1 + static_cast<std::uint32_t>(rng.below(4)));
    cfg.frames = 1 + static_cast<std::uint32_t>(rng.below(9));
    HanModel model = HanModel::initialized(cfg, rng);
    for (auto& t : model.tensors()) {
      for (double& v : t.data) v *= 3.0;
    }
    const Sample s = random_sample(cfg, rng);
    const auto r = forward(model, s.cubes_p, s.cubes_q);
    double sum = 0.0;
    for (double p : r.class_probs) {
      CHECK(p > 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    REQUIRE(r.encoding.h_f.size() == 4 * cfg.hidden);
    for (double h : r.encoding.h_f) CHECK(std::abs(h) < 1.0);

    // First frame attends uniformly; afterwards one distribution feeds both streams.
    for (double l : r.trace.frames[0].attention.l) CHECK(l == 0.25);
    for (std::size_t t = 0; t < cfg.frames; ++t) {
      const auto& ft = r.trace.frames[t];
      CHECK(ft.x_p == attend(ft.attention, s.cubes_p[t]));
      CHECK(ft.x_q == attend(ft.attention, s.cubes_q[t]));
    }
    CHECK(r.trace.layer2.size() == r.trace.schedule.size());
  }
}

TEST_CASE("forward input errors") {
  const ModelConfig cfg = tiny();
  Rng rng(3);
  const HanModel model = HanModel::initialized(cfg, rng);
  Sample s = random_sample(cfg, rng);
  std::vector<FeatureCube> shorter(s.cubes_q.begin(), s.cubes_q.end() - 1);
  CHECK_THROWS_AS(forward(model, s.cubes_p, shorter), DimensionError);
  CHECK_THROWS_AS(forward(model, std::vector<FeatureCube>{}, std::vector<FeatureCube>{}),
                  EmptySequenceError);
  std::vector<FeatureCube> p_short(s.cubes_p.begin(), s.cubes_p.end() - 1);
  CHECK_THROWS_AS(forward(model, p_short, shorter), DimensionError);
  s.cubes_p[2] = FeatureCube(9, 4);
  CHECK_THROWS_AS(forward(model, s.cubes_p, s.cubes_q), DimensionError);
}

TEST_CASE("k=1 forward equals the stacked two-layer LSTM oracle") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelConfig cfg = tiny(1);
    const HanModel model = HanModel::initialized(cfg, rng);
    const Sample s = random_sample(cfg, rng);
    const auto r = forward(model, s.cubes_p, s.cubes_q);
    const oracle::StackedLayout layout(cfg);
    const auto ref = oracle::stacked_lstm<double>(layout, oracle::flatten(model), s);
    REQUIRE(ref.h_f.size() == r.encoding.h_f.size());
    for (std::size_t i = 0; i < ref.h_f.size(); ++i) CHECK(std::abs(ref.h_f[i] - r.encoding.h_f[i]) <= 1e-10);
    CHECK(std::abs(ref.loss - sample_loss(model, s)) <= 1e-10);
  }
}

TEST_CASE("k=1 gradients equal the stacked oracle's tape gradients") {
  Rng rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    const ModelConfig cfg = tiny(1);
    const HanModel model = HanModel::initialized(cfg, rng);
    const Sample s = random_sample(cfg, rng);
    const HanGradients g = sample_gradient(model, s);
    const oracle::StackedLayout layout(cfg);
    const std::vector<double> ref = oracle::stacked_gradient(layout, oracle::flatten(model), {&s});
    const std::vector<double> ana = oracle::flatten(g);
    REQUIRE(ref.size() == ana.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - ana[i]));
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
  const ModelConfig cfg = tiny();
  Rng rng(6);
  const HanModel model = HanModel::initialized(cfg, rng);
  const Sample s = random_sample(cfg, rng);
  const auto r = forward(model, s.cubes_p, s.cubes_q);
  const HanGradients g = backward(model, r.trace, Vector(3, 0.0));
  for (const auto& t : g.tensors()) {
    for (double v : t.data) CHECK(v == 0.0);
  }
}

TEST_CASE("full-model gradient check on random tiny configurations") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    ModelConfig cfg = tiny(1 + static_cast<std::uint32_t>(rng.below(3)));
    cfg.regions_per_side = 1 + static_cast<std::uint32_t>(rng.below(3));
    cfg.frames = 2 + static_cast<std::uint32_t>(rng.below(6));
    const HanModel model = HanModel::initialized(cfg, rng);
    const Sample s = random_sample(cfg, rng);
    const GradCheckReport rep = check_gradients(model, s, 2e-3, 1e-4);
    CHECK(rep.blocks.size() == 51);
    for (const auto& b : rep.blocks) {
      INFO(cfg.describe() << " block " << b.name << " rel " << b.max_rel_error);
      CHECK(b.pass);
    }
  }
}

TEST_CASE("backward rejects a trace from another model") {
  Rng rng(8);
  const HanModel a = HanModel::initialized(tiny(2), rng);
  ModelConfig other = tiny(2);
  other.hidden = 4;
  const HanModel b = HanModel::initialized(other, rng);
  const Sample s = random_sample(tiny(2), rng);
  const auto r = forward(a, s.cubes_p, s.cubes_q);
  CHECK_THROWS_AS(backward(b, r.trace, Vector(3, 0.0)), ConsistencyError);
}

TEST_CASE("dropout only acts in train mode") {
  const ModelConfig cfg = tiny();
  Rng rng(9);
  const HanModel model = HanModel::initialized(cfg, rng);
  const Sample s = random_sample(cfg, rng);
  const auto eval = forward(model, s.cubes_p, s.cubes_q);
  Rng r1(1), r2(2);
  const auto e1 = forward(model, s.cubes_p, s.cubes_q, {Mode::kEval, 0.5, &r1});
  const auto e2 = forward(model, s.cubes_p, s.cubes_q, {Mode::kEval, 0.5, &r2});
  CHECK(e1.class_probs == eval.class_probs);
  CHECK(e2.class_probs == eval.class_probs);

  Rng t1(1);
  const auto tr = forward(model, s.cubes_p, s.cubes_q, {Mode::kTrain, 0.5, &t1});
  CHECK(tr.class_probs != eval.class_probs);
  CHECK_THROWS_AS(forward(model, s.cubes_p, s.cubes_q, {Mode::kTrain, 0.5, nullptr}), ConfigError);
}

TEST_CASE("train-mode gradients with dropout match finite differences of the masked loss") {
  const ModelConfig cfg = tiny();
  Rng rng(10);
  const HanModel model = HanModel::initialized(cfg, rng);
  const Sample s = random_sample(cfg, rng);
  auto loss = [&](const HanModel& m) {
    Rng drop(77);
    const auto r = forward(m, s.cubes_p, s.cubes_q, {Mode::kTrain, 0.3, &drop});
    return std::log(std::exp(r.trace.logits[0]) + std::exp(r.trace.logits[1]) +
                    std::exp(r.trace.logits[2])) -
           r.trace.logits[s.label];
  };
  Rng drop(77);
  const auto r = forward(model, s.cubes_p, s.cubes_q, {Mode::kTrain, 0.3, &drop});
  Vector dz = r.class_probs;
  dz[s.label] -= 1.0;
  const HanGradients g = backward(model, r.trace, dz);

  HanModel probe = model;
  auto params = probe.tensors();
  const auto grads = g.tensors();
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Vector saved(params[k].data.begin(), params[k].data.end());
    const Vector num = richardson_gradient(
        [&](std::span<const double> th) {
          std::copy(th.begin(), th.end(), params[k].data.begin());
          return loss(probe);
        },
        saved);
    std::copy(saved.begin(), saved.end(), params[k].data.begin());
    for (std::size_t j = 0; j < num.size(); ++j) worst = std::max(worst, relative_error(grads[k].data[j], num[j]));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("checkpoint round trip and errors") {
  testutil::TempDir dir("ckpt");
  const ModelConfig cfg = tiny();
  Rng rng(11);
  const HanModel model = HanModel::initialized(cfg, rng);
  const Sample s = random_sample(cfg, rng);
  const std::string path = dir.file("model.han");
  save_checkpoint(model, path);

  const HanModel loaded = load_checkpoint(path);
  CHECK(loaded == model);
  CHECK(forward(loaded, s.cubes_p, s.cubes_q).class_probs ==
        forward(model, s.cubes_p, s.cubes_q).class_probs);

  const std::string again = dir.file("again.han");
  save_checkpoint(loaded, again);
  CHECK(testutil::slurp(path) == testutil::slurp(again));

  const auto bytes = testutil::slurp(path);
  CHECK(bytes.size() == 36 + 8 * model.parameter_count());
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "HAN1");

  auto expect_kind = [&](const std::vector<unsigned char>& b, FormatErrorKind kind) {
    testutil::spit(dir.file("bad.han"), b);
    try {
      load_checkpoint(dir.file("bad.han"));
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.kind() == kind);
    }
  };
  auto bad = bytes;
  bad[0] = 'X';
  expect_kind(bad, FormatErrorKind::kBadMagic);
  bad = bytes;
  bad[4] = 2;
  expect_kind(bad, FormatErrorKind::kUnsupportedVersion);
  bad = bytes;
  bad.pop_back();
  expect_kind(bad, FormatErrorKind::kTruncatedPayload);
  bad = bytes;
  bad.resize(20);
  expect_kind(bad, FormatErrorKind::kTruncatedHeader);
  bad = bytes;
  bad.push_back(0);
  expect_kind(bad, FormatErrorKind::kTrailingBytes);
  bad = bytes;
  bad[8 + 12] = 3;  // L = 3
  expect_kind(bad, FormatErrorKind::kShapeInconsistent);

  ModelConfig want = cfg;
  want.hidden = 16;
  ModelConfig eight = cfg;
  eight.hidden = 8;
  Rng rng8(1);
  save_checkpoint(HanModel::initialized(eight, rng8), dir.file("h8.han"));
  try {
    load_checkpoint(dir.file("h8.han"), want);
    FAIL("expected config mismatch");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatErrorKind::kConfigMismatch);
    const std::string msg = e.what();
    CHECK(msg.find("H=8") != std::string::npos);
    CHECK(msg.find("H=16") != std::string::npos);
  }
}

TEST_CASE("forward and backward are deterministic") {
  const ModelConfig cfg = tiny();
  Rng a(12), b(12);
  const HanModel ma = HanModel::initialized(cfg, a);
  const HanModel mb = HanModel::initialized(cfg, b);
  CHECK(ma == mb);
  const Sample sa = random_sample(cfg, a);
  const Sample sb = random_sample(cfg, b);
  CHECK(sample_gradient(ma, sa) == sample_gradient(mb, sb));
}
