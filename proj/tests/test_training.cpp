#include <cmath>

#include "doctest.h"
#include "han/gradcheck.hpp"
#include "han/training.hpp"
#include "oracles.hpp"

using namespace han;

namespace {

ModelConfig tiny(std::uint32_t skip = 2) {
  ModelConfig c;
  c.skip = skip;
  return c;
}

Dataset random_dataset(const ModelConfig& cfg, std::size_t n, Rng& rng) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    d.push_back(random_sample(cfg, rng));
    d.back().id = "r" + std::to_string(i);
  }
  return d;
}

std::vector<TensorRef> as_refs(std::vector<Vector>& tensors) {
  std::vector<TensorRef> out;
  for (std::size_t i = 0; i < tensors.size(); ++i) out.push_back({"t" + std::to_string(i), tensors[i]});
  return out;
}

}  // namespace

TEST_CASE("nll_loss examples") {
  CHECK(nll_loss(Vector{0.25, 0.25, 0.25, 0.25}, 2) == doctest::Approx(1.3862944).epsilon(1e-7));
  const Vector logits{0.0, 50.0, 0.0};
  CHECK(nll_loss_from_logits(logits, 1) <= 1e-9);
  CHECK(nll_loss(stable_softmax(logits), 1) <= 1e-9);
  CHECK_THROWS_AS(nll_loss(Vector{0.5, 0.5}, 2), ConfigError);
  CHECK_THROWS_AS(nll_grad_logits(Vector{0.5, 0.5}, 5), ConfigError);
}

TEST_CASE("logit gradient p - y matches finite differences") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    Vector z(5);
    for (double& v : z) v = rng.uniform(-4.0, 4.0);
    const std::size_t label = rng.below(5);
    const Vector ana = nll_grad_logits(stable_softmax(z), label);
    const Vector num = finite_diff_gradient(
        [&](std::span<const double> t) { return nll_loss_from_logits(t, label); }, z);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(ana[i] - num[i]) <= 1e-6);
  }
}

TEST_CASE("dropout examples") {
  Rng rng(2);
  const Vector v{1.0, -2.0, 3.0};
  SUBCASE("rate 0 is the identity with an all-ones mask") {
    const auto r = dropout_apply(v, 0.0, Mode::kTrain, rng);
    CHECK(r.output == v);
    CHECK(r.mask == Vector{1.0, 1.0, 1.0});
    CHECK(rng.counter() == 0);
  }
  SUBCASE("eval mode is the identity for any rate") {
    for (double rate : {0.1, 0.5, 0.9}) CHECK(dropout_apply(v, rate, Mode::kEval, rng).output == v);
    CHECK(rng.counter() == 0);
  }
  SUBCASE("rate outside [0,1) is rejected") {
    CHECK_THROWS_AS(dropout_apply(v, 1.0, Mode::kTrain, rng), ConfigError);
    CHECK_THROWS_AS(dropout_apply(v, 1.5, Mode::kTrain, rng), ConfigError);
    CHECK_THROWS_AS(dropout_apply(v, -0.1, Mode::kTrain, rng), ConfigError);
  }
  SUBCASE("survivors are scaled by 1/(1-rate), the rest are zero") {
    const auto r = dropout_apply(v, 0.25, Mode::kTrain, rng);
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(r.output[i] == (r.mask[i] == 1.0 ? v[i] / 0.75 : 0.0));
    }
  }
}

TEST_CASE("dropout Monte-Carlo mean matches the input") {
  Rng rng(3);
  const Vector ones(1'000'000, 1.0);
  const auto r = dropout_apply(ones, 0.5, Mode::kTrain, rng);
  double sum = 0.0;
  for (double x : r.output) sum += x;
  CHECK(std::abs(sum / 1e6 - 1.0) <= 0.01);
}

TEST_CASE("clip_global_norm examples") {
  SUBCASE("below the ceiling nothing changes") {
    std::vector<Vector> g{{1.2, 0.0}, {1.6}};
    const auto refs = as_refs(g);
    CHECK(clip_global_norm(refs, 5.0) == doctest::Approx(2.0));
    CHECK(g[0] == Vector{1.2, 0.0});
    CHECK(g[1] == Vector{1.6});
  }
  SUBCASE("norm 10 against ceiling 5 halves every element") {
    std::vector<Vector> g{{6.0}, {0.0, 8.0}};
    const auto refs = as_refs(g);
    CHECK(clip_global_norm(refs, 5.0) == doctest::Approx(10.0));
    CHECK(g[0][0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(g[1][1] == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(std::abs(global_norm(refs) - 5.0) <= 1e-12);
  }
  SUBCASE("zero gradients stay zero") {
    std::vector<Vector> g{{0.0, 0.0}, {0.0}};
    const auto refs = as_refs(g);
    CHECK(clip_global_norm(refs, 5.0) == 0.0);
    CHECK(g[0] == Vector{0.0, 0.0});
  }
  SUBCASE("a non-finite entry is reported by tensor name") {
    std::vector<Vector> g{{1.0}, {NAN}};
    const auto refs = as_refs(g);
    try {
      clip_global_norm(refs, 5.0);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("t1") != std::string::npos);
    }
  }
}

TEST_CASE("clip_global_norm never increases the norm") {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Vector> g(1 + rng.below(4));
    for (auto& t : g) {
      t.resize(1 + rng.below(6));
      for (double& v : t) v = rng.normal() * std::pow(10.0, rng.uniform(-3.0, 3.0));
    }
    const auto refs = as_refs(g);
    const double ceiling = rng.uniform(0.01, 10.0);
    const double before = global_norm(refs);
    const std::vector<Vector> saved = g;
    clip_global_norm(refs, ceiling);
    const double after = global_norm(refs);
    CHECK(after <= before * (1.0 + 1e-15));
    CHECK(after <= ceiling + 1e-12);
    // Direction is preserved: every element shares one scale factor.
    const double scale = before > ceiling ? ceiling / before : 1.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      for (std::size_t j = 0; j < g[k].size(); ++j) {
        CHECK(g[k][j] == doctest::Approx(saved[k][j] * scale).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("adadelta first step with g=1") {
  std::vector<Vector> x{{0.0}}, g{{1.0}};
  const auto xr = as_refs(x), gr = as_refs(g);
  AdadeltaState st = AdadeltaState::zeros_like(xr);
  adadelta_step(xr, gr, st, 0.95, 1e-6);
  CHECK(st.sq_grad[0][0] == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(std::abs(x[0][0] - (-0.0044721)) <= 1e-6);
  CHECK(x[0][0] == doctest::Approx(-std::sqrt(1e-6) / std::sqrt(0.050001)).epsilon(1e-14));
}

TEST_CASE("adadelta zero gradient decays accumulators and leaves parameters") {
  std::vector<Vector> x{{1.0, -2.0}}, g{{0.0, 0.0}};
  const auto xr = as_refs(x), gr = as_refs(g);
  AdadeltaState st = AdadeltaState::zeros_like(xr);
  st.sq_grad[0] = {0.4, 0.2};
  st.sq_update[0] = {0.1, 0.3};
  adadelta_step(xr, gr, st, 0.95, 1e-6);
  CHECK(x[0] == Vector{1.0, -2.0});
  CHECK(st.sq_grad[0][0] == doctest::Approx(0.38));
  CHECK(st.sq_grad[0][1] == doctest::Approx(0.19));
  CHECK(st.sq_update[0][0] == doctest::Approx(0.095));
  CHECK(st.sq_update[0][1] == doctest::Approx(0.285));
}

TEST_CASE("adadelta shape mismatch is a dimension error") {
  std::vector<Vector> x{{1.0, 2.0}}, g{{1.0}};
  const auto xr = as_refs(x), gr = as_refs(g);
  AdadeltaState st = AdadeltaState::zeros_like(xr);
  CHECK_THROWS_AS(adadelta_step(xr, gr, st, 0.95, 1e-6), DimensionError);
}

TEST_CASE("adadelta sign and accumulator properties over 10^4 random steps") {
  Rng rng(5);
  std::vector<Vector> x{Vector(8, 0.0)}, g{Vector(8, 0.0)};
  const auto xr = as_refs(x), gr = as_refs(g);
  AdadeltaState st = AdadeltaState::zeros_like(xr);
  for (int step = 0; step < 10000; ++step) {
    for (double& v : g[0]) v = rng.below(5) == 0 ? 0.0 : rng.normal() * std::pow(10.0, rng.uniform(-4.0, 2.0));
    const Vector before = x[0];
    adadelta_step(xr, gr, st, 0.95, 1e-6);
    for (std::size_t j = 0; j < 8; ++j) {
      const double d = x[0][j] - before[j];
      if (g[0][j] > 0.0) CHECK(d < 0.0);
      if (g[0][j] < 0.0) CHECK(d > 0.0);
      if (g[0][j] == 0.0) CHECK(d == 0.0);
      CHECK(st.sq_grad[0][j] >= 0.0);
      CHECK(st.sq_update[0][j] >= 0.0);
      CHECK(std::isfinite(st.sq_grad[0][j]));
      CHECK(std::isfinite(st.sq_update[0][j]));
    }
  }
}

TEST_CASE("shuffled_indices is a seeded permutation") {
  Rng a(6), b(6);
  const auto p = shuffled_indices(100, a);
  CHECK(p == shuffled_indices(100, b));
  std::vector<std::size_t> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 100; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("single-sample overfit") {
  const ModelConfig cfg = tiny();
  Rng rng(7);
  HanModel model = HanModel::initialized(cfg, rng);
  const Dataset data = random_dataset(cfg, 1, rng);
  TrainConfig tc;
  tc.dropout_rate = 0.0;
  tc.epochs = 500;
  double final_loss = 1e9;
  std::size_t reached = 0;
  train_epochs(model, data, tc, nullptr, [&](const EpochMetrics& m) {
    final_loss = m.mean_loss;
    if (reached == 0 && m.mean_loss < 0.05) reached = m.epoch;
  });
  INFO("final loss " << final_loss);
  CHECK(reached > 0);
  CHECK(sample_loss(model, data[0]) < 0.05);
}

TEST_CASE("training is deterministic and independent of the thread schedule") {
  const ModelConfig cfg = tiny();
  Rng rng(8);
  const HanModel init = HanModel::initialized(cfg, rng);
  const Dataset data = random_dataset(cfg, 13, rng);
  TrainConfig tc;
  tc.batch_size = 4;
  tc.epochs = 3;
  tc.seed = 99;

  auto run = [&](Parallelism par) {
    HanModel m = init;
    TrainConfig c = tc;
    c.parallelism = par;
    std::vector<double> losses;
    for (const auto& e : train_epochs(m, data, c)) losses.push_back(e.mean_loss);
    return std::make_pair(losses, m);
  };
  const auto a = run(Parallelism::kOpenMP);
  const auto b = run(Parallelism::kOpenMP);
  const auto s = run(Parallelism::kSerial);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first == s.first);
  CHECK(a.second == s.second);

  TrainConfig other = tc;
  other.seed = 100;
  HanModel m = init;
  train_epochs(m, data, other);
  CHECK_FALSE(m == a.second);
}

TEST_CASE("batch_gradient is the mean of per-sample gradients") {
  const ModelConfig cfg = tiny();
  Rng rng(9);
  const HanModel model = HanModel::initialized(cfg, rng);
  const Dataset data = random_dataset(cfg, 5, rng);
  std::vector<const Sample*> batch;
  for (const auto& s : data) batch.push_back(&s);
  const BatchResult br = batch_gradient(model, batch, 0.0, Rng(1), Parallelism::kOpenMP);
  HanModel sum(cfg);
  double loss = 0.0;
  for (const auto& s : data) {
    const HanGradients g = sample_gradient(model, s);
    auto dst = sum.tensors();
    const auto src = g.tensors();
    for (std::size_t k = 0; k < dst.size(); ++k) {
      for (std::size_t j = 0; j < dst[k].data.size(); ++j) dst[k].data[j] += src[k].data[j];
    }
    loss += sample_loss(model, s);
  }
  CHECK(br.loss_sum == doctest::Approx(loss).epsilon(1e-13));
  const auto got = br.grad.tensors();
  const auto want = sum.tensors();
  for (std::size_t k = 0; k < got.size(); ++k) {
    for (std::size_t j = 0; j < got[k].data.size(); ++j) {
      CHECK(std::abs(got[k].data[j] - want[k].data[j] / 5.0) <= 1e-14);
    }
  }
}

TEST_CASE("k=1 trainer trajectory matches the stacked-LSTM oracle trainer") {
  const ModelConfig cfg = tiny(1);
  Rng rng(10);
  HanModel model = HanModel::initialized(cfg, rng);
  const Dataset data = random_dataset(cfg, 6, rng);
  TrainConfig tc;
  tc.dropout_rate = 0.0;
  tc.clip = false;
  tc.batch_size = 4;  // two steps per epoch, the second one short
  tc.epochs = 5;
  tc.seed = 3;

  // Oracle: same batch order, tape gradients of the dense stacked LSTM, and
  // a scalar Adadelta written out longhand.
  const oracle::StackedLayout layout(cfg);
  std::vector<double> theta = oracle::flatten(model);
  std::vector<double> eg(theta.size(), 0.0), ed(theta.size(), 0.0);
  std::vector<double> oracle_epoch_loss;
  for (std::size_t e = 0; e < tc.epochs; ++e) {
    Rng shuffle = Rng(tc.seed).fork(2 * e);
    const auto order = shuffled_indices(data.size(), shuffle);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      std::vector<const Sample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + tc.batch_size); ++i) {
        batch.push_back(&data[order[i]]);
      }
      double mean_loss = 0.0;
      const auto g = oracle::stacked_gradient(layout, theta, batch, &mean_loss);
      total += mean_loss * static_cast<double>(batch.size());
      for (std::size_t j = 0; j < theta.size(); ++j) {
        eg[j] = 0.95 * eg[j] + 0.05 * g[j] * g[j];
        const double dx = -std::sqrt(ed[j] + 1e-6) / std::sqrt(eg[j] + 1e-6) * g[j];
        ed[j] = 0.95 * ed[j] + 0.05 * dx * dx;
        theta[j] += dx;
      }
    }
    oracle_epoch_loss.push_back(total / static_cast<double>(data.size()));
  }

  const auto metrics = train_epochs(model, data, tc);
  REQUIRE(metrics.size() == oracle_epoch_loss.size());
  for (std::size_t e = 0; e < metrics.size(); ++e) {
    CHECK(std::abs(metrics[e].mean_loss - oracle_epoch_loss[e]) <= 1e-8);
  }
  const auto trained = oracle::flatten(model);
  double worst = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) worst = std::max(worst, std::abs(trained[j] - theta[j]));
  CHECK(worst <= 1e-8);
}

TEST_CASE("uniform-attention training keeps W_attn at zero") {
  const ModelConfig cfg = tiny();
  Rng rng(11);
  HanModel model = HanModel::initialized(cfg, rng);
  const Dataset data = random_dataset(cfg, 4, rng);
  TrainConfig tc;
  tc.uniform_attention = true;
  tc.epochs = 3;
  train_epochs(model, data, tc);
  for (double w : model.attn.W.values()) CHECK(w == 0.0);
  const auto r = forward(model, data[0].cubes_p, data[0].cubes_q);
  for (const auto& f : r.trace.frames) {
    for (double l : f.attention.l) CHECK(l == 0.25);
  }
}

TEST_CASE("evaluate reports per-class counts") {
  const ModelConfig cfg = tiny();
  Rng rng(12);
  const HanModel model = HanModel::initialized(cfg, rng);
  const Dataset data = random_dataset(cfg, 20, rng);
  const EvalResult a = evaluate(model, data, Parallelism::kOpenMP);
  const EvalResult b = evaluate(model, data, Parallelism::kSerial);
  CHECK(a.predictions == b.predictions);
  std::size_t count = 0, correct = 0;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    count += a.per_class_count[c];
    correct += a.per_class_correct[c];
  }
  CHECK(count == data.size());
  CHECK(a.accuracy == doctest::Approx(static_cast<double>(correct) / 20.0));
}

TEST_CASE("training input errors") {
  const ModelConfig cfg = tiny();
  Rng rng(13);
  HanModel model = HanModel::initialized(cfg, rng);
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(train_epochs(model, Dataset{}, tc), ConfigError);

  Dataset bad = random_dataset(cfg, 2, rng);
  bad[1].label = 7;
  CHECK_THROWS_WITH_AS(train_epochs(model, bad, tc), doctest::Contains("label 7"), ConfigError);

  Dataset nan = random_dataset(cfg, 3, rng);
  nan[0].cubes_p[1].regions(0, 0) = NAN;
  CHECK_THROWS_AS(train_epochs(model, nan, tc), NumericError);

  TrainConfig bad_cfg;
  bad_cfg.rho = 1.0;
  CHECK_THROWS_AS(bad_cfg.validate(), ConfigError);
  bad_cfg = TrainConfig{};
  bad_cfg.dropout_rate = 1.0;
  CHECK_THROWS_AS(bad_cfg.validate(), ConfigError);
  bad_cfg = TrainConfig{};
  bad_cfg.clip_norm = 0.0;
  CHECK_THROWS_AS(bad_cfg.validate(), ConfigError);
}

TEST_CASE("a non-finite loss names the epoch and batch") {
  const ModelConfig cfg = tiny();
  Rng rng(14);
  HanModel model = HanModel::initialized(cfg, rng);
  const Dataset data = random_dataset(cfg, 3, rng);
  // Classifier weights aligned with h_f at the float64 limit overflow logit 0.
  const Vector h = forward(model, data[0].cubes_p, data[0].cubes_q).encoding.h_f;
  for (std::size_t j = 0; j < h.size(); ++j) model.W_s(0, j) = h[j] >= 0.0 ? 1e308 : -1e308;
  model.b_s[0] = 1.7e308;
  TrainConfig tc;
  tc.dropout_rate = 0.0;
  tc.epochs = 1;
  tc.batch_size = 2;
  CHECK_THROWS_WITH_AS(train_epochs(model, data, tc), doctest::Contains("batch"), NumericError);
}
