#include "han/han_model.hpp"

#include <algorithm>
#include <cmath>

#include "han/kernels.hpp"

namespace han {

void ModelConfig::validate() const {
  auto positive = [](std::uint32_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model config: ") + name + " must be positive");
  };
  positive(regions_per_side, "regions_per_side (K)");
  positive(feature_dim, "feature_dim (D)");
  positive(hidden, "hidden (H)");
  positive(skip, "skip (k)");
  positive(frames, "frames (T)");
  positive(classes, "classes (C)");
  if (layers != 2) {
    throw ConfigError("model config: layers (L) must be 2, got " + std::to_string(layers));
  }
}

std::string ModelConfig::describe() const {
  return "K=" + std::to_string(regions_per_side) + " D=" + std::to_string(feature_dim) +
         " H=" + std::to_string(hidden) + " L=" + std::to_string(layers) +
         " k=" + std::to_string(skip) + " T=" + std::to_string(frames) +
         " C=" + std::to_string(classes);
}

std::vector<std::size_t> layer2_schedule(std::size_t frames, std::size_t skip) {
  if (frames == 0) throw EmptySequenceError("layer2_schedule: T must be at least 1");
  if (skip == 0) throw ConfigError("layer2_schedule: skip stride must be at least 1");
  std::vector<std::size_t> s;
  for (std::size_t t = skip; t <= frames; t += skip) s.push_back(t);
  if (s.empty() || s.back() != frames) s.push_back(frames);
  return s;
}

HanModel::HanModel(const ModelConfig& cfg)
    : config(cfg),
      lstm_p1(cfg.feature_dim, cfg.hidden),
      lstm_p2(cfg.hidden, cfg.hidden),
      lstm_q1(cfg.feature_dim, cfg.hidden),
      lstm_q2(cfg.hidden, cfg.hidden),
      attn(cfg.num_regions(), cfg.hidden),
      W_s(cfg.classes, cfg.encoding_dim()),
      b_s(cfg.classes, 0.0) {
  cfg.validate();
}

HanModel HanModel::initialized(const ModelConfig& cfg, Rng& rng, bool zero_attention) {
  HanModel m(cfg);
  m.lstm_p1.init_glorot(rng);
  m.lstm_p2.init_glorot(rng);
  m.lstm_q1.init_glorot(rng);
  m.lstm_q2.init_glorot(rng);
  auto fill = [&rng](Matrix& w) {
    const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double& v : w.values()) v = rng.uniform(-a, a);
  };
  if (!zero_attention) fill(m.attn.W);
  fill(m.W_s);
  return m;
}

TensorList HanModel::tensors() {
  TensorList out;
  auto append = [&out](TensorList more) {
    for (auto& t : more) out.push_back(std::move(t));
  };
  append(lstm_p1.tensors("lstm_p1."));
  append(lstm_p2.tensors("lstm_p2."));
  append(lstm_q1.tensors("lstm_q1."));
  append(lstm_q2.tensors("lstm_q2."));
  append(attn.tensors("attn."));
  out.push_back({"classifier.W_s", W_s.values()});
  out.push_back({"classifier.b_s", b_s});
  return out;
}

ConstTensorList HanModel::tensors() const {
  ConstTensorList out;
  for (auto& t : const_cast<HanModel*>(this)->tensors()) out.push_back({std::move(t.name), t.data});
  return out;
}

std::size_t HanModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.data.size();
  return n;
}

void HanModel::set_zero() {
  for (auto& t : tensors()) std::fill(t.data.begin(), t.data.end(), 0.0);
}

void HanModel::validate() const {
  config.validate();
  const std::size_t D = config.feature_dim;
  const std::size_t H = config.hidden;
  auto check_lstm = [](const LstmParams& p, std::size_t in, std::size_t hid, const char* name) {
    p.validate();
    if (p.input_dim() != in || p.hidden_dim() != hid) {
      throw DimensionError(std::string(name) + ": " + std::to_string(p.hidden_dim()) + "x" +
                           std::to_string(p.input_dim()) + " vs config " + std::to_string(hid) +
                           "x" + std::to_string(in));
    }
  };
  check_lstm(lstm_p1, D, H, "lstm_p1");
  check_lstm(lstm_p2, H, H, "lstm_p2");
  check_lstm(lstm_q1, D, H, "lstm_q1");
  check_lstm(lstm_q2, H, H, "lstm_q2");
  if (attn.W.rows() != config.num_regions() || attn.W.cols() != 2 * H) {
    throw DimensionError("W_attn " + attn.W.shape_string() + " vs config " +
                         std::to_string(config.num_regions()) + "x" + std::to_string(2 * H));
  }
  if (W_s.rows() != config.classes || W_s.cols() != config.encoding_dim()) {
    throw DimensionError("W_s " + W_s.shape_string() + " vs config " +
                         std::to_string(config.classes) + "x" +
                         std::to_string(config.encoding_dim()));
  }
  require_size(b_s.size(), config.classes, "b_s");
}

namespace {

void check_inputs(const ModelConfig& cfg, std::span<const FeatureCube> cubes_p,
                  std::span<const FeatureCube> cubes_q) {
  if (cubes_p.size() != cubes_q.size()) {
    throw DimensionError("forward: appearance stream has " + std::to_string(cubes_p.size()) +
                         " frames, motion stream has " + std::to_string(cubes_q.size()));
  }
  if (cubes_p.empty()) throw EmptySequenceError("forward: sequence has no frames");
  if (cubes_p.size() != cfg.frames) {
    throw DimensionError("forward: sequence has " + std::to_string(cubes_p.size()) +
                         " frames, model expects T=" + std::to_string(cfg.frames));
  }
  for (const auto* stream : {&cubes_p, &cubes_q}) {
    for (const FeatureCube& c : *stream) {
      if (c.num_regions() != cfg.num_regions() || c.dim() != cfg.feature_dim) {
        throw DimensionError("forward: cube " + c.regions.shape_string() + " vs expected " +
                             std::to_string(cfg.num_regions()) + "x" +
                             std::to_string(cfg.feature_dim));
      }
    }
  }
}

}  // namespace

ForwardResult forward(const HanModel& model, std::span<const FeatureCube> cubes_p,
                      std::span<const FeatureCube> cubes_q, const ForwardOptions& options) {
  const ModelConfig& cfg = model.config;
  check_inputs(cfg, cubes_p, cubes_q);
  const bool dropping = options.mode == Mode::kTrain && options.dropout_rate > 0.0;
  if (dropping && options.rng == nullptr) {
    throw ConfigError("forward: train-mode dropout requires an Rng");
  }
  Rng unused(0);
  Rng& rng = options.rng ? *options.rng : unused;

  const std::size_t H = cfg.hidden;
  ForwardResult out;
  ForwardTrace& tr = out.trace;
  tr.config = cfg;
  tr.mode = options.mode;
  tr.cubes_p = cubes_p;
  tr.cubes_q = cubes_q;
  tr.schedule = layer2_schedule(cubes_p.size(), cfg.skip);
  tr.frames.reserve(cubes_p.size());
  tr.layer2.reserve(tr.schedule.size());

  LstmState p1 = LstmState::zeros(H), q1 = LstmState::zeros(H);
  LstmState p2 = LstmState::zeros(H), q2 = LstmState::zeros(H);
  std::size_t next_sched = 0;

  for (std::size_t t = 0; t < cubes_p.size(); ++t) {
    FrameTrace& ft = tr.frames.emplace_back();
    ft.attention = attention_weights(model.attn, p1.h, q1.h);
    ft.x_p = attend(ft.attention, cubes_p[t]);
    ft.x_q = attend(ft.attention, cubes_q[t]);
    ft.prev_p1 = p1;
    ft.prev_q1 = q1;
    auto sp = lstm_step(model.lstm_p1, p1, ft.x_p);
    auto sq = lstm_step(model.lstm_q1, q1, ft.x_q);
    p1 = std::move(sp.state);
    q1 = std::move(sq.state);
    ft.gates_p1 = std::move(sp.gates);
    ft.gates_q1 = std::move(sq.gates);

    if (next_sched < tr.schedule.size() && tr.schedule[next_sched] == t + 1) {
      ++next_sched;
      Layer2Trace& lt = tr.layer2.emplace_back();
      lt.t = t + 1;
      lt.drop_p = dropout_apply(p1.h, options.dropout_rate, options.mode, rng);
      lt.drop_q = dropout_apply(q1.h, options.dropout_rate, options.mode, rng);
      lt.in_p = lt.drop_p.output;
      lt.in_q = lt.drop_q.output;
      lt.prev_p2 = p2;
      lt.prev_q2 = q2;
      auto s2p = lstm_step(model.lstm_p2, p2, lt.in_p);
      auto s2q = lstm_step(model.lstm_q2, q2, lt.in_q);
      p2 = std::move(s2p.state);
      q2 = std::move(s2q.state);
      lt.gates_p2 = std::move(s2p.gates);
      lt.gates_q2 = std::move(s2q.gates);
    }
  }

  Vector& h_f = out.encoding.h_f;
  h_f.reserve(cfg.encoding_dim());
  for (const Vector* part : {&p1.h, &p2.h, &q1.h, &q2.h}) {
    h_f.insert(h_f.end(), part->begin(), part->end());
  }
  tr.final_p1 = std::move(p1);
  tr.final_p2 = std::move(p2);
  tr.final_q1 = std::move(q1);
  tr.final_q2 = std::move(q2);

  tr.drop_f = dropout_apply(h_f, options.dropout_rate, options.mode, rng);
  tr.logits = matvec(model.W_s, tr.drop_f.output);
  add_inplace(tr.logits, model.b_s);
  require_finite(tr.logits, "forward: classifier logits");
  out.class_probs = stable_softmax(tr.logits);
  return out;
}

void backward_acc(const HanModel& model, const ForwardTrace& tr,
                  std::span<const double> grad_logits, HanGradients& g) {
  const ModelConfig& cfg = model.config;
  if (!(tr.config == cfg) || !(g.config == cfg)) {
    throw ConsistencyError("backward: trace/gradient config (" + tr.config.describe() + ", " +
                           g.config.describe() + ") does not match model (" + cfg.describe() +
                           ")");
  }
  if (tr.frames.size() != cfg.frames || tr.layer2.size() != tr.schedule.size() ||
      tr.cubes_p.size() != tr.frames.size() || tr.cubes_q.size() != tr.frames.size()) {
    throw ConsistencyError("backward: trace lengths do not match T and the layer-2 schedule");
  }
  require_size(grad_logits.size(), cfg.classes, "backward grad_logits");

  const std::size_t H = cfg.hidden;

  // Classifier.
  outer_acc(g.W_s, grad_logits, tr.drop_f.output);
  add_inplace(g.b_s, grad_logits);
  Vector dhf = matvec_transposed(model.W_s, grad_logits);
  for (std::size_t j = 0; j < dhf.size(); ++j) dhf[j] *= tr.drop_f.mask[j] * tr.drop_f.scale;

  // Running adjoints of the states at the current time step.
  Vector dh_p1(dhf.begin(), dhf.begin() + H);
  Vector dh_p2(dhf.begin() + H, dhf.begin() + 2 * H);
  Vector dh_q1(dhf.begin() + 2 * H, dhf.begin() + 3 * H);
  Vector dh_q2(dhf.begin() + 3 * H, dhf.end());
  Vector dc_p1(H, 0.0), dc_q1(H, 0.0), dc_p2(H, 0.0), dc_q2(H, 0.0);

  LstmState prev_grad;
  std::ptrdiff_t l2 = static_cast<std::ptrdiff_t>(tr.layer2.size()) - 1;

  for (std::size_t t = tr.frames.size(); t-- > 0;) {
    const FrameTrace& ft = tr.frames[t];

    if (l2 >= 0 && tr.layer2[static_cast<std::size_t>(l2)].t == t + 1) {
      const Layer2Trace& lt = tr.layer2[static_cast<std::size_t>(l2)];
      --l2;
      Vector din_p(H, 0.0), din_q(H, 0.0);
      lstm_step_backward_acc(model.lstm_p2, lt.prev_p2, lt.in_p, lt.gates_p2, dh_p2, dc_p2,
                             g.lstm_p2, prev_grad, din_p);
      dh_p2 = std::move(prev_grad.h);
      dc_p2 = std::move(prev_grad.c);
      lstm_step_backward_acc(model.lstm_q2, lt.prev_q2, lt.in_q, lt.gates_q2, dh_q2, dc_q2,
                             g.lstm_q2, prev_grad, din_q);
      dh_q2 = std::move(prev_grad.h);
      dc_q2 = std::move(prev_grad.c);
      for (std::size_t j = 0; j < H; ++j) {
        dh_p1[j] += din_p[j] * lt.drop_p.mask[j] * lt.drop_p.scale;
        dh_q1[j] += din_q[j] * lt.drop_q.mask[j] * lt.drop_q.scale;
      }
    }

    Vector dx_p(cfg.feature_dim, 0.0), dx_q(cfg.feature_dim, 0.0);
    lstm_step_backward_acc(model.lstm_p1, ft.prev_p1, ft.x_p, ft.gates_p1, dh_p1, dc_p1,
                           g.lstm_p1, prev_grad, dx_p);
    dh_p1 = std::move(prev_grad.h);
    dc_p1 = std::move(prev_grad.c);
    lstm_step_backward_acc(model.lstm_q1, ft.prev_q1, ft.x_q, ft.gates_q1, dh_q1, dc_q1,
                           g.lstm_q1, prev_grad, dx_q);
    dh_q1 = std::move(prev_grad.h);
    dc_q1 = std::move(prev_grad.c);

    // Attention at frame t was scored from the layer-1 states of frame t-1.
    attention_backward_acc(model.attn, ft.prev_p1.h, ft.prev_q1.h, ft.attention, tr.cubes_p[t],
                           tr.cubes_q[t], dx_p, dx_q, g.attn.W, dh_p1, dh_q1);
  }
}

HanGradients backward(const HanModel& model, const ForwardTrace& trace,
                      std::span<const double> grad_logits) {
  HanGradients g(model.config);
  backward_acc(model, trace, grad_logits, g);
  return g;
}

}  // namespace han
