#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "pcs/model.h"
#include "pcs/random.h"
#include "test_util.h"

namespace {

using pcs::Outcome;

// Reference forward pass that walks the flat vector with its own offset
// bookkeeping: per layer, weights row-major (out x in), then bias.
struct RefNet {
  const std::vector<double>& v;
  std::size_t off = 0;

  std::vector<double> dense(const std::vector<double>& x, std::size_t out,
                            bool relu) {
    std::vector<double> y(out);
    const std::size_t in = x.size();
    for (std::size_t o = 0; o < out; ++o) {
      double s = v[off + in * out + o];
      for (std::size_t i = 0; i < in; ++i) s += v[off + o * in + i] * x[i];
      y[o] = relu ? std::max(0.0, s) : s;
    }
    off += in * out + out;
    return y;
  }
};

struct RefOut {
  double f_i, f_j;
  std::array<double, 3> logits;
};

RefOut reference_forward(const pcs::ModelParams& p, const std::vector<double>& xi,
                         const std::vector<double>& xj) {
  const auto& a = p.arch;
  auto trunk = [&](const std::vector<double>& x) {
    RefNet net{p.values, 0};
    std::vector<double> h = x;
    for (std::size_t w : a.trunk_widths) h = net.dense(h, w, true);
    return std::make_pair(h, net.off);
  };
  const auto [ei, trunk_end] = trunk(xi);
  const auto ej = trunk(xj).first;
  RefNet head{p.values, trunk_end};
  const double fi = head.dense(ei, 1, false)[0];
  const std::size_t head_end = head.off;
  RefNet head2{p.values, trunk_end};
  const double fj = head2.dense(ej, 1, false)[0];

  RefNet fusion{p.values, head_end};
  std::vector<double> z = ei;
  z.insert(z.end(), ej.begin(), ej.end());
  for (std::size_t w : a.fusion_widths) z = fusion.dense(z, w, true);
  z = fusion.dense(z, 3, false);
  EXPECT_EQ(fusion.off, p.values.size());
  return {fi, fj, {z[0], z[1], z[2]}};
}

pcs::ModelParams random_model(std::uint64_t seed, pcs::Architecture arch) {
  auto p = pcs::init_params(arch, seed);
  pcs::Rng rng(seed + 1);
  std::normal_distribution<double> n(0.0, 0.1);
  for (double& v : p.values) v += n(rng);
  return p;
}

TEST(Model, ForwardMatchesReference) {
  pcs::Rng rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::uint64_t s = 0; s < 10; ++s) {
    pcs::Architecture arch;
    arch.input_dim = 3 + s % 3;
    arch.trunk_widths = {4 + s % 2, 3};
    arch.fusion_widths = s % 2 ? std::vector<std::size_t>{5}
                               : std::vector<std::size_t>{4, 2};
    const auto p = random_model(s, arch);
    std::vector<double> xi(arch.input_dim), xj(arch.input_dim);
    for (double& v : xi) v = n(rng);
    for (double& v : xj) v = n(rng);
    const auto ref = reference_forward(p, xi, xj);
    const auto t = pcs::forward_pair(p, xi, xj, Outcome::kTie);
    EXPECT_NEAR(t.f_i, ref.f_i, 1e-12);
    EXPECT_NEAR(t.f_j, ref.f_j, 1e-12);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(t.logits[c], ref.logits[c], 1e-12);
    EXPECT_DOUBLE_EQ(pcs::rank_score(p, xi), t.f_i);
  }
}

TEST(Model, LayoutCountsParameters) {
  pcs::Architecture arch;
  arch.input_dim = 16;
  const auto layout = pcs::make_layout(arch);
  // 16*64+64 + 64*64+64 + 64+1 + 128*64+64 + 64*3+3
  EXPECT_EQ(layout.total, 1088u + 4160u + 65u + 8256u + 195u);
}

TEST(Model, InitWithinFanInBounds) {
  pcs::Architecture arch;
  arch.input_dim = 9;
  const auto p = pcs::init_params(arch, 4);
  for (const auto* block : {&p.layout.trunk, &p.layout.rank_head, &p.layout.fusion_head}) {
    for (const auto& layer : *block) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
      for (std::size_t k = 0; k < layer.weight_count(); ++k) {
        EXPECT_LE(std::abs(p.values[layer.offset + k]), bound);
      }
      for (std::size_t k = 0; k < layer.out; ++k) {
        EXPECT_EQ(p.values[layer.bias_offset() + k], 0.0);
      }
    }
  }
  EXPECT_EQ(pcs::init_params(arch, 4).values, p.values);
  EXPECT_NE(pcs::init_params(arch, 5).values, p.values);
}

TEST(Model, ClassifyPairIsADistribution) {
  pcs::Architecture arch;
  arch.input_dim = 2;
  const auto p = random_model(1, arch);
  const std::vector<double> a{0.3, -1}, b{2, 0.5};
  const auto probs = pcs::classify_pair(p, a, b);
  EXPECT_NEAR(probs[0] + probs[1] + probs[2], 1.0, 1e-12);
  for (double q : probs) EXPECT_GT(q, 0.0);
}

TEST(Model, RejectsWrongInputDimension) {
  pcs::Architecture arch;
  arch.input_dim = 2;
  const auto p = pcs::init_params(arch, 1);
  const std::vector<double> x{1, 2, 3};
  EXPECT_THROW(pcs::rank_score(p, x), pcs::Error);
}

TEST(Backward, MatchesFiniteDifferencesOnBatch) {
  pcs::Architecture arch;
  arch.input_dim = 3;
  arch.trunk_widths = {4, 3};
  arch.fusion_widths = {3};
  auto p = random_model(7, arch);
  pcs::Hyperparams hp;
  hp.gamma = 0.4;
  std::vector<std::vector<double>> xs{{1, 0, -1}, {0.5, 2, 0}, {-1, -1, 1},
                                      {0.2, 0.1, 0.3}, {2, -0.5, 1}, {0, 1, 0}};
  const std::vector<pcs::TrainingExample> batch{
      {xs[0], xs[1], Outcome::kLeft},
      {xs[2], xs[3], Outcome::kTie},
      {xs[4], xs[5], Outcome::kRight}};
  const auto br = pcs::backward(p, batch, hp);
  auto loss = [&] {
    std::vector<pcs::PairTerms> t;
    for (const auto& ex : batch) t.push_back(pcs::forward_pair(p, ex.x_i, ex.x_j, ex.y));
    return pcs::combined_loss(t, hp).total;
  };
  EXPECT_NEAR(br.loss.total, loss(), 1e-12);
  const double h = 1e-6;
  for (std::size_t k = 0; k < p.values.size(); ++k) {
    const double o = p.values[k];
    p.values[k] = o + h;
    const double fp = loss();
    p.values[k] = o - h;
    const double fm = loss();
    p.values[k] = o;
    EXPECT_NEAR(br.gradient[k], (fp - fm) / (2 * h), 1e-6) << k;
  }
}

TEST(Backward, RejectsEmptyBatch) {
  pcs::Architecture arch;
  arch.input_dim = 2;
  const auto p = pcs::init_params(arch, 1);
  EXPECT_THROW(pcs::backward(p, {}, {}), pcs::Error);
}

TEST(Adam, FirstStepMovesBySignedLearningRate) {
  pcs::Architecture arch;
  arch.input_dim = 1;
  arch.trunk_widths = {1};
  arch.fusion_widths = {};
  auto p = pcs::init_params(arch, 0);
  p.hyper.learning_rate = 0.01;
  const auto before = p.values;
  std::vector<double> g(p.values.size(), 0.0);
  g[0] = 3.0;
  g[1] = -0.5;
  pcs::adam_step(p, g);
  // Bias-corrected first step: m_hat = g, v_hat = g^2.
  EXPECT_NEAR(p.values[0], before[0] - 0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p.values[1], before[1] + 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_EQ(p.values[2], before[2]);
  EXPECT_EQ(p.adam.step, 1);
}

TEST(Adam, TwoStepsMatchHandRecursion) {
  pcs::Architecture arch;
  arch.input_dim = 1;
  arch.trunk_widths = {1};
  arch.fusion_widths = {};
  auto p = pcs::init_params(arch, 0);
  p.hyper.learning_rate = 0.1;
  const double w0 = p.values[0];
  std::vector<double> g(p.values.size(), 0.0);
  g[0] = 1.0;
  pcs::adam_step(p, g);
  g[0] = -2.0;
  pcs::adam_step(p, g);
  double m = 0.1 * 1.0, v = 0.001 * 1.0;
  double w = w0 - 0.1 * (m / 0.1) / (std::sqrt(v / 0.001) + 1e-8);
  m = 0.9 * m + 0.1 * -2.0;
  v = 0.999 * v + 0.001 * 4.0;
  const double bc1 = 1 - 0.81, bc2 = 1 - 0.999 * 0.999;
  w -= 0.1 * (m / bc1) / (std::sqrt(v / bc2) + 1e-8);
  EXPECT_NEAR(p.values[0], w, 1e-14);
}

TEST(LearningRate, StepDecay) {
  pcs::Hyperparams h;
  h.learning_rate = 0.001;
  h.decay_every_steps = 100;
  h.decay_factor = 0.5;
  EXPECT_DOUBLE_EQ(pcs::effective_learning_rate(h, 0), 0.001);
  EXPECT_DOUBLE_EQ(pcs::effective_learning_rate(h, 99), 0.001);
  EXPECT_DOUBLE_EQ(pcs::effective_learning_rate(h, 100), 0.0005);
  EXPECT_DOUBLE_EQ(pcs::effective_learning_rate(h, 250), 0.00025);
}

TEST(Checkpoint, RoundTripIsLossless) {
  pcs::Architecture arch;
  arch.input_dim = 4;
  arch.trunk_widths = {5, 3};
  auto p = random_model(3, arch);
  p.adam.step = 17;
  p.adam.m.assign(p.values.size(), 1.0 / 3.0);
  p.adam.v.assign(p.values.size(), 2.0 / 7.0);
  p.hyper.gamma = 0.7;
  pcs::Standardization st{{0.1, 0.2, 0.3, 0.4}, {1.0 / 3, 2, 0, 4}};
  testutil::TempDir dir;
  pcs::save_checkpoint({p, st}, dir.file("m.json"));
  const auto back = pcs::load_checkpoint(dir.file("m.json"));
  EXPECT_EQ(back.params.values, p.values);
  EXPECT_EQ(back.params.arch, p.arch);
  EXPECT_EQ(back.params.adam.m, p.adam.m);
  EXPECT_EQ(back.params.adam.v, p.adam.v);
  EXPECT_EQ(back.params.adam.step, 17);
  EXPECT_EQ(back.params.hyper.gamma, 0.7);
  ASSERT_TRUE(back.standardization.has_value());
  EXPECT_EQ(back.standardization->stddev, st.stddev);
  const std::vector<double> x{0.1, -0.2, 0.3, 5};
  EXPECT_EQ(pcs::rank_score(back.params, x), pcs::rank_score(p, x));
}

TEST(Checkpoint, RejectsCorruptDocuments) {
  EXPECT_THROW(pcs::checkpoint_from_json("{"), pcs::Error);
  EXPECT_THROW(pcs::checkpoint_from_json(R"({"format":"other"})"), pcs::Error);
  pcs::Architecture arch;
  arch.input_dim = 2;
  auto text = pcs::checkpoint_to_json({pcs::init_params(arch, 1), std::nullopt});
  auto doc = nlohmann::json::parse(text);
  doc["architecture"]["input_dim"] = 3;
  EXPECT_THROW(pcs::checkpoint_from_json(doc.dump()), pcs::Error);
}

}  // namespace
