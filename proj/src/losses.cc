#include "pcs/losses.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace pcs {

void Hyperparams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(std::string("invalid hyperparameter: ") + what);
  };
  require(std::isfinite(gamma) && gamma >= 0.0, "gamma must be >= 0");
  require(std::isfinite(lambda_rank) && lambda_rank >= 0.0,
          "lambda_rank must be >= 0");
  require(std::isfinite(lambda_tie) && lambda_tie >= 0.0,
          "lambda_tie must be >= 0");
  require(std::isfinite(lambda_class) && lambda_class >= 0.0,
          "lambda_class must be >= 0");
  require(std::isfinite(learning_rate) && learning_rate > 0.0,
          "learning_rate must be > 0");
  require(decay_every_steps > 0, "decay_every_steps must be > 0");
  require(decay_factor > 0.0 && decay_factor <= 1.0,
          "decay_factor must be in (0, 1]");
  require(batch_size > 0, "batch_size must be > 0");
  require(max_epochs > 0, "max_epochs must be > 0");
}

double hinge_rank_loss(double f_i, double f_j, Outcome y, double gamma) {
  if (is_tie(y)) throw Error("hinge_rank_loss is undefined for ties");
  if (!(gamma >= 0.0)) throw Error("gamma must be >= 0");
  return std::max(0.0, gamma + to_int(y) * (f_i - f_j));
}

double tie_loss(double f_i, double f_j, double gamma) {
  if (!(gamma >= 0.0)) throw Error("gamma must be >= 0");
  return std::max(0.0, std::abs(f_i - f_j) - gamma);
}

std::array<double, 3> softmax(std::span<const double, 3> logits) {
  for (double z : logits) {
    if (!std::isfinite(z)) throw Error("non-finite logit");
  }
  const double peak = std::max({logits[0], logits[1], logits[2]});
  std::array<double, 3> p{};
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    p[k] = std::exp(logits[k] - peak);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

double softmax_ce(std::span<const double, 3> logits, Outcome y) {
  for (double z : logits) {
    if (!std::isfinite(z)) throw Error("non-finite logit");
  }
  const double peak = std::max({logits[0], logits[1], logits[2]});
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - peak);
  return std::log(sum) - (logits[class_index(y)] - peak);
}

PairLossGrad pair_loss_grad(const PairTerms& t, const Hyperparams& hyper) {
  PairLossGrad g;
  if (hyper.lambda_class > 0.0) {
    g.classification = softmax_ce(t.logits, t.y);
    const auto p = softmax(t.logits);
    for (int k = 0; k < 3; ++k) {
      const double onehot = (k == class_index(t.y)) ? 1.0 : 0.0;
      g.d_logits[k] = hyper.lambda_class * (p[k] - onehot);
    }
  }
  const double diff = t.f_i - t.f_j;
  if (is_tie(t.y)) {
    const double arg = std::abs(diff) - hyper.gamma;
    if (arg > 0.0) {
      g.tie = arg;
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      g.d_fi = hyper.lambda_tie * sign;
      g.d_fj = -g.d_fi;
    }
  } else {
    const double y = to_int(t.y);
    const double arg = hyper.gamma + y * diff;
    if (arg > 0.0) {
      g.ranking = arg;
      g.d_fi = hyper.lambda_rank * y;
      g.d_fj = -g.d_fi;
    }
  }
  g.total = hyper.lambda_class * g.classification +
            hyper.lambda_rank * g.ranking + hyper.lambda_tie * g.tie;
  return g;
}

LossBreakdown combined_loss(std::span<const PairTerms> pairs,
                            const Hyperparams& hyper) {
  if (pairs.empty()) throw Error("combined_loss requires a non-empty batch");
  LossBreakdown out;
  double sum_ce = 0.0;
  double sum_rank = 0.0;
  double sum_tie = 0.0;
  for (const PairTerms& t : pairs) {
    // Cross-entropy is reported even when its weight is zero.
    sum_ce += softmax_ce(t.logits, t.y);
    if (is_tie(t.y)) {
      sum_tie += tie_loss(t.f_i, t.f_j, hyper.gamma);
      ++out.n_tie;
    } else {
      sum_rank += hinge_rank_loss(t.f_i, t.f_j, t.y, hyper.gamma);
      ++out.n_nontie;
    }
  }
  const double n = static_cast<double>(pairs.size());
  out.classification = sum_ce / n;
  out.ranking = sum_rank / n;
  out.tie = sum_tie / n;
  out.ranking_class_mean =
      out.n_nontie ? sum_rank / static_cast<double>(out.n_nontie) : 0.0;
  out.tie_class_mean =
      out.n_tie ? sum_tie / static_cast<double>(out.n_tie) : 0.0;
  out.total = hyper.lambda_class * out.classification +
              hyper.lambda_rank * out.ranking + hyper.lambda_tie * out.tie;
  return out;
}

}  // namespace pcs
