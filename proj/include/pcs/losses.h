#ifndef PCS_LOSSES_H_
#define PCS_LOSSES_H_

#include <array>
#include <cstddef>
#include <span>

#include "pcs/core.h"
#include "pcs/hyperparams.h"

namespace pcs {

// Class index of the 3-way head: left -> 0, tie -> 1, right -> 2.
inline int class_index(Outcome y) { return to_int(y) + 1; }

// max(0, gamma + y * (f_i - f_j)): zero once the chosen side leads by gamma.
// Rejects ties.
double hinge_rank_loss(double f_i, double f_j, Outcome y, double gamma);

// max(0, |f_i - f_j| - gamma).
double tie_loss(double f_i, double f_j, double gamma);

// -log softmax(logits)[class_index(y)], stabilised by max subtraction.
double softmax_ce(std::span<const double, 3> logits, Outcome y);

std::array<double, 3> softmax(std::span<const double, 3> logits);

// Everything the multi-loss needs from one forward pass over a pair.
struct PairTerms {
  double f_i = 0.0;
  double f_j = 0.0;
  std::array<double, 3> logits{};
  Outcome y = Outcome::kTie;
};

// Batch-mean contributions: total == lambda_class * classification +
// lambda_rank * ranking + lambda_tie * tie. The *_class_mean fields divide by
// the per-class count instead of the batch size.
struct LossBreakdown {
  double total = 0.0;
  double classification = 0.0;
  double ranking = 0.0;
  double tie = 0.0;
  double ranking_class_mean = 0.0;
  double tie_class_mean = 0.0;
  std::size_t n_nontie = 0;
  std::size_t n_tie = 0;
};

LossBreakdown combined_loss(std::span<const PairTerms> pairs,
                            const Hyperparams& hyper);

// Loss of one pair and its derivatives with respect to f_i, f_j and the
// logits. Subgradient 0 at the hinge and absolute-value kinks.
struct PairLossGrad {
  double classification = 0.0;
  double ranking = 0.0;
  double tie = 0.0;
  double total = 0.0;
  double d_fi = 0.0;
  double d_fj = 0.0;
  std::array<double, 3> d_logits{};
};

PairLossGrad pair_loss_grad(const PairTerms& terms, const Hyperparams& hyper);

}  // namespace pcs

#endif  // PCS_LOSSES_H_
