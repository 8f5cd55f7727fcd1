#ifndef PCS_HYPERPARAMS_H_
#define PCS_HYPERPARAMS_H_

#include <cstdint>

namespace pcs {

struct Hyperparams {
  double gamma = 0.3;          // margin
  double lambda_rank = 1.0;    // weight of the non-tie hinge term
  double lambda_tie = 1.0;     // weight of the tie contraction term
  double lambda_class = 1.0;   // weight of the 3-class cross-entropy; 0 = ranking-only
  double learning_rate = 0.001;
  std::int64_t decay_every_steps = 10000;
  double decay_factor = 0.5;
  std::int64_t batch_size = 128;
  std::int64_t max_epochs = 20;
  std::uint64_t seed = 0;

  // Throws pcs::Error when a field is out of range.
  void validate() const;
};

}  // namespace pcs

#endif  // PCS_HYPERPARAMS_H_
