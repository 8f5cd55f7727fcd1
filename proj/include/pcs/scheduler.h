#ifndef PCS_SCHEDULER_H_
#define PCS_SCHEDULER_H_

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pcs/core.h"
#include "pcs/random.h"

namespace pcs {

struct SchedulerConfig {
  std::size_t n_match_attributes = 8;
  // Absolute tolerance for non-indicator attributes; values that are both
  // in {0, 1} must match exactly.
  double match_tolerance = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct IssuedPair {
  std::string left_id;
  std::string right_id;
};

struct Exposure {
  std::int64_t min = 0;
  std::int64_t max = 0;
};

// Attribute-matched pair selection with balanced exposure. Not thread-safe;
// the owner serializes calls.
class Scheduler {
 public:
  Scheduler(std::shared_ptr<const ItemCatalog> items, SchedulerConfig config);

  // Anchor is drawn from the least-shown items, the partner is the least
  // shown item matching the anchor on a random attribute subset. Sides are
  // randomized. Does not change exposure counts.
  IssuedPair next_pair();

  // Returns false (and changes nothing) for a response id seen before.
  bool record_response(const std::string& response_id, const Comparison& c);

  std::int64_t shown_count(const std::string& id) const;
  const std::vector<std::int64_t>& shown_counts() const { return counts_; }
  Exposure exposure() const;
  std::size_t n_recorded() const { return seen_.size(); }
  const ItemCatalog& catalog() const { return *items_; }
  const SchedulerConfig& config() const { return config_; }

  // {"shown_counts": {id: n}, "rng": "<engine state>", "seen": [...]}
  std::string checkpoint_json() const;
  void restore_json(const std::string& text);

 private:
  bool matches(const Item& anchor, const Item& other,
               const std::vector<const std::string*>& attrs) const;
  std::size_t pick_least_shown(const std::vector<std::size_t>& pool);

  std::shared_ptr<const ItemCatalog> items_;
  SchedulerConfig config_;
  Rng rng_;
  std::vector<std::int64_t> counts_;
  std::unordered_set<std::string> seen_;
};

}  // namespace pcs

#endif  // PCS_SCHEDULER_H_
