#include "pcs/scheduler.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pcs {

namespace {

bool indicator(double v) { return v == 0.0 || v == 1.0; }

}  // namespace

void SchedulerConfig::validate() const {
  if (n_match_attributes < 1) {
    throw Error("scheduler: n_match_attributes must be >= 1");
  }
  if (!(match_tolerance >= 0.0)) {
    throw Error("scheduler: match_tolerance must be >= 0");
  }
}

Scheduler::Scheduler(std::shared_ptr<const ItemCatalog> items,
                     SchedulerConfig config)
    : items_(std::move(items)), config_(config), rng_(config.seed) {
  if (!items_) throw Error("scheduler: no item catalog");
  config_.validate();
  counts_.assign(items_->size(), 0);
}

std::size_t Scheduler::pick_least_shown(const std::vector<std::size_t>& pool) {
  std::int64_t best = counts_[pool.front()];
  for (std::size_t i : pool) best = std::min(best, counts_[i]);
  std::vector<std::size_t> tied;
  for (std::size_t i : pool) {
    if (counts_[i] == best) tied.push_back(i);
  }
  std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
  return tied[pick(rng_)];
}

bool Scheduler::matches(const Item& anchor, const Item& other,
                        const std::vector<const std::string*>& attrs) const {
  for (const std::string* name : attrs) {
    auto it = other.attributes.find(*name);
    if (it == other.attributes.end()) return false;
    const double a = anchor.attributes.at(*name);
    const double b = it->second;
    if (indicator(a) && indicator(b)) {
      if (a != b) return false;
    } else if (!(std::abs(a - b) <= config_.match_tolerance)) {
      return false;
    }
  }
  return true;
}

IssuedPair Scheduler::next_pair() {
  const std::size_t n = items_->size();
  if (n < 2) throw Error("scheduler: need at least 2 items");

  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  const std::size_t anchor = pick_least_shown(all);
  const Item& a = (*items_)[anchor];

  std::vector<const std::string*> names;
  for (const auto& kv : a.attributes) names.push_back(&kv.first);
  std::shuffle(names.begin(), names.end(), rng_);

  std::vector<std::size_t> candidates;
  std::size_t k = std::min(config_.n_match_attributes, names.size());
  while (k >= 1) {
    const std::vector<const std::string*> drawn(names.begin(),
                                                names.begin() + k);
    for (std::size_t i = 0; i < n; ++i) {
      if (i != anchor && matches(a, (*items_)[i], drawn)) {
        candidates.push_back(i);
      }
    }
    if (!candidates.empty()) break;
    k /= 2;
  }
  if (candidates.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i != anchor) candidates.push_back(i);
    }
  }
  const std::size_t partner = pick_least_shown(candidates);

  std::bernoulli_distribution flip(0.5);
  if (flip(rng_)) return {(*items_)[partner].id, a.id};
  return {a.id, (*items_)[partner].id};
}

bool Scheduler::record_response(const std::string& response_id,
                                const Comparison& c) {
  if (seen_.count(response_id)) return false;
  const auto l = items_->find(c.left_id);
  const auto r = items_->find(c.right_id);
  if (!l) throw Error("scheduler: unknown item '" + c.left_id + "'");
  if (!r) throw Error("scheduler: unknown item '" + c.right_id + "'");
  seen_.insert(response_id);
  ++counts_[*l];
  ++counts_[*r];
  return true;
}

std::int64_t Scheduler::shown_count(const std::string& id) const {
  return counts_[items_->index_of(id)];
}

Exposure Scheduler::exposure() const {
  if (counts_.empty()) return {};
  const auto [lo, hi] = std::minmax_element(counts_.begin(), counts_.end());
  return {*lo, *hi};
}

std::string Scheduler::checkpoint_json() const {
  nlohmann::json counts = nlohmann::json::object();
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    counts[(*items_)[i].id] = counts_[i];
  }
  std::ostringstream rng;
  rng << rng_;
  std::vector<std::string> seen(seen_.begin(), seen_.end());
  std::sort(seen.begin(), seen.end());
  return nlohmann::json{{"shown_counts", counts},
                        {"rng", rng.str()},
                        {"seen", seen}}
      .dump();
}

void Scheduler::restore_json(const std::string& text) {
  std::vector<std::int64_t> counts(items_->size(), 0);
  std::unordered_set<std::string> seen;
  Rng rng;
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& [id, n] : doc.at("shown_counts").items()) {
      const auto idx = items_->find(id);
      if (!idx) throw Error("scheduler checkpoint: unknown item '" + id + "'");
      counts[*idx] = n.get<std::int64_t>();
      if (counts[*idx] < 0) {
        throw Error("scheduler checkpoint: negative count for '" + id + "'");
      }
    }
    std::istringstream in(doc.at("rng").get<std::string>());
    in >> rng;
    if (!in) throw Error("scheduler checkpoint: bad rng state");
    for (const auto& s : doc.value("seen", std::vector<std::string>{})) {
      seen.insert(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("scheduler checkpoint: ") + e.what());
  }
  counts_ = std::move(counts);
  seen_ = std::move(seen);
  rng_ = rng;
}

}  // namespace pcs
