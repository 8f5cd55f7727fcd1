#ifndef PCS_CORE_H_
#define PCS_CORE_H_

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace pcs {

// All recoverable failures in the library are reported with this type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Judgment of a single pair. Left = the left item was chosen.
enum class Outcome : int { kLeft = -1, kTie = 0, kRight = 1 };

inline int to_int(Outcome y) { return static_cast<int>(y); }
Outcome outcome_from_int(long value);
inline bool is_tie(Outcome y) { return y == Outcome::kTie; }
inline Outcome negate(Outcome y) { return static_cast<Outcome>(-to_int(y)); }

struct Item {
  std::string id;
  std::vector<double> features;
  std::map<std::string, double> attributes;
  std::optional<std::string> media_uri;
};

struct Comparison {
  std::string left_id;
  std::string right_id;
  Outcome outcome = Outcome::kTie;
  std::optional<std::string> respondent_id;
  // Milliseconds since the Unix epoch.
  std::int64_t created_at = 0;

  bool operator==(const Comparison&) const = default;
};

// Immutable, indexed set of items sharing one feature dimension.
class ItemCatalog {
 public:
  ItemCatalog() = default;
  explicit ItemCatalog(std::vector<Item> items);

  const std::vector<Item>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t feature_dim() const { return feature_dim_; }

  std::optional<std::size_t> find(const std::string& id) const;
  std::size_t index_of(const std::string& id) const;
  const Item& at(const std::string& id) const { return items_[index_of(id)]; }
  const Item& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t feature_dim_ = 0;
};

struct Dataset {
  std::shared_ptr<const ItemCatalog> items;
  std::vector<Comparison> comparisons;

  const ItemCatalog& catalog() const { return *items; }
  std::size_t tie_count() const;
};

struct SplitSpec {
  double train = 0.7;
  double dev = 0.1;
  double test = 0.2;
  std::uint64_t seed = 0;
};

struct SplitResult {
  Dataset train;
  Dataset dev;
  Dataset test;
};

// Validates every integrity rule: unique ids, a single feature dimension,
// finite values, no dangling ids and no self-comparisons.
Dataset make_dataset(std::vector<Item> items,
                     std::vector<Comparison> comparisons);
Dataset make_dataset(std::shared_ptr<const ItemCatalog> items,
                     std::vector<Comparison> comparisons);

// Sizes of a three-way split by largest remainder; ties in the remainder go
// to train, then dev.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec);

// Seeded shuffle of the comparisons into train/dev/test.
SplitResult split(const Dataset& dataset, const SplitSpec& spec);

Comparison swap_augment(const Comparison& c);

}  // namespace pcs

#endif  // PCS_CORE_H_
