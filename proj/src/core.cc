#include "pcs/core.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pcs/random.h"

namespace pcs {

Outcome outcome_from_int(long value) {
  if (value < -1 || value > 1) {
    throw Error("outcome must be one of -1, 0, 1, got " +
                std::to_string(value));
  }
  return static_cast<Outcome>(value);
}

ItemCatalog::ItemCatalog(std::vector<Item> items) : items_(std::move(items)) {
  index_.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const Item& item = items_[i];
    if (item.id.empty()) {
      throw Error("item at position " + std::to_string(i) + " has empty id");
    }
    if (!index_.emplace(item.id, i).second) {
      throw Error("duplicate item id '" + item.id + "'");
    }
    if (i == 0) {
      feature_dim_ = item.features.size();
    } else if (item.features.size() != feature_dim_) {
      throw Error("inconsistent feature dimension for item '" + item.id +
                  "': expected " + std::to_string(feature_dim_) + ", got " +
                  std::to_string(item.features.size()));
    }
    for (double v : item.features) {
      if (!std::isfinite(v)) {
        throw Error("non-finite feature in item '" + item.id + "'");
      }
    }
    for (const auto& [name, v] : item.attributes) {
      if (!std::isfinite(v)) {
        throw Error("non-finite attribute '" + name + "' in item '" +
                    item.id + "'");
      }
    }
  }
}

std::optional<std::size_t> ItemCatalog::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ItemCatalog::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error("unknown item id '" + id + "'");
  return it->second;
}

std::size_t Dataset::tie_count() const {
  return static_cast<std::size_t>(
      std::count_if(comparisons.begin(), comparisons.end(),
                    [](const Comparison& c) { return is_tie(c.outcome); }));
}

Dataset make_dataset(std::vector<Item> items,
                     std::vector<Comparison> comparisons) {
  return make_dataset(std::make_shared<const ItemCatalog>(std::move(items)),
                      std::move(comparisons));
}

Dataset make_dataset(std::shared_ptr<const ItemCatalog> items,
                     std::vector<Comparison> comparisons) {
  if (!items) throw Error("dataset requires an item catalog");
  for (std::size_t k = 0; k < comparisons.size(); ++k) {
    const Comparison& c = comparisons[k];
    auto where = [&] {
      return "comparison #" + std::to_string(k) + " (" + c.left_id + ", " +
             c.right_id + ")";
    };
    if (c.left_id == c.right_id) {
      throw Error("self-comparison in " + where());
    }
    if (!items->find(c.left_id)) {
      throw Error("dangling id '" + c.left_id + "' in " + where());
    }
    if (!items->find(c.right_id)) {
      throw Error("dangling id '" + c.right_id + "' in " + where());
    }
    const int y = to_int(c.outcome);
    if (y < -1 || y > 1) throw Error("invalid outcome in " + where());
  }
  return Dataset{std::move(items), std::move(comparisons)};
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec) {
  const std::array<double, 3> fractions{spec.train, spec.dev, spec.test};
  for (double f : fractions) {
    if (!(f > 0.0 && f < 1.0)) {
      throw Error("split fractions must lie in (0, 1)");
    }
  }
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9) {
    throw Error("split fractions must sum to 1");
  }
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double quota = fractions[k] * static_cast<double>(n);
    // Absorb representation error such as 0.7 * 100 = 70.00000000000001.
    const double whole = std::floor(quota + 1e-9);
    sizes[k] = static_cast<std::size_t>(whole);
    remainders[k] = std::max(0.0, quota - whole);
    assigned += sizes[k];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return remainders[a] > remainders[b] + 1e-12;
  });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) {
    ++sizes[order[k % 3]];
  }
  return sizes;
}

SplitResult split(const Dataset& dataset, const SplitSpec& spec) {
  const std::size_t n = dataset.comparisons.size();
  if (n < 3) throw Error("split requires at least 3 comparisons");
  const auto sizes = split_sizes(n, spec);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  SplitResult out{Dataset{dataset.items, {}}, Dataset{dataset.items, {}},
                  Dataset{dataset.items, {}}};
  std::array<Dataset*, 3> parts{&out.train, &out.dev, &out.test};
  std::size_t cursor = 0;
  for (int k = 0; k < 3; ++k) {
    parts[k]->comparisons.reserve(sizes[k]);
    for (std::size_t m = 0; m < sizes[k]; ++m) {
      parts[k]->comparisons.push_back(dataset.comparisons[order[cursor++]]);
    }
  }
  return out;
}

Comparison swap_augment(const Comparison& c) {
  Comparison out = c;
  std::swap(out.left_id, out.right_id);
  out.outcome = negate(c.outcome);
  return out;
}

}  // namespace pcs
