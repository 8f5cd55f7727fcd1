#ifndef PCS_DATAIO_H_
#define PCS_DATAIO_H_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcs/baselines.h"
#include "pcs/core.h"
#include "pcs/model.h"

namespace pcs {

namespace csv {
// Splits one RFC 4180 record; double quotes may wrap fields containing commas.
std::vector<std::string> split(const std::string& line);
std::string escape(const std::string& field);
}  // namespace csv

// RFC 3339 UTC timestamps <-> milliseconds since the epoch.
std::string format_timestamp(std::int64_t ms);
std::int64_t parse_timestamp(const std::string& text);

struct LoadedItems {
  std::shared_ptr<const ItemCatalog> catalog;
  Standardization standardization;
};

// Per-dimension z-score in place. Zero-variance dimensions map to 0.
Standardization standardize(std::vector<Item>& items);
void apply_standardization(std::vector<Item>& items,
                           const Standardization& stats);

// JSON lines: {"id", "features": [...], "attributes": {...}, "media_uri"?}.
// Features are standardized with the file's own statistics unless `fixed`
// is given (e.g. the statistics stored in a checkpoint).
LoadedItems parse_items(std::istream& in,
                        const Standardization* fixed = nullptr);
LoadedItems load_items(const std::string& path,
                       const Standardization* fixed = nullptr);

// CSV with header left_id,right_id,outcome,respondent_id,created_at.
std::vector<Comparison> parse_comparisons(std::istream& in);
std::vector<Comparison> load_comparisons(const std::string& path);
void write_comparisons(std::ostream& out,
                       std::span<const Comparison> comparisons);
void save_comparisons(const std::string& path,
                      std::span<const Comparison> comparisons);

struct RatingRecord {
  std::string respondent_id;
  std::string item_id;
  int rating = 0;
};

// CSV with header respondent_id,item_id,rating. `scale` > 0 bounds ratings
// to 1..scale.
std::vector<RatingRecord> parse_ratings(std::istream& in, int scale = 0);
std::vector<RatingRecord> load_ratings(const std::string& path,
                                       int scale = 0);

struct ConversionOptions {
  // created_at of the first generated comparison; later rows add 1 ms each.
  std::int64_t base_time_ms = 0;
  // Optional per-respondent cap, applied by seeded subsampling.
  std::optional<std::size_t> max_pairs_per_user;
  std::uint64_t seed = 0;
};

// Every unordered pair of items rated by the same respondent becomes one
// comparison with the lexicographically smaller id on the left; the higher
// rating wins and equal ratings give a tie.
std::vector<Comparison> ratings_to_pairs(std::span<const RatingRecord> ratings,
                                         const ConversionOptions& options = {});

// CSV item_id,score,method sorted by descending score, then id.
std::string scores_to_csv(const ScoreTable& table);
void export_scores(const ScoreTable& table, const std::string& path);
ScoreTable parse_scores(std::istream& in);
ScoreTable load_scores(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace pcs

#endif  // PCS_DATAIO_H_
