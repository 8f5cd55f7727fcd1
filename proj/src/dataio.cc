#include "pcs/dataio.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pcs/random.h"

namespace pcs {

// ------------------------------------------------------------------ CSV

namespace csv {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          field += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace csv

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

// Maps header names to column positions and checks required columns.
std::map<std::string, std::size_t> read_header(
    std::istream& in, std::initializer_list<const char*> required) {
  std::string line;
  if (!std::getline(in, line)) throw Error("missing CSV header");
  std::map<std::string, std::size_t> cols;
  const auto names = csv::split(line);
  for (std::size_t k = 0; k < names.size(); ++k) cols[names[k]] = k;
  for (const char* name : required) {
    if (!cols.count(name)) {
      throw Error(std::string("missing column '") + name + "'");
    }
  }
  return cols;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

long parse_integer(const std::string& text, std::size_t line_no) {
  std::size_t used = 0;
  long value = 0;
  try {
    value = std::stol(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw Error("line " + std::to_string(line_no) + ": expected an integer, got '" +
                text + "'");
  }
  return value;
}

}  // namespace

// ----------------------------------------------------------- timestamps

std::string format_timestamp(std::int64_t ms) {
  std::int64_t secs = ms / 1000;
  std::int64_t frac = ms % 1000;
  if (frac < 0) {
    frac += 1000;
    --secs;
  }
  const std::time_t t = static_cast<std::time_t>(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  std::string out = buf;
  if (frac != 0) {
    char fbuf[8];
    std::snprintf(fbuf, sizeof fbuf, ".%03d", static_cast<int>(frac));
    out += fbuf;
  }
  return out + "Z";
}

std::int64_t parse_timestamp(const std::string& text) {
  std::tm tm{};
  int consumed = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &tm.tm_year,
                  &tm.tm_mon, &tm.tm_mday, &tm.tm_hour, &tm.tm_min,
                  &tm.tm_sec, &consumed) != 6) {
    throw Error("invalid RFC 3339 timestamp '" + text + "'");
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  std::int64_t ms = static_cast<std::int64_t>(timegm(&tm)) * 1000;
  std::size_t pos = static_cast<std::size_t>(consumed);
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    double scale = 100.0;
    double frac_ms = 0.0;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      frac_ms += (text[pos] - '0') * scale;
      scale /= 10.0;
      ++pos;
    }
    ms += static_cast<std::int64_t>(std::floor(frac_ms));
  }
  const std::string zone = text.substr(pos);
  if (zone == "Z" || zone == "z") return ms;
  int hh = 0;
  int mm = 0;
  if (zone.size() == 6 && (zone[0] == '+' || zone[0] == '-') &&
      std::sscanf(zone.c_str() + 1, "%2d:%2d", &hh, &mm) == 2) {
    const std::int64_t offset = (hh * 60 + mm) * 60000LL;
    return zone[0] == '+' ? ms - offset : ms + offset;
  }
  throw Error("invalid RFC 3339 timestamp '" + text + "'");
}

// ---------------------------------------------------------------- items

Standardization standardize(std::vector<Item>& items) {
  Standardization s;
  if (items.empty()) return s;
  const std::size_t d = items.front().features.size();
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 0.0);
  const double n = static_cast<double>(items.size());
  for (const Item& it : items) {
    for (std::size_t k = 0; k < d; ++k) s.mean[k] += it.features[k];
  }
  for (double& m : s.mean) m /= n;
  for (const Item& it : items) {
    for (std::size_t k = 0; k < d; ++k) {
      const double dev = it.features[k] - s.mean[k];
      s.stddev[k] += dev * dev;
    }
  }
  for (std::size_t k = 0; k < d; ++k) {
    const double sd = std::sqrt(s.stddev[k] / n);
    // Zero-variance guard, relative to the magnitude of the values.
    s.stddev[k] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[k])) ? sd : 0.0;
  }
  apply_standardization(items, s);
  return s;
}

void apply_standardization(std::vector<Item>& items,
                           const Standardization& stats) {
  for (Item& it : items) {
    if (it.features.size() != stats.mean.size()) {
      throw Error("standardization dimension mismatch for item '" + it.id + "'");
    }
    for (std::size_t k = 0; k < it.features.size(); ++k) {
      it.features[k] = stats.stddev[k] > 0.0
                           ? (it.features[k] - stats.mean[k]) / stats.stddev[k]
                           : 0.0;
    }
  }
}

LoadedItems parse_items(std::istream& in, const Standardization* fixed) {
  using nlohmann::json;
  std::vector<Item> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
    try {
      const json j = json::parse(line);
      Item item;
      item.id = j.at("id").get<std::string>();
      item.features = j.at("features").get<std::vector<double>>();
      if (j.contains("attributes")) {
        item.attributes =
            j["attributes"].get<std::map<std::string, double>>();
      }
      if (j.contains("media_uri") && !j["media_uri"].is_null()) {
        item.media_uri = j["media_uri"].get<std::string>();
      }
      if (!items.empty() &&
          item.features.size() != items.front().features.size()) {
        throw Error(where() + "feature dimension " +
                    std::to_string(item.features.size()) + " differs from " +
                    std::to_string(items.front().features.size()));
      }
      items.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw Error(where() + e.what());
    }
  }
  LoadedItems out;
  if (fixed) {
    apply_standardization(items, *fixed);
    out.standardization = *fixed;
  } else {
    out.standardization = standardize(items);
  }
  out.catalog = std::make_shared<const ItemCatalog>(std::move(items));
  return out;
}

LoadedItems load_items(const std::string& path, const Standardization* fixed) {
  auto in = open_input(path);
  try {
    return parse_items(in, fixed);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

// ---------------------------------------------------------- comparisons

std::vector<Comparison> parse_comparisons(std::istream& in) {
  const auto cols = read_header(
      in, {"left_id", "right_id", "outcome", "respondent_id", "created_at"});
  std::vector<Comparison> out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto f = csv::split(line);
    if (f.size() < cols.size()) {
      throw Error("line " + std::to_string(line_no) + ": expected " +
                  std::to_string(cols.size()) + " fields");
    }
    Comparison c;
    c.left_id = f[cols.at("left_id")];
    c.right_id = f[cols.at("right_id")];
    const long y = parse_integer(f[cols.at("outcome")], line_no);
    if (y < -1 || y > 1) {
      throw Error("line " + std::to_string(line_no) + ": bad outcome value '" +
                  f[cols.at("outcome")] + "'");
    }
    c.outcome = static_cast<Outcome>(y);
    const std::string& who = f[cols.at("respondent_id")];
    if (!who.empty()) c.respondent_id = who;
    const std::string& when = f[cols.at("created_at")];
    if (!when.empty()) {
      try {
        c.created_at = parse_timestamp(when);
      } catch (const Error& e) {
        throw Error("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Comparison> load_comparisons(const std::string& path) {
  auto in = open_input(path);
  try {
    return parse_comparisons(in);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

void write_comparisons(std::ostream& out,
                       std::span<const Comparison> comparisons) {
  out << "left_id,right_id,outcome,respondent_id,created_at\n";
  for (const Comparison& c : comparisons) {
    out << csv::escape(c.left_id) << ',' << csv::escape(c.right_id) << ','
        << to_int(c.outcome) << ','
        << csv::escape(c.respondent_id.value_or("")) << ','
        << format_timestamp(c.created_at) << '\n';
  }
}

void save_comparisons(const std::string& path,
                      std::span<const Comparison> comparisons) {
  std::ostringstream out;
  write_comparisons(out, comparisons);
  write_file(path, out.str());
}

// -------------------------------------------------------------- ratings

std::vector<RatingRecord> parse_ratings(std::istream& in, int scale) {
  const auto cols = read_header(in, {"respondent_id", "item_id", "rating"});
  std::vector<RatingRecord> out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto f = csv::split(line);
    if (f.size() < cols.size()) {
      throw Error("line " + std::to_string(line_no) + ": expected " +
                  std::to_string(cols.size()) + " fields");
    }
    RatingRecord r;
    r.respondent_id = f[cols.at("respondent_id")];
    r.item_id = f[cols.at("item_id")];
    const long v = parse_integer(f[cols.at("rating")], line_no);
    if (v < 1 || (scale > 0 && v > scale)) {
      throw Error("line " + std::to_string(line_no) + ": rating " +
                  std::to_string(v) + " outside 1.." +
                  (scale > 0 ? std::to_string(scale) : std::string("inf")));
    }
    r.rating = static_cast<int>(v);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RatingRecord> load_ratings(const std::string& path, int scale) {
  auto in = open_input(path);
  try {
    return parse_ratings(in, scale);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

std::vector<Comparison> ratings_to_pairs(std::span<const RatingRecord> ratings,
                                         const ConversionOptions& options) {
  // respondent -> (item -> rating), both ordered.
  std::map<std::string, std::map<std::string, int>> by_user;
  std::set<std::string> duplicates;
  for (const RatingRecord& r : ratings) {
    if (!by_user[r.respondent_id].emplace(r.item_id, r.rating).second) {
      duplicates.insert(r.respondent_id + "/" + r.item_id);
    }
  }
  if (!duplicates.empty()) {
    std::string list;
    for (const auto& d : duplicates) list += (list.empty() ? "" : ", ") + d;
    throw Error("duplicate (respondent, item) ratings: " + list);
  }

  std::vector<Comparison> out;
  Rng rng(options.seed);
  std::int64_t clock = options.base_time_ms;
  for (const auto& [user, rated] : by_user) {
    std::vector<Comparison> pairs;
    for (auto a = rated.begin(); a != rated.end(); ++a) {
      for (auto b = std::next(a); b != rated.end(); ++b) {
        Comparison c;
        c.left_id = a->first;
        c.right_id = b->first;
        c.outcome = a->second > b->second   ? Outcome::kLeft
                    : a->second < b->second ? Outcome::kRight
                                            : Outcome::kTie;
        c.respondent_id = user;
        pairs.push_back(std::move(c));
      }
    }
    if (options.max_pairs_per_user &&
        pairs.size() > *options.max_pairs_per_user) {
      std::vector<std::size_t> keep(pairs.size());
      for (std::size_t k = 0; k < keep.size(); ++k) keep[k] = k;
      std::shuffle(keep.begin(), keep.end(), rng);
      keep.resize(*options.max_pairs_per_user);
      std::sort(keep.begin(), keep.end());
      std::vector<Comparison> kept;
      for (std::size_t k : keep) kept.push_back(std::move(pairs[k]));
      pairs = std::move(kept);
    }
    for (Comparison& c : pairs) {
      c.created_at = clock++;
      out.push_back(std::move(c));
    }
  }
  return out;
}

// --------------------------------------------------------------- scores

std::string scores_to_csv(const ScoreTable& table) {
  if (table.scores.empty()) throw Error("export_scores: empty score table");
  std::vector<std::pair<std::string, double>> rows(table.scores.begin(),
                                                   table.scores.end());
  // The map is already id-ordered, so a stable sort breaks ties by id.
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  std::ostringstream out;
  out.precision(17);
  out << "item_id,score,method\n";
  for (const auto& [id, score] : rows) {
    out << csv::escape(id) << ',' << score << ',' << csv::escape(table.method)
        << '\n';
  }
  return out.str();
}

void export_scores(const ScoreTable& table, const std::string& path) {
  write_file(path, scores_to_csv(table));
}

ScoreTable parse_scores(std::istream& in) {
  const auto cols = read_header(in, {"item_id", "score", "method"});
  ScoreTable t;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto f = csv::split(line);
    if (f.size() < cols.size()) {
      throw Error("line " + std::to_string(line_no) + ": expected " +
                  std::to_string(cols.size()) + " fields");
    }
    double score = 0.0;
    try {
      score = std::stod(f[cols.at("score")]);
    } catch (const std::exception&) {
      throw Error("line " + std::to_string(line_no) + ": bad score");
    }
    t.scores[f[cols.at("item_id")]] = score;
    t.method = f[cols.at("method")];
  }
  return t;
}

ScoreTable load_scores(const std::string& path) {
  auto in = open_input(path);
  return parse_scores(in);
}

std::string read_file(const std::string& path) {
  auto in = open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace pcs
