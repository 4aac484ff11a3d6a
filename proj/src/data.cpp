#include "counterclr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "counterclr/error.hpp"
#include "counterclr/rng.hpp"

namespace counterclr {

RatingScale::RatingScale(double lo, double hi) : r_min(lo), r_max(hi) {
  if (!(lo < hi)) {
    throw ArgumentError("rating scale requires r_min < r_max");
  }
}

std::uint32_t IdMap::intern(const std::string& raw) {
  auto [it, inserted] =
      index_.try_emplace(raw, static_cast<std::uint32_t>(raw_.size()));
  if (inserted) raw_.push_back(raw);
  return it->second;
}

std::optional<std::uint32_t> IdMap::find(const std::string& raw) const {
  auto it = index_.find(raw);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

IdMap IdMap::sequential(std::size_t n) {
  IdMap map;
  for (std::size_t i = 0; i < n; ++i) map.intern(std::to_string(i));
  return map;
}

IdMap IdMap::from_raw(std::vector<std::string> raw) {
  IdMap map;
  for (const auto& r : raw) {
    const auto before = map.size();
    map.intern(r);
    if (map.size() == before) throw DuplicateKeyError("duplicate raw id " + r);
  }
  return map;
}

InteractionDataset::InteractionDataset(std::size_t n_users,
                                       std::size_t n_items,
                                       std::vector<Rating> observed,
                                       RatingScale scale)
    : n_users_(n_users),
      n_items_(n_items),
      observed_(std::move(observed)),
      scale_(scale) {
  if (!(scale_.r_min < scale_.r_max)) {
    throw ArgumentError("rating scale requires r_min < r_max");
  }
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(observed_.size() * 2);
  for (const auto& r : observed_) {
    if (r.user >= n_users_ || r.item >= n_items_) {
      throw ArgumentError("rating index out of range");
    }
    if (!scale_.contains(r.value)) {
      throw RangeError("rating " + format_double(r.value) + " outside scale");
    }
    const auto key = static_cast<std::uint64_t>(r.user) * n_items_ + r.item;
    if (!seen.insert(key).second) {
      throw DuplicateKeyError("duplicate (user, item) pair");
    }
  }
  users_ = IdMap::sequential(n_users_);
  items_ = IdMap::sequential(n_items_);
}

double InteractionDataset::mean_rating() const {
  if (observed_.empty()) return scale_.mid();
  double s = 0.0;
  for (const auto& r : observed_) s += r.value;
  return s / static_cast<double>(observed_.size());
}

void InteractionDataset::set_id_maps(IdMap users, IdMap items) {
  if (users.size() != n_users_ || items.size() != n_items_) {
    throw ArgumentError("id tables do not match dataset dimensions");
  }
  users_ = std::move(users);
  items_ = std::move(items);
}

ObservationIndex::ObservationIndex(const InteractionDataset& ds)
    : rows_(ds.n_users()), total_(ds.size()), n_items_(ds.n_items()) {
  for (const auto& r : ds.observed()) rows_[r.user].push_back({r.item, r.value});
  for (auto& row : rows_) {
    std::sort(row.begin(), row.end(),
              [](const Entry& a, const Entry& b) { return a.item < b.item; });
  }
}

std::optional<double> ObservationIndex::rating(UserIndex u, ItemIndex i) const {
  const auto& row = rows_[u];
  auto it = std::lower_bound(
      row.begin(), row.end(), i,
      [](const Entry& e, ItemIndex item) { return e.item < item; });
  if (it == row.end() || it->item != i) return std::nullopt;
  return it->value;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return fields;
}

bool parse_real(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '+')) {
    text.remove_prefix(1);
  }
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (text.empty()) return false;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() &&
         std::isfinite(out);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

InteractionDataset parse_triples(std::istream& in, const RatingScale& scale,
                                 IdMap users, IdMap items) {
  std::vector<Rating> observed;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError("expected 3 tab-separated fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    double value = 0.0;
    if (!parse_real(fields[2], value)) {
      throw ParseError("non-numeric rating '" + fields[2] + "'", line_no);
    }
    if (!scale.contains(value)) {
      throw RangeError("rating " + fields[2] + " outside scale", line_no);
    }
    const auto u = users.intern(fields[0]);
    const auto i = items.intern(fields[1]);
    const auto key = (static_cast<std::uint64_t>(u) << 32) | i;
    if (!seen.insert(key).second) {
      throw DuplicateKeyError(
          "duplicate pair (" + fields[0] + ", " + fields[1] + ")", line_no);
    }
    observed.push_back({u, i, value});
  }
  InteractionDataset ds(users.size(), items.size(), std::move(observed), scale);
  ds.set_id_maps(std::move(users), std::move(items));
  return ds;
}

InteractionDataset load_triples(const std::filesystem::path& path,
                                const RatingScale& scale) {
  auto in = open_input(path);
  return parse_triples(in, scale);
}

InteractionDataset load_triples(const std::filesystem::path& path,
                                const RatingScale& scale, IdMap users,
                                IdMap items) {
  auto in = open_input(path);
  return parse_triples(in, scale, std::move(users), std::move(items));
}

InteractionDataset parse_coat_matrix(std::istream& in, const RatingScale& scale) {
  std::vector<Rating> observed;
  std::string line;
  std::size_t line_no = 0;
  std::size_t rows = 0;
  std::optional<std::size_t> cols;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string tok;
    std::size_t c = 0;
    while (fields >> tok) {
      double v = 0.0;
      if (!parse_real(tok, v)) {
        throw ParseError("non-numeric cell '" + tok + "'", line_no);
      }
      if (v != 0.0) {
        if (!scale.contains(v)) {
          throw RangeError("cell value " + tok + " outside scale", line_no);
        }
        observed.push_back({static_cast<UserIndex>(rows),
                            static_cast<ItemIndex>(c), v});
      }
      ++c;
    }
    if (c == 0) continue;
    if (cols && *cols != c) {
      throw ParseError("ragged row: expected " + std::to_string(*cols) +
                           " columns, got " + std::to_string(c),
                       line_no);
    }
    cols = c;
    ++rows;
  }
  return InteractionDataset(rows, cols.value_or(0), std::move(observed), scale);
}

InteractionDataset load_coat_matrix(const std::filesystem::path& path,
                                    const RatingScale& scale) {
  auto in = open_input(path);
  return parse_coat_matrix(in, scale);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_triples(const InteractionDataset& ds, std::ostream& out) {
  for (const auto& r : ds.observed()) {
    out << ds.users().raw(r.user) << '\t' << ds.items().raw(r.item) << '\t'
        << format_double(r.value) << '\n';
  }
}

void save_triples(const InteractionDataset& ds,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_triples(ds, out);
  if (!out) throw IoError("write failed for " + path.string());
}

void save_dense_matrix(std::span<const double> values, std::size_t rows,
                       std::size_t cols, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out << ' ';
      out << format_double(values[r * cols + c]);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

DataSplit split(const InteractionDataset& ds, double val_fraction,
                std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ArgumentError("val_fraction must lie in (0, 1)");
  }
  if (ds.size() < 2) {
    throw ArgumentError("split requires at least 2 observed ratings");
  }
  auto rng = make_rng(seed, Stream::kSplit);
  std::vector<Rating> train;
  std::vector<Rating> validation;
  for (const auto& r : ds.observed()) {
    (uniform01(rng) < val_fraction ? validation : train).push_back(r);
  }
  DataSplit out{
      InteractionDataset(ds.n_users(), ds.n_items(), std::move(train),
                         ds.scale()),
      InteractionDataset(ds.n_users(), ds.n_items(), std::move(validation),
                         ds.scale()),
      std::nullopt};
  out.train.set_id_maps(ds.users(), ds.items());
  out.validation.set_id_maps(ds.users(), ds.items());
  return out;
}

}  // namespace counterclr
