#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace counterclr {

using UserIndex = std::uint32_t;
using ItemIndex = std::uint32_t;

struct RatingScale {
  double r_min = 1.0;
  double r_max = 5.0;

  RatingScale() = default;
  RatingScale(double lo, double hi);

  double mid() const { return 0.5 * (r_min + r_max); }
  double width() const { return r_max - r_min; }
  bool contains(double r) const { return r >= r_min && r <= r_max; }
  bool operator==(const RatingScale&) const = default;
};

struct Rating {
  UserIndex user;
  ItemIndex item;
  double value;
  bool operator==(const Rating&) const = default;
};

// Raw-id <-> dense-index table; indices are assigned in first-appearance order.
class IdMap {
 public:
  std::uint32_t intern(const std::string& raw);
  std::optional<std::uint32_t> find(const std::string& raw) const;
  const std::string& raw(std::uint32_t index) const { return raw_.at(index); }
  std::size_t size() const { return raw_.size(); }
  const std::vector<std::string>& raw_ids() const { return raw_; }

  // Identity table "0", "1", ..., "n-1".
  static IdMap sequential(std::size_t n);
  static IdMap from_raw(std::vector<std::string> raw);

 private:
  std::vector<std::string> raw_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Explicit-feedback data: o_{u,i} = 1 iff (u, i) appears in `observed()`.
// Immutable after construction.
class InteractionDataset {
 public:
  InteractionDataset() = default;
  // Validates every invariant; throws ArgumentError / RangeError /
  // DuplicateKeyError.
  InteractionDataset(std::size_t n_users, std::size_t n_items,
                     std::vector<Rating> observed, RatingScale scale);

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t size() const { return observed_.size(); }
  bool empty() const { return observed_.empty(); }
  const std::vector<Rating>& observed() const { return observed_; }
  const RatingScale& scale() const { return scale_; }

  double mean_rating() const;

  // Raw-id tables retained from loading (sequential when synthesized).
  const IdMap& users() const { return users_; }
  const IdMap& items() const { return items_; }
  void set_id_maps(IdMap users, IdMap items);

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::vector<Rating> observed_;
  RatingScale scale_;
  IdMap users_;
  IdMap items_;
};

struct DataSplit {
  InteractionDataset train;
  InteractionDataset validation;
  std::optional<InteractionDataset> test;
};

// Per-user sorted lookup of observed ratings.
class ObservationIndex {
 public:
  explicit ObservationIndex(const InteractionDataset& ds);

  std::optional<double> rating(UserIndex u, ItemIndex i) const;
  bool observed(UserIndex u, ItemIndex i) const {
    return rating(u, i).has_value();
  }
  std::size_t count(UserIndex u) const { return rows_[u].size(); }
  std::size_t total() const { return total_; }
  std::size_t n_items() const { return n_items_; }

 private:
  struct Entry {
    ItemIndex item;
    double value;
  };
  std::vector<std::vector<Entry>> rows_;
  std::size_t total_ = 0;
  std::size_t n_items_ = 0;
};

// Tab-separated `user<TAB>item<TAB>rating` lines, '#' comments skipped.
// When `users`/`items` are given, ids are interned into those tables (new ids
// extend them) and the dataset spans the final table sizes.
InteractionDataset load_triples(const std::filesystem::path& path,
                                const RatingScale& scale);
InteractionDataset load_triples(const std::filesystem::path& path,
                                const RatingScale& scale, IdMap users,
                                IdMap items);
InteractionDataset parse_triples(std::istream& in, const RatingScale& scale,
                                 IdMap users = {}, IdMap items = {});

// Dense whitespace-separated matrix, 0 = unobserved.
InteractionDataset load_coat_matrix(const std::filesystem::path& path,
                                    const RatingScale& scale);
InteractionDataset parse_coat_matrix(std::istream& in, const RatingScale& scale);

// Writes raw ids from the dataset's id tables; shortest round-trip decimals.
void write_triples(const InteractionDataset& ds, std::ostream& out);
void save_triples(const InteractionDataset& ds,
                  const std::filesystem::path& path);

// Writes a dense N x M matrix in the Coat layout.
void save_dense_matrix(std::span<const double> values, std::size_t rows,
                       std::size_t cols, const std::filesystem::path& path);

// Assigns each triple to validation with probability `val_fraction`.
DataSplit split(const InteractionDataset& ds, double val_fraction,
                std::uint64_t seed);

std::string format_double(double v);

}  // namespace counterclr
