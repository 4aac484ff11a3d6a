#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "counterclr/data.hpp"
#include "counterclr/error.hpp"

using namespace counterclr;
namespace fs = std::filesystem;

namespace {

InteractionDataset parse(const std::string& text, RatingScale scale = {1, 5}) {
  std::istringstream in(text);
  return parse_triples(in, scale);
}

InteractionDataset coat(const std::string& text) {
  std::istringstream in(text);
  return parse_coat_matrix(in, {1, 5});
}

fs::path temp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "counterclr_unit";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("rating scale requires r_min < r_max") {
  CHECK_THROWS_AS(RatingScale(5, 5), ArgumentError);
  CHECK_THROWS_AS(RatingScale(5, 1), ArgumentError);
  const RatingScale s(1, 5);
  CHECK(s.mid() == 3.0);
  CHECK(s.contains(1.0));
  CHECK_FALSE(s.contains(5.5));
}

TEST_CASE("triples remap raw ids by first appearance") {
  const auto ds = parse("a\tx\t5\nb\tx\t1");
  CHECK(ds.n_users() == 2);
  CHECK(ds.n_items() == 1);
  REQUIRE(ds.size() == 2);
  CHECK(ds.observed()[0] == Rating{0, 0, 5.0});
  CHECK(ds.observed()[1] == Rating{1, 0, 1.0});
  CHECK(ds.users().raw(1) == "b");
  CHECK(ds.items().raw(0) == "x");
}

TEST_CASE("empty triple file gives an empty dataset") {
  const auto ds = parse("");
  CHECK(ds.n_users() == 0);
  CHECK(ds.n_items() == 0);
  CHECK(ds.empty());
}

TEST_CASE("comments and blank lines are skipped") {
  const auto ds = parse("# header\n\na\tx\t2\n# trailing\n");
  CHECK(ds.size() == 1);
}

TEST_CASE("out-of-scale rating is a range error with its line") {
  try {
    parse("a\tx\t9");
    FAIL("expected a range error");
  } catch (const RangeError& e) {
    CHECK(e.line() == 1);
    CHECK(e.code() == ExitCode::kData);
  }
}

TEST_CASE("malformed lines are parse errors with line numbers") {
  try {
    parse("a\tx\t3\nb\ty");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse("a\tx\tfive"), ParseError);
  CHECK_THROWS_AS(parse("a\tx\t3\t4"), ParseError);
}

TEST_CASE("duplicate pairs are rejected") {
  try {
    parse("a\tx\t3\na\tx\t4");
    FAIL("expected a duplicate-key error");
  } catch (const DuplicateKeyError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("dataset constructor enforces invariants") {
  const RatingScale s(1, 5);
  CHECK_THROWS_AS(InteractionDataset(1, 1, {{1, 0, 3.0}}, s), Error);
  CHECK_THROWS_AS(InteractionDataset(1, 1, {{0, 1, 3.0}}, s), Error);
  CHECK_THROWS_AS(InteractionDataset(1, 1, {{0, 0, 0.0}}, s), RangeError);
  CHECK_THROWS_AS(InteractionDataset(2, 2, {{0, 0, 3.0}, {0, 0, 2.0}}, s),
                  DuplicateKeyError);
  const InteractionDataset ok(2, 2, {{0, 0, 3.0}, {1, 1, 2.0}}, s);
  CHECK(ok.size() <= ok.n_users() * ok.n_items());
  CHECK(ok.mean_rating() == doctest::Approx(2.5));
}

TEST_CASE("coat matrix: nonzero cells become observations") {
  const auto ds = coat("0 5\n3 0");
  CHECK(ds.n_users() == 2);
  CHECK(ds.n_items() == 2);
  REQUIRE(ds.size() == 2);
  CHECK(ds.observed()[0] == Rating{0, 1, 5.0});
  CHECK(ds.observed()[1] == Rating{1, 0, 3.0});
}

TEST_CASE("coat matrix: all zeros and ragged rows") {
  const auto ds = coat("0 0 0\n0 0 0\n0 0 0\n");
  CHECK(ds.n_users() == 3);
  CHECK(ds.n_items() == 3);
  CHECK(ds.empty());
  CHECK_THROWS_AS(coat("1 2\n3 4 5"), ParseError);
  CHECK_THROWS_AS(coat("0 7"), RangeError);
}

TEST_CASE("split is a deterministic partition") {
  std::vector<Rating> rows;
  for (UserIndex u = 0; u < 10; ++u) {
    for (ItemIndex i = 0; i < 10; ++i) rows.push_back({u, i, 1.0 + (u + i) % 5});
  }
  const InteractionDataset ds(10, 10, rows, {1, 5});
  const auto a = split(ds, 0.1, 42);
  const auto b = split(ds, 0.1, 42);
  CHECK(a.train.observed() == b.train.observed());
  CHECK(a.validation.observed() == b.validation.observed());
  CHECK(a.train.size() + a.validation.size() == ds.size());
  CHECK(a.validation.size() >= 2);
  CHECK(a.validation.size() <= 25);

  std::set<std::pair<UserIndex, ItemIndex>> keys;
  for (const auto& r : a.train.observed()) keys.insert({r.user, r.item});
  for (const auto& r : a.validation.observed()) {
    CHECK(keys.insert({r.user, r.item}).second);
  }
  CHECK(keys.size() == ds.size());
  CHECK(a.train.n_users() == ds.n_users());
  CHECK(a.validation.n_items() == ds.n_items());

  CHECK_THROWS_AS(split(ds, 1.5, 1), ArgumentError);
  CHECK_THROWS_AS(split(ds, 0.0, 1), ArgumentError);
  CHECK_THROWS_AS(split(InteractionDataset(1, 1, {{0, 0, 2.0}}, {1, 5}), 0.5, 1),
                  ArgumentError);
}

TEST_CASE("triples round-trip through disk") {
  const auto ds = parse("u7\ti3\t4.25\nu2\ti3\t1\nu7\ti9\t3.3333333333333335\n");
  const auto path = temp_file("roundtrip.tsv");
  save_triples(ds, path);
  const auto back = load_triples(path, ds.scale());
  CHECK(back.observed() == ds.observed());
  CHECK(back.users().raw_ids() == ds.users().raw_ids());
  CHECK(back.items().raw_ids() == ds.items().raw_ids());

  std::ostringstream first;
  std::ostringstream second;
  write_triples(ds, first);
  write_triples(back, second);
  CHECK(first.str() == second.str());
}

TEST_CASE("missing files are I/O errors") {
  CHECK_THROWS_AS(load_triples("/nonexistent/x.tsv", {1, 5}), IoError);
  CHECK_THROWS_AS(load_coat_matrix("/nonexistent/x.txt", {1, 5}), IoError);
}

TEST_CASE("observation index lookups") {
  const InteractionDataset ds(2, 3, {{1, 2, 4.0}, {0, 1, 2.0}, {1, 0, 5.0}}, {1, 5});
  const ObservationIndex index(ds);
  CHECK(index.observed(1, 2));
  CHECK_FALSE(index.observed(0, 0));
  CHECK(index.rating(1, 0).value() == 5.0);
  CHECK(index.count(1) == 2);
  CHECK(index.total() == 3);
}

TEST_CASE("format_double round-trips exactly") {
  for (double v : {0.1, 1.0 / 3.0, 4.0, -2.5e-300, 123456.789}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(4.0) == "4");
}
