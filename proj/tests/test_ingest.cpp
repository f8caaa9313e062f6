#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>

#include "gazetrait/error.hpp"
#include "gazetrait/ingest.hpp"
#include "gazetrait/io.hpp"
#include "support.hpp"

using namespace gazetrait;
using namespace gazetrait::ingest;

namespace {

const char* kHeader =
    "timestamp_s,left_x_px,left_y_px,right_x_px,right_y_px,left_pupil_mm,right_pupil_mm\n";

std::filesystem::path write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

double oracle_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

BfiKey toy_key(std::initializer_list<std::pair<Trait, bool>> items) {
  BfiKey key;
  int i = 1;
  for (const auto& [t, rev] : items) key.items.push_back({i++, t, rev});
  return key;
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("per-eye merging") {
  testing::TempDir dir("ingest");
  const auto p = write(dir.path() / "r.csv",
                       std::string(kHeader) +
                           "0.0,100,10,200,30,,3.1\n"
                           "0.0166667,,,50,60,2.0,4.0\n"
                           "0.0333333,,,,,nan,\n");
  const auto s = parse_recording(p, RecordingConfig{});
  REQUIRE(s.size() == 3);
  CHECK(*s.samples[0].gaze_x_px == 150.0);
  CHECK(*s.samples[0].gaze_y_px == 20.0);
  CHECK(*s.samples[0].pupil_mm == 3.1);
  CHECK(*s.samples[1].gaze_x_px == 50.0);
  CHECK(*s.samples[1].pupil_mm == 3.0);
  CHECK_FALSE(s.samples[2].gaze_x_px.has_value());
  CHECK_FALSE(s.samples[2].pupil_mm.has_value());
  CHECK(s.participant_id.value == "r");
}

TEST_CASE("recording errors") {
  testing::TempDir dir("ingest");
  const auto nonmono = write(dir.path() / "a.csv", std::string(kHeader) +
                                                       "0.0,1,1,1,1,3,3\n"
                                                       "0.0166,1,1,1,1,3,3\n"
                                                       "0.0150,1,1,1,1,3,3\n");
  CHECK(code_of([&] { parse_recording(nonmono, RecordingConfig{}); }) ==
        ErrorCode::NonMonotonicTimestamps);

  const auto short_file = write(dir.path() / "b.csv", std::string(kHeader) + "0.0,1,1,1,1,3,3\n");
  CHECK(code_of([&] { parse_recording(short_file, RecordingConfig{}); }) == ErrorCode::TooShort);

  const auto malformed = write(dir.path() / "c.csv", std::string(kHeader) +
                                                         "0.0,1,1,1,1,3,3\n"
                                                         "0.0166667,1,abc,1,1,3,3\n");
  try {
    parse_recording(malformed, RecordingConfig{});
    FAIL("expected MalformedRow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedRow);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }

  const auto ragged = write(dir.path() / "d.csv", std::string(kHeader) + "0.0,1,1\n");
  CHECK(code_of([&] { parse_recording(ragged, RecordingConfig{}); }) == ErrorCode::MalformedRow);

  const auto header = write(dir.path() / "e.csv", "t,x,y\n0,1,1\n");
  CHECK(code_of([&] { parse_recording(header, RecordingConfig{}); }) == ErrorCode::SchemaMismatch);
}

TEST_CASE("recording round trip") {
  testing::TempDir dir("ingest");
  const auto s = testing::random_session("p001", 50, 3, 0.2);
  write_recording(s, dir.path() / "p001.csv");
  CHECK(parse_recording(dir.path() / "p001.csv", s.config) == s);
}

TEST_CASE("score_bfi examples") {
  const auto key = toy_key({{Trait::O, false}, {Trait::O, true}});
  const std::vector<int> r{5, 1};
  CHECK(score_bfi(r, key)[0] == 5.0);

  BfiKey full;
  for (int i = 1; i <= 44; ++i) full.items.push_back({i, kAllTraits[i % 5], i % 3 == 0});
  CHECK_NOTHROW(full.validate_instrument());
  const std::vector<int> threes(44, 3);
  for (double s : score_bfi(threes, full)) CHECK(s == 3.0);

  BfiKey forward = full;
  for (auto& item : forward.items) item.reverse_scored = false;
  const std::vector<int> fives(44, 5);
  for (double s : score_bfi(fives, forward)) CHECK(s == 5.0);

  std::vector<int> bad = threes;
  bad[4] = 6;
  CHECK(code_of([&] { score_bfi(bad, full); }) == ErrorCode::OutOfRangeResponse);
  const std::vector<int> short_r(43, 3);
  CHECK(code_of([&] { score_bfi(short_r, full); }) == ErrorCode::KeyMismatch);

  BfiKey small = full;
  small.items.pop_back();
  CHECK(code_of([&] { small.validate_instrument(); }) == ErrorCode::KeyMismatch);
}

TEST_CASE("score_bfi is invariant to item order within a trait") {
  std::mt19937 rng(5);
  BfiKey key;
  for (int i = 1; i <= 44; ++i) key.items.push_back({i, kAllTraits[(i * 7) % 5], (i % 4) == 1});
  std::uniform_int_distribution<int> resp(1, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> r(44);
    for (auto& x : r) x = resp(rng);
    const auto base = score_bfi(r, key);
    // Swap responses (and reverse flags) between two items of the same trait.
    std::vector<int> r2 = r;
    BfiKey key2 = key;
    std::vector<std::size_t> same;
    for (std::size_t i = 0; i < 44; ++i) {
      if (key.items[i].trait == key.items[0].trait) same.push_back(i);
    }
    std::shuffle(same.begin(), same.end(), rng);
    std::swap(r2[same[0]], r2[same[1]]);
    std::swap(key2.items[same[0]].reverse_scored, key2.items[same[1]].reverse_scored);
    const auto permuted = score_bfi(r2, key2);
    for (std::size_t t = 0; t < 5; ++t) CHECK(permuted[t] == doctest::Approx(base[t]).epsilon(1e-15));
  }
}

TEST_CASE("bfi key and responses files") {
  testing::TempDir dir("ingest");
  std::string key = "item_index,trait,reverse\n";
  for (int i = 1; i <= 44; ++i) {
    key += std::to_string(i) + "," + trait_code(kAllTraits[i % 5]) + "," + (i % 2 ? "1" : "0") + "\n";
  }
  write(dir.path() / "key.csv", key);
  const auto k = load_bfi_key(dir.path() / "key.csv");
  CHECK(k.items.size() == 44);
  CHECK(k.items[0].reverse_scored);

  std::string responses = "participant_id";
  for (int i = 1; i <= 44; ++i) responses += ",item_" + std::to_string(i);
  responses += "\nq1";
  for (int i = 1; i <= 44; ++i) responses += ",4";
  responses += "\n";
  write(dir.path() / "responses.csv", responses);
  const auto rows = load_responses(dir.path() / "responses.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].participant_id.value == "q1");
  CHECK(rows[0].responses.size() == 44);

  write(dir.path() / "bad_key.csv", "item_index,trait,reverse\n1,Q,0\n");
  CHECK_THROWS_AS(load_bfi_key(dir.path() / "bad_key.csv"), Error);
}

TEST_CASE("fit_tertiles examples") {
  const std::vector<double> s{1, 2, 3};
  const auto cuts = fit_tertiles(s);
  CHECK(cuts.cut_33 == doctest::Approx(1.66).epsilon(1e-12));
  CHECK(cuts.cut_66 == doctest::Approx(2.32).epsilon(1e-12));

  const std::vector<double> flat(7, 4.0);
  const auto fc = fit_tertiles(flat);
  CHECK(fc.cut_33 == 4.0);
  CHECK(fc.cut_66 == 4.0);

  const std::vector<double> two{1, 2};
  CHECK(code_of([&] { fit_tertiles(two); }) == ErrorCode::InsufficientParticipants);

  std::vector<double> nine(9);
  std::iota(nine.begin(), nine.end(), 1.0);
  const auto nc = fit_tertiles(nine);
  std::array<int, 3> counts{};
  for (double x : nine) counts[class_index(label_tertile(x, nc))]++;
  CHECK(counts == std::array<int, 3>{3, 3, 3});
}

TEST_CASE("label_tertile tie rule and example") {
  const TertileCuts cuts{Trait::O, 2.0, 3.0};
  CHECK(label_tertile(2.0, cuts) == TertileLabel::Low);
  CHECK(label_tertile(3.0, cuts) == TertileLabel::Medium);
  CHECK(label_tertile(3.0001, cuts) == TertileLabel::High);

  const std::vector<double> six{1, 2, 3, 4, 5, 6};
  const auto c6 = fit_tertiles(six);
  std::vector<TertileLabel> labels;
  for (double x : six) labels.push_back(label_tertile(x, c6));
  using L = TertileLabel;
  CHECK(labels == std::vector<L>{L::Low, L::Low, L::Medium, L::Medium, L::High, L::High});
}

TEST_CASE("quantile matches the interpolation oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(3 + trial % 40);
    for (auto& x : v) x = u(rng);
    for (double q : {0.0, 0.33, 0.5, 0.66, 1.0}) {
      CHECK(linear_quantile(v, q) == doctest::Approx(oracle_quantile(v, q)).epsilon(1e-14));
    }
  }
}

TEST_CASE("label_tertile is monotone") {
  const TertileCuts cuts{Trait::O, 2.5, 3.5};
  TertileLabel prev = TertileLabel::Low;
  for (double x = 1.0; x <= 5.0; x += 0.01) {
    const auto l = label_tertile(x, cuts);
    CHECK(class_index(l) >= class_index(prev));
    prev = l;
  }
}

TEST_CASE("class sizes of distinct scores are balanced") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  for (std::size_t n = 3; n <= 30; ++n) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> v(n);
      for (auto& x : v) x = u(rng);
      const auto cuts = fit_tertiles(v);
      std::array<std::size_t, 3> counts{};
      for (double x : v) counts[class_index(label_tertile(x, cuts))]++;
      const std::size_t target = (n + 2) / 3;
      for (std::size_t c : counts) {
        CHECK(c + 1 >= target);
        CHECK(c <= target + 1);
      }
    }
  }
}

TEST_CASE("labels and scores files round trip") {
  testing::TempDir dir("ingest");
  std::vector<ParticipantId> ids{{"a"}, {"b"}, {"c"}, {"d"}};
  std::vector<std::array<double, kNumTraits>> scores{
      {1, 2, 3, 4, 5}, {2, 3, 4, 5, 1}, {3, 4, 5, 1, 2}, {4, 5, 1, 2, 3}};
  const auto profiles = build_trait_profiles(ids, scores);
  io::write_file(dir.path() / "labels.csv", format_labels(profiles));
  const auto loaded = load_labels(dir.path() / "labels.csv");
  REQUIRE(loaded.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(loaded[i].labels == profiles[i].labels);

  io::write_file(dir.path() / "scores.csv", format_scores(profiles));
  const auto sc = load_scores(dir.path() / "scores.csv");
  REQUIRE(sc.size() == 4);
  CHECK(sc[2].second == scores[2]);
}

}
