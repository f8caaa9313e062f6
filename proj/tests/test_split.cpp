#include <doctest.h>

#include <map>
#include <set>

#include "gazetrait/error.hpp"
#include "gazetrait/split.hpp"

using namespace gazetrait;
using namespace gazetrait::split;

namespace {

std::vector<Segment> segments_for(const std::vector<TertileLabel>& labels, std::size_t length,
                                  std::size_t per_session) {
  std::vector<SessionInfo> sessions;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sessions.push_back({ParticipantId{"p" + std::to_string(i)}, length, labels[i]});
  }
  WindowingConfig wc;
  wc.segments_per_session = per_session;
  return segment_sessions(sessions, wc);
}

std::vector<Segment> class_segments(std::size_t low, std::size_t mid, std::size_t high) {
  std::vector<Segment> out;
  auto add = [&](std::size_t n, TertileLabel l) {
    for (std::size_t i = 0; i < n; ++i) {
      Segment s;
      s.participant_id = {"p" + std::to_string(out.size())};
      s.segment_id = out.size();
      s.session_index = out.size();
      s.end = 200;
      s.label = l;
      out.push_back(s);
    }
  };
  add(low, TertileLabel::Low);
  add(mid, TertileLabel::Medium);
  add(high, TertileLabel::High);
  return out;
}

std::map<int, std::array<int, 3>> per_fold_counts(const FoldPlan& plan) {
  std::map<int, std::array<int, 3>> counts;
  for (const auto& a : plan.assignments) counts[a.fold][class_index(a.label)]++;
  return counts;
}

}  // namespace

TEST_SUITE("split") {

TEST_CASE("segment bounds") {
  const auto even = segment_bounds(1000, 5);
  REQUIRE(even.size() == 5);
  for (const auto& [b, e] : even) CHECK(e - b == 200);

  const auto rem = segment_bounds(1003, 5);
  std::vector<std::size_t> lengths;
  std::size_t cursor = 0;
  for (const auto& [b, e] : rem) {
    CHECK(b == cursor);
    cursor = e;
    lengths.push_back(e - b);
  }
  CHECK(cursor == 1003);
  CHECK(lengths == std::vector<std::size_t>{201, 201, 201, 200, 200});

  try {
    segment_bounds(4, 5);
    FAIL("expected TooShortForSegmentation");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooShortForSegmentation);
  }
}

TEST_CASE("segmentation concatenates losslessly") {
  for (std::size_t t = 5; t < 400; t += 7) {
    for (std::size_t s = 1; s <= 5; ++s) {
      const auto b = segment_bounds(t, s);
      std::size_t cursor = 0;
      for (const auto& [lo, hi] : b) {
        REQUIRE(lo == cursor);
        REQUIRE(hi - lo >= t / s);
        REQUIRE(hi - lo <= (t + s - 1) / s);
        cursor = hi;
      }
      REQUIRE(cursor == t);
    }
  }
}

TEST_CASE("stratified deal") {
  const auto segs = class_segments(5, 5, 5);
  for (std::uint64_t seed : {1u, 2u}) {
    const auto plan = assign_folds_stratified(segs, 5, seed);
    for (const auto& [fold, counts] : per_fold_counts(plan)) {
      CHECK(counts == std::array<int, 3>{1, 1, 1});
    }
  }
  const auto a = assign_folds_stratified(segs, 5, 7);
  const auto b = assign_folds_stratified(segs, 5, 7);
  CHECK(format_fold_plan(a) == format_fold_plan(b));

  try {
    assign_folds_stratified(class_segments(7, 5, 3), 5, 1);
    FAIL("expected ClassTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ClassTooSmall);
  }
}

TEST_CASE("stratified proportions stay within one segment per class") {
  for (std::size_t n : {5u, 6u, 9u, 13u}) {
    const auto segs = class_segments(n, n + 2, n + 4);
    const auto plan = assign_folds_stratified(segs, 5, n);
    const auto counts = per_fold_counts(plan);
    CHECK(counts.size() == 5);
    for (int c = 0; c < 3; ++c) {
      int lo = 1 << 30, hi = 0;
      for (const auto& [fold, k] : counts) {
        lo = std::min(lo, k[c]);
        hi = std::max(hi, k[c]);
      }
      CHECK(hi - lo <= 1);
    }
  }
}

TEST_CASE("participant folds") {
  std::vector<std::pair<ParticipantId, TertileLabel>> roster;
  for (int i = 0; i < 25; ++i) {
    roster.push_back({ParticipantId{"p" + std::to_string(i)}, label_from_index(i % 3)});
  }
  const auto plan = assign_folds_by_participant(roster, 5, 3);
  std::map<int, int> sizes;
  for (const auto& a : plan.assignments) sizes[a.fold]++;
  for (const auto& [fold, n] : sizes) CHECK(n == 5);
  CHECK(plan.warnings.empty());

  try {
    assign_folds_by_participant(roster, 25, 3);
    FAIL("expected UnsupportedProtocol");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedProtocol);
  }
  const std::vector<std::pair<ParticipantId, TertileLabel>> few(roster.begin(), roster.begin() + 4);
  try {
    assign_folds_by_participant(few, 5, 3);
    FAIL("expected TooFewParticipants");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewParticipants);
  }

  std::vector<std::pair<ParticipantId, TertileLabel>> skewed;
  for (int i = 0; i < 12; ++i) {
    skewed.push_back({ParticipantId{"q" + std::to_string(i)},
                      i < 3 ? TertileLabel::High : label_from_index(i % 2)});
  }
  const auto warned = assign_folds_by_participant(skewed, 5, 1);
  CHECK_FALSE(warned.warnings.empty());
  CHECK_NOTHROW(warned.validate());
}

TEST_CASE("window counts") {
  Segment seg;
  seg.fold = 0;
  WindowingConfig wc;
  seg.end = 100;
  CHECK(make_windows(seg, wc).size() == 1);
  seg.end = 99;
  std::size_t short_count = 0;
  CHECK(make_windows(seg, wc, &short_count).empty());
  CHECK(short_count == 1);
  seg.end = 1000;
  const auto w = make_windows(seg, wc);
  CHECK(w.size() == 19);
  CHECK(w.front().start_index == 1);
  CHECK(w.back().start_index == 1 + 18 * 50);
  CHECK(w.back().session_offset + w.back().length == 1000);

  Segment unassigned;
  unassigned.end = 200;
  CHECK_THROWS_AS(make_windows(unassigned, wc), Error);
}

TEST_CASE("windows inherit labels and never leave their segment") {
  const std::vector<TertileLabel> labels{TertileLabel::Low, TertileLabel::High, TertileLabel::Medium};
  auto segs = segments_for(labels, 1003, 5);
  const auto plan = assign_folds_by_participant(
      std::vector<std::pair<ParticipantId, TertileLabel>>{
          {{"p0"}, TertileLabel::Low}, {{"p1"}, TertileLabel::High}, {{"p2"}, TertileLabel::Medium}},
      2, 5);
  apply_plan(plan, segs);
  WindowingConfig wc;
  wc.window_len = 60;
  wc.stride = 25;
  for (const auto& s : segs) {
    for (const auto& w : make_windows(s, wc)) {
      CHECK(w.label == labels[s.session_index]);
      CHECK(w.fold == plan.fold_of(s.participant_id.value));
      CHECK(w.session_offset >= s.begin);
      CHECK(w.session_offset + w.length <= s.end);
    }
  }
}

TEST_CASE("segment folds have disjoint sample sets") {
  std::vector<TertileLabel> labels;
  for (int i = 0; i < 15; ++i) labels.push_back(label_from_index(i % 3));
  auto segs = segments_for(labels, 600, 5);
  apply_plan(assign_folds_stratified(segs, 5, 11), segs);
  WindowingConfig wc;
  wc.window_len = 40;
  wc.stride = 20;
  std::map<std::pair<std::size_t, std::size_t>, int> owner;
  for (const auto& s : segs) {
    for (const auto& w : make_windows(s, wc)) {
      for (std::size_t t = w.session_offset; t < w.session_offset + w.length; ++t) {
        const auto [it, inserted] = owner.emplace(std::pair{w.session_index, t}, w.fold);
        REQUIRE(it->second == w.fold);
      }
    }
  }
}

TEST_CASE("validation split draws from the given segments") {
  const auto segs = class_segments(6, 6, 6);
  const auto [fit, val] = split_validation(segs, 0.2, 4);
  CHECK(fit.size() + val.size() == segs.size());
  std::set<std::size_t> all(fit.begin(), fit.end());
  for (auto v : val) CHECK(all.insert(v).second);
  std::array<int, 3> per_class{};
  for (auto v : val) per_class[class_index(segs[v].label)]++;
  CHECK(per_class == std::array<int, 3>{1, 1, 1});
  const auto again = split_validation(segs, 0.2, 4);
  CHECK(again.second == val);
}

TEST_CASE("fold plan csv round trip") {
  const auto segs = class_segments(5, 5, 5);
  const auto plan = assign_folds_stratified(segs, 5, 9);
  const auto text = format_fold_plan(plan);
  CHECK(text.rfind("unit_id,unit_kind,fold,label,seed\n", 0) == 0);
  const auto back = parse_fold_plan(text, plan.protocol);
  CHECK(format_fold_plan(back) == text);
}

}
