#include "gazetrait/split.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

#include "gazetrait/error.hpp"
#include "gazetrait/io.hpp"
#include "gazetrait/random.hpp"

namespace gazetrait::split {

void WindowingConfig::validate() const {
  if (window_len < 2) throw Error(ErrorCode::InvalidArgument, "window_len must be >= 2");
  if (stride < 1 || stride > window_len) {
    throw Error(ErrorCode::InvalidArgument, "stride must be in [1, window_len]");
  }
  if (segments_per_session < 1) {
    throw Error(ErrorCode::InvalidArgument, "segments_per_session must be >= 1");
  }
}

std::string Segment::unit_id() const {
  return participant_id.value + "#" + std::to_string(index_in_session);
}

std::vector<std::pair<std::size_t, std::size_t>> segment_bounds(std::size_t length,
                                                                std::size_t segments) {
  if (segments == 0) throw Error(ErrorCode::InvalidArgument, "segment count must be positive");
  if (length < segments) {
    throw Error(ErrorCode::TooShortForSegmentation,
                "sequence of " + std::to_string(length) + " samples cannot form " +
                    std::to_string(segments) + " segments");
  }
  const std::size_t base = length / segments;
  const std::size_t extra = length % segments;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t k = 0; k < segments; ++k) {
    const std::size_t len = base + (k < extra ? 1 : 0);
    out.emplace_back(begin, begin + len);
    begin += len;
  }
  return out;
}

std::vector<Segment> segment_sessions(std::span<const SessionInfo> sessions,
                                      const WindowingConfig& config) {
  config.validate();
  std::vector<Segment> out;
  std::size_t next_id = 0;
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    const auto bounds = segment_bounds(sessions[s].length, config.segments_per_session);
    for (std::size_t k = 0; k < bounds.size(); ++k) {
      Segment seg;
      seg.participant_id = sessions[s].participant_id;
      seg.session_index = s;
      seg.index_in_session = k;
      seg.segment_id = next_id++;
      seg.begin = bounds[k].first;
      seg.end = bounds[k].second;
      seg.label = sessions[s].label;
      out.push_back(std::move(seg));
    }
  }
  return out;
}

int FoldPlan::fold_of(const std::string& unit_id) const {
  for (const auto& a : assignments) {
    if (a.unit_id == unit_id) return a.fold;
  }
  throw Error(ErrorCode::InvalidArgument, "unit '" + unit_id + "' not in fold plan");
}

void FoldPlan::validate() const {
  std::set<std::string> ids;
  std::vector<int> per_fold(static_cast<std::size_t>(std::max(n_folds, 0)), 0);
  for (const auto& a : assignments) {
    if (!ids.insert(a.unit_id).second) {
      throw Error(ErrorCode::InvalidArgument, "unit '" + a.unit_id + "' assigned twice");
    }
    if (a.fold < 0 || a.fold >= n_folds) {
      throw Error(ErrorCode::InvalidArgument, "fold index out of range for " + a.unit_id);
    }
    ++per_fold[static_cast<std::size_t>(a.fold)];
  }
  for (int f = 0; f < n_folds; ++f) {
    if (per_fold[static_cast<std::size_t>(f)] == 0) {
      throw Error(ErrorCode::InvalidArgument, "fold " + std::to_string(f) + " is empty");
    }
  }
}

namespace {

struct Unit {
  std::string id;
  TertileLabel label;
};

// Shuffle within each class, then deal round-robin; the deal position carries
// over between classes so fold sizes stay within one of each other.
std::vector<FoldAssignment> stratified_deal(std::vector<Unit> units, int n_folds,
                                            std::uint64_t seed) {
  Rng rng = make_rng({seed, key(Stream::FoldPlan)});
  std::vector<FoldAssignment> out;
  std::size_t cursor = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<Unit> members;
    for (const auto& u : units) {
      if (class_index(u.label) == c) members.push_back(u);
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (const auto& u : members) {
      out.push_back(FoldAssignment{u.id, u.label, static_cast<int>(cursor % n_folds)});
      ++cursor;
    }
  }
  return out;
}

std::array<std::size_t, kNumClasses> class_counts(const std::vector<Unit>& units) {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& u : units) ++counts[class_index(u.label)];
  return counts;
}

}  // namespace

FoldPlan assign_folds_stratified(std::span<const Segment> segments, int n_folds,
                                 std::uint64_t seed) {
  if (n_folds < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
  std::vector<Unit> units;
  for (const auto& s : segments) units.push_back(Unit{s.unit_id(), s.label});
  const auto counts = class_counts(units);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (counts[c] > 0 && counts[c] < static_cast<std::size_t>(n_folds)) {
      throw Error(ErrorCode::ClassTooSmall,
                  std::string(label_name(label_from_index(c))) + " has " +
                      std::to_string(counts[c]) + " segments for " + std::to_string(n_folds) +
                      " folds");
    }
  }
  FoldPlan plan;
  plan.protocol = Protocol::SegmentStratified5Fold;
  plan.unit_kind = UnitKind::Segment;
  plan.n_folds = n_folds;
  plan.seed = seed;
  plan.assignments = stratified_deal(std::move(units), n_folds, seed);
  plan.validate();
  return plan;
}

FoldPlan assign_folds_by_participant(std::span<const std::pair<ParticipantId, TertileLabel>> roster,
                                     int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
  if (roster.size() < static_cast<std::size_t>(n_folds)) {
    throw Error(ErrorCode::TooFewParticipants, std::to_string(roster.size()) +
                                                   " participants for " +
                                                   std::to_string(n_folds) + " folds");
  }
  if (roster.size() == static_cast<std::size_t>(n_folds)) {
    throw Error(ErrorCode::UnsupportedProtocol,
                "one participant per fold (leave-one-subject-out) is not supported");
  }
  std::vector<Unit> units;
  for (const auto& [id, label] : roster) units.push_back(Unit{id.value, label});
  FoldPlan plan;
  plan.protocol = Protocol::ParticipantStratified;
  plan.unit_kind = UnitKind::Participant;
  plan.n_folds = n_folds;
  plan.seed = seed;
  const auto counts = class_counts(units);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (counts[c] > 0 && counts[c] < static_cast<std::size_t>(n_folds)) {
      plan.warnings.push_back(std::string(label_name(label_from_index(c))) + " has only " +
                              std::to_string(counts[c]) + " participants; " +
                              std::to_string(n_folds - static_cast<int>(counts[c])) +
                              " folds will not contain this class");
    }
  }
  plan.assignments = stratified_deal(std::move(units), n_folds, seed);
  plan.validate();
  return plan;
}

void apply_plan(const FoldPlan& plan, std::span<Segment> segments) {
  std::map<std::string, int> lookup;
  for (const auto& a : plan.assignments) lookup[a.unit_id] = a.fold;
  for (auto& s : segments) {
    const std::string id =
        plan.unit_kind == UnitKind::Segment ? s.unit_id() : s.participant_id.value;
    const auto it = lookup.find(id);
    if (it == lookup.end()) {
      throw Error(ErrorCode::InvalidArgument, "segment '" + s.unit_id() + "' has no fold");
    }
    s.fold = it->second;
  }
}

std::size_t window_count(std::size_t segment_len, std::size_t window_len, std::size_t stride) {
  if (segment_len < window_len) return 0;
  return (segment_len - window_len) / stride + 1;
}

std::vector<Window> make_windows(const Segment& segment, const WindowingConfig& config,
                                 std::size_t* short_segments) {
  config.validate();
  if (segment.fold < 0) {
    throw Error(ErrorCode::InvalidArgument,
                "segment " + segment.unit_id() + " has no fold; assign folds before windowing");
  }
  std::vector<Window> out;
  const std::size_t k_total = window_count(segment.size(), config.window_len, config.stride);
  if (k_total == 0 && short_segments) ++*short_segments;
  for (std::size_t k = 0; k < k_total; ++k) {
    Window w;
    w.participant_id = segment.participant_id;
    w.session_index = segment.session_index;
    w.segment_id = segment.segment_id;
    w.start_index = 1 + k * config.stride;
    w.session_offset = segment.begin + k * config.stride;
    w.length = config.window_len;
    w.label = segment.label;
    w.fold = segment.fold;
    out.push_back(std::move(w));
  }
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(
    std::span<const Segment> segments, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "validation fraction must be in (0, 1)");
  }
  Rng rng = make_rng({seed, key(Stream::Validation)});
  std::vector<std::size_t> fit, val;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (class_index(segments[i].label) == c) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t n_val = static_cast<std::size_t>(std::lround(fraction * members.size()));
    if (members.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, members.size() - 1);
    else n_val = 0;
    val.insert(val.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    fit.insert(fit.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  std::sort(fit.begin(), fit.end());
  std::sort(val.begin(), val.end());
  return {fit, val};
}

std::string format_fold_plan(const FoldPlan& plan) {
  std::ostringstream out;
  out << "unit_id,unit_kind,fold,label,seed\n";
  const char* kind = plan.unit_kind == UnitKind::Segment ? "segment" : "participant";
  for (const auto& a : plan.assignments) {
    out << a.unit_id << ',' << kind << ',' << a.fold << ',' << static_cast<int>(a.label) << ','
        << plan.seed << '\n';
  }
  return out.str();
}

FoldPlan parse_fold_plan(const std::string& text, Protocol protocol) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "unit_id,unit_kind,fold,label,seed") {
    throw Error(ErrorCode::SchemaMismatch, "fold plan header mismatch");
  }
  FoldPlan plan;
  plan.protocol = protocol;
  plan.n_folds = 0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const auto cells = io::split_row(line);
    if (cells.size() != 5) throw Error(ErrorCode::MalformedRow, "row " + std::to_string(row));
    plan.unit_kind = cells[1] == "segment" ? UnitKind::Segment : UnitKind::Participant;
    FoldAssignment a;
    a.unit_id = std::string(cells[0]);
    a.fold = static_cast<int>(io::parse_int(cells[2], row));
    const long long label = io::parse_int(cells[3], row);
    if (label < 1 || label > 3) throw Error(ErrorCode::MalformedRow, "row " + std::to_string(row));
    a.label = static_cast<TertileLabel>(label);
    plan.seed = static_cast<std::uint64_t>(io::parse_int(cells[4], row));
    plan.n_folds = std::max(plan.n_folds, a.fold + 1);
    plan.assignments.push_back(std::move(a));
  }
  plan.validate();
  return plan;
}

}  // namespace gazetrait::split
