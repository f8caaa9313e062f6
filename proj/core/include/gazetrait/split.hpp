#pragma once

// Leakage-free evaluation splits. Sessions are cut into contiguous
// non-overlapping segments, segments (or whole participants) are dealt to
// folds, and sliding windows are generated only inside a segment.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gazetrait/types.hpp"

namespace gazetrait::split {

struct WindowingConfig {
  std::size_t window_len = 100;
  std::size_t stride = 50;
  std::size_t segments_per_session = 5;

  void validate() const;
};

struct Segment {
  ParticipantId participant_id;
  std::size_t session_index = 0;
  /// Position within the session, 0-based.
  std::size_t index_in_session = 0;
  /// Unique across the dataset.
  std::size_t segment_id = 0;
  /// Session timestep range [begin, end).
  std::size_t begin = 0;
  std::size_t end = 0;
  TertileLabel label = TertileLabel::Low;
  int fold = -1;

  std::size_t size() const noexcept { return end - begin; }
  std::string unit_id() const;
};

/// Contiguous pieces of length floor(T/S) or ceil(T/S); the remainder goes to
/// the earliest pieces. Throws TooShortForSegmentation when T < S.
std::vector<std::pair<std::size_t, std::size_t>> segment_bounds(std::size_t length,
                                                                std::size_t segments);

struct SessionInfo {
  ParticipantId participant_id;
  std::size_t length = 0;
  TertileLabel label = TertileLabel::Low;
};

/// Segments every session; segment ids are assigned in session order.
std::vector<Segment> segment_sessions(std::span<const SessionInfo> sessions,
                                      const WindowingConfig& config);

enum class UnitKind { Segment, Participant };

struct FoldAssignment {
  std::string unit_id;
  TertileLabel label = TertileLabel::Low;
  int fold = 0;
};

struct FoldPlan {
  Protocol protocol = Protocol::SegmentStratified5Fold;
  UnitKind unit_kind = UnitKind::Segment;
  int n_folds = 5;
  std::uint64_t seed = 0;
  std::vector<FoldAssignment> assignments;
  std::vector<std::string> warnings;

  int fold_of(const std::string& unit_id) const;
  /// Every unit assigned once and no fold empty.
  void validate() const;
};

/// Shuffles segments within each label class with a seeded RNG and deals them
/// round-robin to folds. Throws ClassTooSmall when a present class has fewer
/// than n_folds segments.
FoldPlan assign_folds_stratified(std::span<const Segment> segments, int n_folds,
                                 std::uint64_t seed);

/// Whole participants dealt to folds, stratified by label. Throws
/// TooFewParticipants (fewer than n_folds) or UnsupportedProtocol
/// (one participant per fold).
FoldPlan assign_folds_by_participant(std::span<const std::pair<ParticipantId, TertileLabel>> roster,
                                     int n_folds, std::uint64_t seed);

/// Copies fold numbers from the plan into the segments.
void apply_plan(const FoldPlan& plan, std::span<Segment> segments);

/// floor((T_seg - L) / stride) + 1 when T_seg >= L, else 0.
std::size_t window_count(std::size_t segment_len, std::size_t window_len, std::size_t stride);

/// Windows with start offsets 1, 1 + stride, ... inside the segment. Short
/// segments produce nothing and bump `short_segments` when provided.
std::vector<Window> make_windows(const Segment& segment, const WindowingConfig& config,
                                 std::size_t* short_segments = nullptr);

/// Seeded 20%-style validation holdout drawn from training segments only,
/// stratified by label. Returns (fit indices, validation indices) into `segments`.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_validation(
    std::span<const Segment> segments, double fraction, std::uint64_t seed);

/// unit_id,unit_kind,fold,label,seed
std::string format_fold_plan(const FoldPlan& plan);
FoldPlan parse_fold_plan(const std::string& text, Protocol protocol);

}  // namespace gazetrait::split
