#include "gazetrait/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include "gazetrait/error.hpp"
#include "gazetrait/io.hpp"

namespace gazetrait::ingest {

namespace {

std::optional<double> merge_eyes(std::optional<double> left, std::optional<double> right) {
  if (left && right) return (*left + *right) / 2.0;
  if (left) return left;
  return right;
}

std::vector<std::string> trait_header() {
  std::vector<std::string> h{"participant_id"};
  for (Trait t : kAllTraits) h.emplace_back(1, trait_code(t));
  return h;
}

}  // namespace

const std::vector<std::string>& recording_header() {
  static const std::vector<std::string> header{"timestamp_s",  "left_x_px",     "left_y_px",
                                               "right_x_px",   "right_y_px",    "left_pupil_mm",
                                               "right_pupil_mm"};
  return header;
}

SessionSeries parse_recording(const std::filesystem::path& path, const RecordingConfig& config) {
  config.validate();
  io::CsvReader reader(path);
  reader.expect_header(recording_header());

  SessionSeries session;
  session.participant_id = ParticipantId{path.stem().string()};
  session.config = config;

  std::vector<std::string_view> cells;
  while (reader.next(cells)) {
    const std::size_t row = reader.row();
    GazeSample s;
    s.timestamp_s = io::parse_double(cells[0], row);
    if (!std::isfinite(s.timestamp_s) || s.timestamp_s < 0.0) {
      throw Error(ErrorCode::MalformedRow, "row " + std::to_string(row) + ": invalid timestamp");
    }
    s.gaze_x_px = merge_eyes(io::parse_optional_double(cells[1], row),
                             io::parse_optional_double(cells[3], row));
    s.gaze_y_px = merge_eyes(io::parse_optional_double(cells[2], row),
                             io::parse_optional_double(cells[4], row));
    s.pupil_mm = merge_eyes(io::parse_optional_double(cells[5], row),
                            io::parse_optional_double(cells[6], row));
    session.samples.push_back(s);
  }
  session.validate();
  return session;
}

std::string format_recording(const SessionSeries& session) {
  auto cell = [](const std::optional<double>& v) {
    return v ? io::format_double(*v) : std::string();
  };
  std::ostringstream out;
  const auto& h = recording_header();
  for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
  out << '\n';
  for (const auto& s : session.samples) {
    const std::string x = cell(s.gaze_x_px), y = cell(s.gaze_y_px), p = cell(s.pupil_mm);
    out << io::format_double(s.timestamp_s) << ',' << x << ',' << y << ',' << x << ',' << y << ','
        << p << ',' << p << '\n';
  }
  return out.str();
}

void write_recording(const SessionSeries& session, const std::filesystem::path& path) {
  io::write_file(path, format_recording(session));
}

void BfiKey::validate() const {
  if (items.empty()) throw Error(ErrorCode::KeyMismatch, "empty scoring key");
  std::set<int> seen;
  for (const auto& item : items) {
    if (item.index < 1 || item.index > static_cast<int>(items.size()) ||
        !seen.insert(item.index).second) {
      throw Error(ErrorCode::KeyMismatch,
                  "item indices must be 1.." + std::to_string(items.size()) + " without repeats");
    }
  }
}

void BfiKey::validate_instrument() const {
  if (items.size() != kBfiItems) {
    throw Error(ErrorCode::KeyMismatch, "scoring key has " + std::to_string(items.size()) +
                                            " items, expected 44");
  }
  validate();
  for (Trait t : kAllTraits) {
    const bool covered =
        std::any_of(items.begin(), items.end(), [t](const Item& it) { return it.trait == t; });
    if (!covered) {
      throw Error(ErrorCode::KeyMismatch, std::string("no items for trait ") + trait_code(t));
    }
  }
}

BfiKey load_bfi_key(const std::filesystem::path& path) {
  io::CsvReader reader(path);
  reader.expect_header({"item_index", "trait", "reverse"});
  BfiKey key;
  std::vector<std::string_view> cells;
  while (reader.next(cells)) {
    BfiKey::Item item;
    item.index = static_cast<int>(io::parse_int(cells[0], reader.row()));
    try {
      item.trait = parse_trait(cells[1]);
    } catch (const Error&) {
      throw Error(ErrorCode::MalformedRow,
                  "row " + std::to_string(reader.row()) + ": unknown trait code");
    }
    const long long rev = io::parse_int(cells[2], reader.row());
    if (rev != 0 && rev != 1) {
      throw Error(ErrorCode::MalformedRow,
                  "row " + std::to_string(reader.row()) + ": reverse must be 0 or 1");
    }
    item.reverse_scored = rev == 1;
    key.items.push_back(item);
  }
  key.validate_instrument();
  return key;
}

std::vector<ResponseRow> load_responses(const std::filesystem::path& path) {
  io::CsvReader reader(path);
  std::vector<std::string> expected{"participant_id"};
  for (std::size_t i = 1; i <= kBfiItems; ++i) expected.push_back("item_" + std::to_string(i));
  reader.expect_header(expected);
  std::vector<ResponseRow> rows;
  std::vector<std::string_view> cells;
  while (reader.next(cells)) {
    ResponseRow r;
    r.participant_id = ParticipantId{std::string(cells[0])};
    for (std::size_t i = 1; i < cells.size(); ++i) {
      r.responses.push_back(static_cast<int>(io::parse_int(cells[i], reader.row())));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::array<double, kNumTraits> score_bfi(std::span<const int> responses, const BfiKey& key) {
  key.validate();
  if (responses.size() != key.items.size()) {
    throw Error(ErrorCode::KeyMismatch, std::to_string(responses.size()) +
                                            " responses for a key of " +
                                            std::to_string(key.items.size()) + " items");
  }
  for (int r : responses) {
    if (r < 1 || r > 5) {
      throw Error(ErrorCode::OutOfRangeResponse, "response " + std::to_string(r) + " not in 1..5");
    }
  }
  std::array<double, kNumTraits> sum{};
  std::array<int, kNumTraits> count{};
  for (const auto& item : key.items) {
    const int r = responses[static_cast<std::size_t>(item.index - 1)];
    const auto t = static_cast<std::size_t>(item.trait);
    sum[t] += item.reverse_scored ? 6 - r : r;
    ++count[t];
  }
  std::array<double, kNumTraits> scores{};
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    scores[t] = count[t] ? sum[t] / count[t] : std::numeric_limits<double>::quiet_NaN();
  }
  return scores;
}

double linear_quantile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of empty set");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

TertileCuts fit_tertiles(std::span<const double> scores, Trait trait) {
  if (scores.size() < 3) {
    throw Error(ErrorCode::InsufficientParticipants,
                "tertile cuts need at least 3 participants, got " + std::to_string(scores.size()));
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error(ErrorCode::InvalidArgument, "non-finite trait score");
  }
  return TertileCuts{trait, linear_quantile(scores, 0.33), linear_quantile(scores, 0.66)};
}

TertileLabel label_tertile(double score, const TertileCuts& cuts) {
  if (score <= cuts.cut_33) return TertileLabel::Low;
  if (score <= cuts.cut_66) return TertileLabel::Medium;
  return TertileLabel::High;
}

std::vector<TraitProfile> build_trait_profiles(
    std::span<const ParticipantId> ids, std::span<const std::array<double, kNumTraits>> scores) {
  if (ids.size() != scores.size()) {
    throw Error(ErrorCode::InvalidArgument, "participant ids and scores differ in length");
  }
  std::vector<TraitProfile> profiles(ids.size());
  for (std::size_t n = 0; n < ids.size(); ++n) {
    profiles[n].participant_id = ids[n];
    profiles[n].scores = scores[n];
    for (double s : scores[n]) {
      if (!(s >= 1.0 && s <= 5.0)) {
        throw Error(ErrorCode::InvalidArgument,
                    ids[n].value + ": trait score " + std::to_string(s) + " outside [1, 5]");
      }
    }
  }
  for (Trait t : kAllTraits) {
    const auto ti = static_cast<std::size_t>(t);
    std::vector<double> column;
    for (const auto& s : scores) column.push_back(s[ti]);
    const TertileCuts cuts = fit_tertiles(column, t);
    for (auto& p : profiles) p.labels[ti] = label_tertile(p.scores[ti], cuts);
  }
  return profiles;
}

std::vector<std::pair<ParticipantId, std::array<double, kNumTraits>>> load_scores(
    const std::filesystem::path& path) {
  io::CsvReader reader(path);
  reader.expect_header(trait_header());
  std::vector<std::pair<ParticipantId, std::array<double, kNumTraits>>> out;
  std::vector<std::string_view> cells;
  while (reader.next(cells)) {
    std::array<double, kNumTraits> s{};
    for (std::size_t t = 0; t < kNumTraits; ++t) s[t] = io::parse_double(cells[t + 1], reader.row());
    out.emplace_back(ParticipantId{std::string(cells[0])}, s);
  }
  return out;
}

std::string format_scores(std::span<const TraitProfile> profiles) {
  std::ostringstream out;
  const auto h = trait_header();
  for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
  out << '\n';
  for (const auto& p : profiles) {
    out << p.participant_id.value;
    for (double s : p.scores) out << ',' << io::format_double(s);
    out << '\n';
  }
  return out.str();
}

std::vector<TraitProfile> load_labels(const std::filesystem::path& path) {
  io::CsvReader reader(path);
  reader.expect_header(trait_header());
  std::vector<TraitProfile> out;
  std::vector<std::string_view> cells;
  while (reader.next(cells)) {
    TraitProfile p;
    p.participant_id = ParticipantId{std::string(cells[0])};
    p.scores.fill(std::numeric_limits<double>::quiet_NaN());
    for (std::size_t t = 0; t < kNumTraits; ++t) {
      const long long v = io::parse_int(cells[t + 1], reader.row());
      if (v < 1 || v > 3) {
        throw Error(ErrorCode::MalformedRow,
                    "row " + std::to_string(reader.row()) + ": label must be 1, 2 or 3");
      }
      p.labels[t] = static_cast<TertileLabel>(v);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string format_labels(std::span<const TraitProfile> profiles) {
  std::ostringstream out;
  const auto h = trait_header();
  for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
  out << '\n';
  for (const auto& p : profiles) {
    out << p.participant_id.value;
    for (TertileLabel l : p.labels) out << ',' << static_cast<int>(l);
    out << '\n';
  }
  return out.str();
}

}  // namespace gazetrait::ingest
