#include "gazetrait/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "gazetrait/error.hpp"
#include "gazetrait/io.hpp"

namespace gazetrait::eval {

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::size_t n) {
  if (truth >= kNumClasses || predicted >= kNumClasses) {
    throw Error(ErrorCode::InvalidArgument, "class index out of range");
  }
  counts[truth][predicted] += n;
}

std::size_t ConfusionMatrix::total() const noexcept {
  std::size_t n = 0;
  for (const auto& row : counts) n = std::accumulate(row.begin(), row.end(), n);
  return n;
}

namespace {

void require_nonempty(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorCode::EmptyEvaluation, "confusion matrix is empty");
}

}  // namespace

double accuracy(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  std::size_t diag = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) diag += cm.counts[c][c];
  return static_cast<double>(diag) / static_cast<double>(cm.total());
}

double macro_f1(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  double sum = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      predicted += cm.counts[k][c];
      actual += cm.counts[c][k];
    }
    const std::size_t tp = cm.counts[c][c];
    // 2PR/(P+R) = 2tp/(predicted+actual); zero when there is nothing to score.
    if (tp > 0) sum += 2.0 * static_cast<double>(tp) / static_cast<double>(predicted + actual);
  }
  return sum / static_cast<double>(kNumClasses);
}

double majority_share(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  std::size_t best = 0;
  for (const auto& row : cm.counts) {
    best = std::max(best, std::accumulate(row.begin(), row.end(), std::size_t{0}));
  }
  return static_cast<double>(best) / static_cast<double>(cm.total());
}

FoldResult FoldResult::from_confusion(Trait trait, int fold, FeatureVariant variant,
                                      Protocol protocol, const ConfusionMatrix& cm) {
  FoldResult r;
  r.trait = trait;
  r.fold = fold;
  r.variant = variant;
  r.protocol = protocol;
  r.confusion = cm;
  r.accuracy = eval::accuracy(cm);
  r.macro_f1 = eval::macro_f1(cm);
  return r;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.size() < 2) {
    throw Error(ErrorCode::TooFewFolds,
                "need at least 2 folds to aggregate, got " + std::to_string(values.size()));
  }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return MeanStd{mean, std::sqrt(ss / (n - 1.0))};
}

namespace {

using GroupKey = std::tuple<int, int, int>;

GroupKey group_key(Protocol p, FeatureVariant v, Trait t) {
  return {static_cast<int>(p), static_cast<int>(v), static_cast<int>(t)};
}

std::string percent_cell(const MeanStd& m) {
  return io::format_fixed(100.0 * m.mean, 2) + " ± " + io::format_fixed(100.0 * m.std, 2);
}

}  // namespace

std::vector<Aggregate> aggregate(std::span<const FoldResult> results) {
  std::map<GroupKey, std::vector<const FoldResult*>> groups;
  for (const auto& r : results) groups[group_key(r.protocol, r.variant, r.trait)].push_back(&r);
  std::vector<Aggregate> out;
  for (auto& [k, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const FoldResult* a, const FoldResult* b) { return a->fold < b->fold; });
    std::vector<double> acc, f1;
    double share = 0.0;
    for (const auto* r : members) {
      acc.push_back(r->accuracy);
      f1.push_back(r->macro_f1);
      share += majority_share(r->confusion);
    }
    Aggregate a;
    a.protocol = members.front()->protocol;
    a.variant = members.front()->variant;
    a.trait = members.front()->trait;
    a.n_folds = members.size();
    a.accuracy = mean_std(acc);
    a.macro_f1 = mean_std(f1);
    a.majority_share = share / static_cast<double>(members.size());
    out.push_back(a);
  }
  return out;
}

std::string format_confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "true\\pred";
  for (std::size_t c = 0; c < kNumClasses; ++c) out << ',' << label_name(label_from_index(c));
  out << '\n';
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    out << label_name(label_from_index(r));
    for (std::size_t c = 0; c < kNumClasses; ++c) out << ',' << cm.counts[r][c];
    out << '\n';
  }
  return out.str();
}

ConfusionMatrix parse_confusion_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaMismatch, "empty confusion file");
  ConfusionMatrix cm;
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    if (!std::getline(in, line)) throw Error(ErrorCode::SchemaMismatch, "truncated confusion file");
    const auto cells = io::split_row(line);
    if (cells.size() != kNumClasses + 1) {
      throw Error(ErrorCode::MalformedRow, "row " + std::to_string(r + 1));
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      cm.counts[r][c] = static_cast<std::size_t>(io::parse_int(cells[c + 1], r + 1));
    }
  }
  return cm;
}

std::string format_metrics_csv(std::span<const FoldResult> results) {
  std::ostringstream out;
  out << "fold,accuracy,macro_f1,majority_share,n_windows\n";
  for (const auto& r : results) {
    out << r.fold << ',' << io::format_double(r.accuracy) << ',' << io::format_double(r.macro_f1)
        << ',' << io::format_double(majority_share(r.confusion)) << ',' << r.confusion.total()
        << '\n';
  }
  return out.str();
}

namespace {

std::vector<Protocol> protocols_of(std::span<const Aggregate> aggs) {
  std::vector<Protocol> out;
  for (const auto& a : aggs) {
    if (std::find(out.begin(), out.end(), a.protocol) == out.end()) out.push_back(a.protocol);
  }
  std::sort(out.begin(), out.end());
  return out;
}

template <typename T, typename F>
std::vector<T> distinct(std::span<const Aggregate> aggs, Protocol p, F&& get) {
  std::vector<T> out;
  for (const auto& a : aggs) {
    if (a.protocol != p) continue;
    const T v = get(a);
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const Aggregate* find(std::span<const Aggregate> aggs, Protocol p, FeatureVariant v, Trait t) {
  for (const auto& a : aggs) {
    if (a.protocol == p && a.variant == v && a.trait == t) return &a;
  }
  return nullptr;
}

std::string trait_header(std::span<const Trait> traits) {
  std::string head = "| Variant |";
  std::string rule = "|---|";
  for (Trait t : traits) {
    head += std::string(" ") + trait_code(t) + " |";
    rule += "---|";
  }
  return head + "\n" + rule + "\n";
}

}  // namespace

std::string format_summary_markdown(std::span<const Aggregate> aggregates) {
  std::ostringstream out;
  out << "# Cross-validation summary\n";
  for (Protocol p : protocols_of(aggregates)) {
    const auto variants = distinct<FeatureVariant>(aggregates, p, [](const Aggregate& a) { return a.variant; });
    const auto traits = distinct<Trait>(aggregates, p, [](const Aggregate& a) { return a.trait; });
    for (int metric = 0; metric < 2; ++metric) {
      out << "\n## " << protocol_name(p) << " protocol: "
          << (metric == 0 ? "Accuracy" : "Macro-F1") << " (%)\n\n";
      out << trait_header(traits);
      for (FeatureVariant v : variants) {
        out << "| " << variant_label(v) << " |";
        for (Trait t : traits) {
          const Aggregate* a = find(aggregates, p, v, t);
          out << ' ' << (a ? percent_cell(metric == 0 ? a->accuracy : a->macro_f1) : "-") << " |";
        }
        out << '\n';
      }
    }
    out << "\nMajority-class share (%):";
    for (Trait t : traits) {
      const Aggregate* a = nullptr;
      for (FeatureVariant v : variants) {
        if ((a = find(aggregates, p, v, t))) break;
      }
      out << ' ' << trait_code(t) << ' ' << io::format_fixed(100.0 * a->majority_share, 2);
    }
    out << '\n';
  }
  return out.str();
}

std::string format_summary_csv(std::span<const Aggregate> aggregates) {
  std::ostringstream out;
  out << "protocol,variant,trait,n_folds,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std,"
         "majority_share\n";
  for (const auto& a : aggregates) {
    out << protocol_name(a.protocol) << ',' << variant_name(a.variant) << ',' << trait_code(a.trait)
        << ',' << a.n_folds << ',' << io::format_double(a.accuracy.mean) << ','
        << io::format_double(a.accuracy.std) << ',' << io::format_double(a.macro_f1.mean) << ','
        << io::format_double(a.macro_f1.std) << ',' << io::format_double(a.majority_share) << '\n';
  }
  return out.str();
}

std::string format_delta_markdown(std::span<const Aggregate> aggregates) {
  std::ostringstream out;
  out << "# Ablation deltas (Full minus variant, percentage points)\n";
  for (Protocol p : protocols_of(aggregates)) {
    const auto traits = distinct<Trait>(aggregates, p, [](const Aggregate& a) { return a.trait; });
    for (int metric = 0; metric < 2; ++metric) {
      out << "\n## " << protocol_name(p) << " protocol: "
          << (metric == 0 ? "Accuracy" : "Macro-F1") << "\n\n";
      out << trait_header(traits);
      for (FeatureVariant v : kAllVariants) {
        if (v == FeatureVariant::Full) continue;
        out << "| Full - " << variant_label(v) << " |";
        for (Trait t : traits) {
          const Aggregate* full = find(aggregates, p, FeatureVariant::Full, t);
          const Aggregate* other = find(aggregates, p, v, t);
          if (!full || !other) {
            out << " - |";
            continue;
          }
          const double d = metric == 0 ? full->accuracy.mean - other->accuracy.mean
                                       : full->macro_f1.mean - other->macro_f1.mean;
          out << ' ' << (d >= 0 ? "+" : "") << io::format_fixed(100.0 * d, 2) << " |";
        }
        out << '\n';
      }
    }
  }
  return out.str();
}

std::filesystem::path cell_directory(const std::filesystem::path& out_dir, Protocol protocol,
                                     FeatureVariant variant, Trait trait) {
  return out_dir / "reports" / std::string(protocol_name(protocol)) /
         std::string(variant_name(variant)) / std::string(1, trait_code(trait));
}

void emit_cell(const std::filesystem::path& out_dir, std::span<const FoldResult> cell) {
  if (cell.empty()) throw Error(ErrorCode::InvalidArgument, "empty report cell");
  std::vector<FoldResult> sorted(cell.begin(), cell.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const FoldResult& a, const FoldResult& b) { return a.fold < b.fold; });
  const auto dir = cell_directory(out_dir, sorted[0].protocol, sorted[0].variant, sorted[0].trait);
  io::write_file(dir / "metrics.csv", format_metrics_csv(sorted));
  for (const auto& r : sorted) {
    io::write_file(dir / ("confusion_fold" + std::to_string(r.fold) + ".csv"),
                   format_confusion_csv(r.confusion));
  }
}

std::vector<Aggregate> emit_report(const std::filesystem::path& out_dir,
                                   std::span<const FoldResult> results) {
  if (results.empty()) throw Error(ErrorCode::InvalidArgument, "no results to report");
  std::map<GroupKey, std::vector<FoldResult>> cells;
  for (const auto& r : results) cells[group_key(r.protocol, r.variant, r.trait)].push_back(r);
  for (const auto& [k, cell] : cells) emit_cell(out_dir, cell);
  const auto aggs = aggregate(results);
  io::write_file(out_dir / "reports" / "summary.md", format_summary_markdown(aggs));
  io::write_file(out_dir / "reports" / "summary.csv", format_summary_csv(aggs));
  return aggs;
}

}  // namespace gazetrait::eval
