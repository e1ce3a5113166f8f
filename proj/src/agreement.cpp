#include "coannot/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "coannot/csv.hpp"
#include "coannot/error.hpp"

namespace coannot {

namespace {

void check_values(const ReliabilityTable& table) {
  for (const auto& row : table.rows) {
    for (const auto& cell : row) {
      if (cell && (*cell < 0 || *cell >= table.category_count)) {
        throw Error(ErrorCode::Validation,
                    "rating " + std::to_string(*cell) + " outside [0, " +
                        std::to_string(table.category_count) + ")");
      }
    }
  }
}

// Per-item category counts for items with at least two ratings.
std::vector<std::vector<int>> pairable_counts(const ReliabilityTable& table) {
  std::vector<std::vector<int>> counts;
  for (const auto& row : table.rows) {
    std::vector<int> c(static_cast<std::size_t>(table.category_count), 0);
    int m = 0;
    for (const auto& cell : row) {
      if (cell) {
        ++c[static_cast<std::size_t>(*cell)];
        ++m;
      }
    }
    if (m >= 2) counts.push_back(std::move(c));
  }
  if (counts.empty()) {
    throw Error(ErrorCode::InsufficientData, "no item has two or more ratings");
  }
  return counts;
}

}  // namespace

double krippendorff_alpha(const ReliabilityTable& table, DistanceMetric metric) {
  check_values(table);
  const auto counts = pairable_counts(table);
  const auto q = static_cast<std::size_t>(table.category_count);

  std::vector<std::vector<double>> coincidence(q, std::vector<double>(q, 0.0));
  for (const auto& c : counts) {
    int m = 0;
    for (int v : c) m += v;
    const double weight = 1.0 / (m - 1);
    for (std::size_t a = 0; a < q; ++a) {
      for (std::size_t b = 0; b < q; ++b) {
        const double pairs = a == b ? double(c[a]) * (c[a] - 1) : double(c[a]) * c[b];
        coincidence[a][b] += pairs * weight;
      }
    }
  }

  std::vector<double> marginal(q, 0.0);
  double n = 0.0;
  for (std::size_t a = 0; a < q; ++a) {
    for (std::size_t b = 0; b < q; ++b) marginal[a] += coincidence[a][b];
    n += marginal[a];
  }

  auto delta2 = [&](std::size_t c, std::size_t k) -> double {
    if (c == k) return 0.0;
    switch (metric) {
      case DistanceMetric::Nominal:
        return 1.0;
      case DistanceMetric::Interval: {
        const double d = double(c) - double(k);
        return d * d;
      }
      case DistanceMetric::Ordinal: {
        const auto lo = std::min(c, k), hi = std::max(c, k);
        double sum = 0.0;
        for (std::size_t g = lo; g <= hi; ++g) sum += marginal[g];
        const double d = sum - (marginal[lo] + marginal[hi]) / 2.0;
        return d * d;
      }
    }
    return 0.0;
  };

  double observed = 0.0, expected = 0.0;
  for (std::size_t c = 0; c < q; ++c) {
    for (std::size_t k = 0; k < q; ++k) {
      const double d = delta2(c, k);
      observed += coincidence[c][k] * d;
      expected += marginal[c] * marginal[k] * d;
    }
  }
  observed /= n;
  expected /= n * (n - 1.0);
  if (expected <= 0.0) {
    throw Error(ErrorCode::DegenerateDistribution,
                "expected disagreement is zero (single category observed)");
  }
  return 1.0 - observed / expected;
}

double gwet_ac1(const ReliabilityTable& table) {
  check_values(table);
  if (table.category_count < 2) {
    throw Error(ErrorCode::DegenerateDistribution, "AC1 needs at least 2 categories");
  }
  const auto counts = pairable_counts(table);
  const auto q = static_cast<std::size_t>(table.category_count);

  double agreement = 0.0;
  std::vector<double> prevalence(q, 0.0);
  for (const auto& c : counts) {
    int m = 0;
    for (int v : c) m += v;
    double agree_pairs = 0.0;
    for (std::size_t k = 0; k < q; ++k) {
      agree_pairs += double(c[k]) * (c[k] - 1);
      prevalence[k] += double(c[k]) / m;
    }
    agreement += agree_pairs / (double(m) * (m - 1));
  }
  const double units = static_cast<double>(counts.size());
  agreement /= units;

  double chance = 0.0;
  for (double& p : prevalence) {
    p /= units;
    chance += p * (1.0 - p);
  }
  chance /= double(q - 1);
  if (chance >= 1.0) {
    throw Error(ErrorCode::DegenerateDistribution, "chance agreement equals 1");
  }
  return (agreement - chance) / (1.0 - chance);
}

double item_disagreement(std::span<const Annotation> annotations,
                         const LabellingSchema& schema) {
  if (annotations.size() < 2) {
    throw Error(ErrorCode::InsufficientData,
                "item disagreement needs at least 2 annotations");
  }
  if (schema.class_count() < 2) {
    throw Error(ErrorCode::Validation, "schema needs at least 2 classes");
  }
  // Flags nobody asserted on this item are not in play and are not scored.
  std::vector<std::string> scored_flags;
  for (const auto& flag : schema.flags) {
    for (const auto& a : annotations) {
      if (a.content.flags.count(flag)) {
        scored_flags.push_back(flag);
        break;
      }
    }
  }
  const double span = schema.class_count() - 1;
  double total = 0.0;
  std::size_t terms = 0;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    for (std::size_t j = i + 1; j < annotations.size(); ++j) {
      const auto& a = annotations[i].content;
      const auto& b = annotations[j].content;
      total += std::abs(a.class_value - b.class_value) / span;
      ++terms;
      for (const auto& flag : scored_flags) {
        total += (a.flags.count(flag) != b.flags.count(flag)) ? 1.0 : 0.0;
        ++terms;
      }
    }
  }
  return total / static_cast<double>(terms);
}

namespace {

template <typename RowKey, typename KeyFn, typename ValueFn>
ReliabilityTable build_table(std::span<const Annotation> annotations, int categories,
                             KeyFn row_key, ValueFn value) {
  std::map<RowKey, std::map<AnnotatorId, const Annotation*>> cells;
  std::set<AnnotatorId> annotators;
  for (const auto& a : annotations) {
    auto& slot = cells[row_key(a)][a.annotator_id];
    if (!slot || slot->ref < a.ref) slot = &a;
    annotators.insert(a.annotator_id);
  }
  ReliabilityTable table;
  table.category_count = categories;
  for (const auto& [key, row] : cells) {
    std::vector<std::optional<int>> out;
    out.reserve(annotators.size());
    for (const auto& annotator : annotators) {
      auto it = row.find(annotator);
      out.push_back(it == row.end() ? std::nullopt
                                    : std::optional<int>(value(*it->second)));
    }
    table.rows.push_back(std::move(out));
  }
  return table;
}

}  // namespace

ReliabilityTable classification_table(std::span<const Annotation> annotations,
                                      const LabellingSchema& schema) {
  return build_table<ItemId>(
      annotations, schema.class_count(), [](const Annotation& a) { return a.item_id; },
      [](const Annotation& a) { return a.content.class_value; });
}

ReliabilityTable flag_table(std::span<const Annotation> annotations,
                            const std::string& flag) {
  return build_table<ItemId>(
      annotations, 2, [](const Annotation& a) { return a.item_id; },
      [&flag](const Annotation& a) { return a.content.flags.count(flag) ? 1 : 0; });
}

namespace {

std::vector<Annotation> scored_subset(std::span<const Annotation> annotations,
                                      AgreementOptions options) {
  std::vector<Annotation> out;
  for (const auto& a : annotations) {
    if (a.is_review) continue;
    if (!options.include_superseded && !a.live()) continue;
    out.push_back(a);
  }
  return out;
}

}  // namespace

std::optional<double> cumulative_alpha(std::span<const Annotation> annotations,
                                       const LabellingSchema& schema,
                                       std::vector<std::string>* warnings,
                                       AgreementOptions options) {
  const auto subset = scored_subset(annotations, options);
  const auto table = build_table<std::pair<ItemId, RoundId>>(
      subset, schema.class_count(),
      [](const Annotation& a) { return std::make_pair(a.item_id, a.round_id); },
      [](const Annotation& a) { return a.content.class_value; });
  try {
    return krippendorff_alpha(table, DistanceMetric::Ordinal);
  } catch (const Error& e) {
    if (warnings) warnings->push_back(std::string("cumulative alpha: ") + e.what());
    return std::nullopt;
  }
}

AgreementReport agreement_report(std::span<const Annotation> round_annotations,
                                 const LabellingSchema& schema, RoundId round_id,
                                 Timestamp computed_at, AgreementOptions options) {
  AgreementReport report;
  report.round_id = round_id;
  report.computed_at = computed_at;

  const auto subset = scored_subset(round_annotations, options);
  if (subset.empty()) {
    report.warnings.emplace_back("round has no annotations");
    return report;
  }

  std::map<ItemId, std::vector<Annotation>> by_item;
  for (const auto& a : subset) by_item[a.item_id].push_back(a);
  for (const auto& [item_id, anns] : by_item) {
    const int n = static_cast<int>(anns.size());
    if (n < schema.min_annotators_per_item) report.below_minimum.push_back(item_id);
    if (n < 2) continue;
    ItemScore score;
    score.score = item_disagreement(anns, schema);
    score.n_annotations = n;
    score.marked_for_review = std::any_of(anns.begin(), anns.end(), [](const auto& a) {
      return a.content.mark_for_review;
    });
    report.item_scores.emplace(item_id, score);
  }

  try {
    report.alpha_classification =
        krippendorff_alpha(classification_table(subset, schema), DistanceMetric::Ordinal);
  } catch (const Error& e) {
    report.warnings.push_back(std::string("alpha: ") + e.what());
  }
  for (const auto& flag : schema.flags) {
    try {
      report.ac1_per_flag[flag] = gwet_ac1(flag_table(subset, flag));
    } catch (const Error& e) {
      report.ac1_per_flag[flag] = std::nullopt;
      report.warnings.push_back("AC1 " + flag + ": " + e.what());
    }
  }
  return report;
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(); }

std::optional<double> number_or_null(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

void to_json(Json& j, const AgreementReport& report) {
  Json flags = Json::object();
  for (const auto& [flag, value] : report.ac1_per_flag) flags[flag] = optional_number(value);
  Json items = Json::object();
  for (const auto& [id, s] : report.item_scores) {
    items[id] = {{"score", s.score},
                 {"n_annotations", s.n_annotations},
                 {"marked_for_review", s.marked_for_review}};
  }
  j = Json{{"round_id", report.round_id},
           {"computed_at", format_timestamp(report.computed_at)},
           {"alpha_classification", optional_number(report.alpha_classification)},
           {"alpha_cumulative", optional_number(report.alpha_cumulative)},
           {"ac1_per_flag", flags},
           {"item_scores", items},
           {"below_minimum", report.below_minimum},
           {"warnings", report.warnings}};
}

void from_json(const Json& j, AgreementReport& report) {
  report = AgreementReport{};
  report.round_id = j.at("round_id").get<int>();
  report.computed_at = parse_timestamp(j.at("computed_at").get<std::string>());
  report.alpha_classification = number_or_null(j.at("alpha_classification"));
  report.alpha_cumulative = number_or_null(j.at("alpha_cumulative"));
  for (const auto& [flag, value] : j.at("ac1_per_flag").items()) {
    report.ac1_per_flag[flag] = number_or_null(value);
  }
  for (const auto& [id, s] : j.at("item_scores").items()) {
    report.item_scores[id] = ItemScore{s.at("score").get<double>(),
                                       s.at("n_annotations").get<int>(),
                                       s.at("marked_for_review").get<bool>()};
  }
  report.below_minimum = j.at("below_minimum").get<std::vector<ItemId>>();
  report.warnings = j.at("warnings").get<std::vector<std::string>>();
}

void write_item_scores_csv(std::ostream& out, const AgreementReport& report) {
  out << "item_id,score,n_annotations,marked_for_review\n";
  char buf[32];
  for (const auto& [id, s] : report.item_scores) {
    std::snprintf(buf, sizeof buf, "%.6f", s.score);
    out << csv_field(id) << ',' << buf << ',' << s.n_annotations << ','
        << (s.marked_for_review ? "true" : "false") << '\n';
  }
}

}  // namespace coannot
