#pragma once

// Reference implementations used only by tests. They follow the textbook
// definitions directly and share no code with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace oracle {

using Row = std::vector<std::optional<int>>;

/// Ordinal squared distance from the pooled marginals of all pairable values.
inline double ordinal_delta2(int c, int k, const std::map<int, int>& n) {
  if (c == k) return 0.0;
  const int lo = std::min(c, k), hi = std::max(c, k);
  double sum = 0.0;
  for (int g = lo; g <= hi; ++g) {
    auto it = n.find(g);
    sum += it == n.end() ? 0 : it->second;
  }
  const double nc = n.count(c) ? n.at(c) : 0, nk = n.count(k) ? n.at(k) : 0;
  const double d = sum - (nc + nk) / 2.0;
  return d * d;
}

/// Krippendorff's alpha by enumerating every ordered pair of values within
/// units (observed) and across all pairable values (expected).
inline std::optional<double> alpha_ordinal(const std::vector<Row>& units) {
  std::vector<std::vector<int>> pairable;
  std::map<int, int> n;
  std::size_t total = 0;
  for (const auto& row : units) {
    std::vector<int> values;
    for (const auto& v : row) {
      if (v) values.push_back(*v);
    }
    if (values.size() < 2) continue;
    for (int v : values) ++n[v];
    total += values.size();
    pairable.push_back(std::move(values));
  }
  if (total < 2) return std::nullopt;

  double observed = 0.0;
  for (const auto& values : pairable) {
    const double m = static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (std::size_t j = 0; j < values.size(); ++j) {
        if (i != j) observed += ordinal_delta2(values[i], values[j], n) / (m - 1.0);
      }
    }
  }
  observed /= static_cast<double>(total);

  std::vector<int> all;
  for (const auto& values : pairable) all.insert(all.end(), values.begin(), values.end());
  double expected = 0.0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = 0; j < all.size(); ++j) {
      if (i != j) expected += ordinal_delta2(all[i], all[j], n);
    }
  }
  expected /= static_cast<double>(total) * static_cast<double>(total - 1);
  if (expected == 0.0) return std::nullopt;
  return 1.0 - observed / expected;
}

/// Gwet's AC1 over items with at least two ratings: P_a from explicit rater
/// pairs, pi_q as the mean per-item share of category q.
inline std::optional<double> gwet_ac1(const std::vector<Row>& units, int categories) {
  double pa = 0.0;
  std::vector<double> pi(categories, 0.0);
  int used = 0;
  for (const auto& row : units) {
    std::vector<int> values;
    for (const auto& v : row) {
      if (v) values.push_back(*v);
    }
    if (values.size() < 2) continue;
    ++used;
    int agree = 0, pairs = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (std::size_t j = i + 1; j < values.size(); ++j) {
        ++pairs;
        agree += values[i] == values[j];
      }
    }
    pa += static_cast<double>(agree) / pairs;
    for (int v : values) pi[v] += 1.0 / static_cast<double>(values.size());
  }
  if (used == 0 || categories < 2) return std::nullopt;
  pa /= used;
  double pe = 0.0;
  for (double& p : pi) {
    p /= used;
    pe += p * (1.0 - p);
  }
  pe /= categories - 1;
  if (pe == 1.0) return std::nullopt;
  return (pa - pe) / (1.0 - pe);
}

/// Plurality with ties resolved to the lowest tied class.
inline std::pair<int, bool> plurality_tie_lower(const std::vector<int>& values) {
  std::map<int, int> count;
  for (int v : values) ++count[v];
  int best = -1;
  for (const auto& [c, n] : count) best = std::max(best, n);
  std::vector<int> leaders;
  for (const auto& [c, n] : count) {
    if (n == best) leaders.push_back(c);
  }
  return {*std::min_element(leaders.begin(), leaders.end()), leaders.size() > 1};
}

/// Geometric round sizes: each early round is round(total * g^i / sum g^j),
/// the last round takes what is left.
inline std::vector<int> plan(int total, int rounds, double g) {
  double denom = 0.0;
  for (int i = 0; i < rounds; ++i) denom += std::pow(g, i);
  std::vector<int> sizes;
  int used = 0;
  for (int i = 0; i + 1 < rounds; ++i) {
    const int s = std::max(1, static_cast<int>(std::floor(total * std::pow(g, i) / denom + 0.5)));
    sizes.push_back(s);
    used += s;
  }
  sizes.push_back(total - used);
  return sizes;
}

/// Every row of `raters` cells, each missing or a category below q.
inline std::vector<Row> row_patterns(int raters, int q) {
  std::vector<Row> out{{}};
  for (int r = 0; r < raters; ++r) {
    std::vector<Row> next;
    for (const auto& prefix : out) {
      auto missing = prefix;
      missing.push_back(std::nullopt);
      next.push_back(missing);
      for (int c = 0; c < q; ++c) {
        auto row = prefix;
        row.push_back(c);
        next.push_back(row);
      }
    }
    out = std::move(next);
  }
  return out;
}

/// Calls `fn` on every multiset of `items` rows drawn from `patterns`.
inline void for_each_multiset(const std::vector<Row>& patterns, int items,
                              const std::function<void(const std::vector<Row>&)>& fn) {
  std::vector<std::size_t> idx(items, 0);
  std::vector<Row> rows(items);
  while (true) {
    for (int i = 0; i < items; ++i) rows[i] = patterns[idx[i]];
    fn(rows);
    int pos = items - 1;
    while (pos >= 0 && idx[pos] == patterns.size() - 1) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int j = pos + 1; j < items; ++j) idx[j] = idx[pos];
  }
}

struct Binary {
  double accuracy, p_pos, r_pos, f1_pos, p_neg, r_neg, f1_neg, f1_macro;
};

/// Metrics straight from label vectors (1 = positive).
inline Binary metrics(const std::vector<int>& gold, const std::vector<int>& pred) {
  auto ratio = [](double a, double b) { return b == 0.0 ? 0.0 : a / b; };
  auto f1 = [&](double p, double r) { return ratio(2 * p * r, p + r); };
  double correct = 0, pp = 0, gp = 0, both_p = 0, pn = 0, gn = 0, both_n = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    correct += gold[i] == pred[i];
    pp += pred[i] == 1;
    gp += gold[i] == 1;
    both_p += gold[i] == 1 && pred[i] == 1;
    pn += pred[i] == 0;
    gn += gold[i] == 0;
    both_n += gold[i] == 0 && pred[i] == 0;
  }
  Binary m{};
  m.accuracy = ratio(correct, static_cast<double>(gold.size()));
  m.p_pos = ratio(both_p, pp);
  m.r_pos = ratio(both_p, gp);
  m.f1_pos = f1(m.p_pos, m.r_pos);
  m.p_neg = ratio(both_n, pn);
  m.r_neg = ratio(both_n, gn);
  m.f1_neg = f1(m.p_neg, m.r_neg);
  m.f1_macro = (m.f1_pos + m.f1_neg) / 2.0;
  return m;
}

/// Mean normalised pairwise distance over class and the given flags.
inline double item_disagreement(const std::vector<std::pair<int, std::vector<bool>>>& anns,
                                int class_count) {
  double sum = 0.0;
  int fields = 0;
  for (std::size_t i = 0; i < anns.size(); ++i) {
    for (std::size_t j = i + 1; j < anns.size(); ++j) {
      sum += std::abs(anns[i].first - anns[j].first) / static_cast<double>(class_count - 1);
      ++fields;
      for (std::size_t f = 0; f < anns[i].second.size(); ++f) {
        sum += anns[i].second[f] != anns[j].second[f];
        ++fields;
      }
    }
  }
  return fields == 0 ? 0.0 : sum / fields;
}

}  // namespace oracle
