#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dtnsim {

struct MinerConfig {
  std::uint64_t min_support = 30;
  double min_confidence = 0.5;
  std::size_t top_n = 3;
  double session_gap = 1800.0;
  double default_period = 60.0;  // next-request gap when only one request is known
};

inline void validate(const MinerConfig& c) {
  if (c.min_support < 1) throw std::invalid_argument("min_support must be >= 1");
  if (!(c.min_confidence > 0 && c.min_confidence <= 1)) throw std::invalid_argument("min_confidence must be in (0,1]");
  if (c.top_n < 1) throw std::invalid_argument("top_n must be >= 1");
  if (!(c.session_gap > 0) || !(c.default_period > 0)) throw std::invalid_argument("durations must be positive");
}

using Transaction = std::set<std::string>;
using Itemset = std::vector<std::string>;  // sorted ascending

struct Rule {
  Itemset antecedent;
  std::string consequent;
  std::uint64_t support = 0;             // support(antecedent ∪ {consequent})
  std::uint64_t antecedent_support = 0;  // support(antecedent)
  double confidence = 0;
};

struct RuleSet {
  std::map<Itemset, std::uint64_t> itemsets;
  std::vector<Rule> rules;  // confidence desc, support desc, then lexical

  bool empty() const noexcept { return itemsets.empty(); }
};

namespace detail {

/// Prefix tree over items ordered by descending global support.
class FpTree {
 public:
  struct Node {
    int item;
    std::uint64_t count;
    int parent;
    std::map<int, int> children;
  };

  explicit FpTree(std::size_t n_items) : header_(n_items) { nodes_.push_back({-1, 0, -1, {}}); }

  void insert(const std::vector<int>& path, std::uint64_t count) {
    int cur = 0;
    for (int item : path) {
      auto it = nodes_[static_cast<std::size_t>(cur)].children.find(item);
      if (it == nodes_[static_cast<std::size_t>(cur)].children.end()) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({item, 0, cur, {}});
        nodes_[static_cast<std::size_t>(cur)].children.emplace(item, id);
        header_[static_cast<std::size_t>(item)].push_back(id);
        cur = id;
      } else {
        cur = it->second;
      }
      nodes_[static_cast<std::size_t>(cur)].count += count;
    }
  }

  const std::vector<int>& occurrences(int item) const { return header_[static_cast<std::size_t>(item)]; }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

 private:
  std::vector<Node> nodes_;
  std::vector<std::vector<int>> header_;
};

using WeightedPaths = std::vector<std::pair<std::vector<int>, std::uint64_t>>;

/// Two scans: count item supports and keep the frequent ones, then rebuild the
/// tree from paths restricted to frequent items in rank order; grow patterns
/// from each item's conditional pattern base.
inline void fp_growth(const WeightedPaths& db, std::size_t n_items, std::uint64_t min_support,
                      std::vector<int>& suffix, std::map<std::vector<int>, std::uint64_t>& out) {
  std::vector<std::uint64_t> support(n_items, 0);
  for (const auto& [path, count] : db)
    for (int item : path) support[static_cast<std::size_t>(item)] += count;

  std::vector<int> frequent;
  for (std::size_t i = 0; i < n_items; ++i)
    if (support[i] >= min_support) frequent.push_back(static_cast<int>(i));
  if (frequent.empty()) return;
  // Rank: support desc, item asc.
  std::sort(frequent.begin(), frequent.end(), [&](int a, int b) {
    auto sa = support[static_cast<std::size_t>(a)], sb = support[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  });
  std::vector<int> rank(n_items, -1);
  for (std::size_t r = 0; r < frequent.size(); ++r) rank[static_cast<std::size_t>(frequent[r])] = static_cast<int>(r);

  FpTree tree(n_items);
  for (const auto& [path, count] : db) {
    std::vector<int> kept;
    for (int item : path)
      if (rank[static_cast<std::size_t>(item)] >= 0) kept.push_back(item);
    std::sort(kept.begin(), kept.end(), [&](int a, int b) {
      return rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)];
    });
    if (!kept.empty()) tree.insert(kept, count);
  }

  // Least frequent first.
  for (auto it = frequent.rbegin(); it != frequent.rend(); ++it) {
    const int item = *it;
    suffix.push_back(item);
    std::vector<int> key = suffix;
    std::sort(key.begin(), key.end());
    out[key] = support[static_cast<std::size_t>(item)];

    WeightedPaths base;
    for (int node_id : tree.occurrences(item)) {
      const auto& n = tree.node(node_id);
      std::vector<int> prefix;
      for (int p = n.parent; p > 0; p = tree.node(p).parent) prefix.push_back(tree.node(p).item);
      if (!prefix.empty()) base.push_back({std::move(prefix), n.count});
    }
    if (!base.empty()) fp_growth(base, n_items, min_support, suffix, out);
    suffix.pop_back();
  }
}

}  // namespace detail

/// Frequent itemsets (FP-Growth) and single-consequent association rules.
inline RuleSet mine_rules(const std::vector<Transaction>& transactions, const MinerConfig& cfg) {
  validate(cfg);
  RuleSet out;
  if (transactions.empty()) return out;

  std::vector<std::string> names;
  std::unordered_map<std::string, int> ids;
  detail::WeightedPaths db;
  db.reserve(transactions.size());
  for (const auto& t : transactions) {
    std::vector<int> path;
    for (const auto& item : t) {
      auto [it, inserted] = ids.emplace(item, static_cast<int>(names.size()));
      if (inserted) names.push_back(item);
      path.push_back(it->second);
    }
    db.push_back({std::move(path), 1});
  }

  std::map<std::vector<int>, std::uint64_t> found;
  std::vector<int> suffix;
  detail::fp_growth(db, names.size(), cfg.min_support, suffix, found);

  for (const auto& [key, sup] : found) {
    Itemset named;
    for (int id : key) named.push_back(names[static_cast<std::size_t>(id)]);
    std::sort(named.begin(), named.end());
    out.itemsets.emplace(std::move(named), sup);
  }

  for (const auto& [items, sup] : out.itemsets) {
    if (items.size() < 2) continue;
    for (std::size_t k = 0; k < items.size(); ++k) {
      Itemset ante;
      for (std::size_t j = 0; j < items.size(); ++j)
        if (j != k) ante.push_back(items[j]);
      const auto ante_sup = out.itemsets.at(ante);
      const double conf = static_cast<double>(sup) / static_cast<double>(ante_sup);
      if (conf >= cfg.min_confidence) out.rules.push_back({std::move(ante), items[k], sup, ante_sup, conf});
    }
  }
  std::sort(out.rules.begin(), out.rules.end(), [](const Rule& a, const Rule& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.support != b.support) return a.support > b.support;
    if (a.consequent != b.consequent) return a.consequent < b.consequent;
    return a.antecedent < b.antecedent;
  });
  return out;
}

/// Splits each user's time-ordered object stream into sessions at gaps longer than `gap`.
template <typename Record>
std::vector<Transaction> sessionize(const std::vector<Record>& user_records, double gap) {
  std::vector<Transaction> out;
  double last = 0;
  for (const auto& r : user_records) {
    if (out.empty() || r.ts - last > gap) out.emplace_back();
    out.back().insert(r.object_id);
    last = r.ts;
  }
  return out;
}

/// antecedent|consequent|support|confidence, antecedent items joined by ';'.
inline void write_rules(std::ostream& os, const RuleSet& rules) {
  os << "antecedent|consequent|support|confidence\n";
  for (const auto& r : rules.rules) {
    for (std::size_t i = 0; i < r.antecedent.size(); ++i) os << (i ? ";" : "") << r.antecedent[i];
    os << '|' << r.consequent << '|' << r.support << '|' << r.confidence << '\n';
  }
}

}  // namespace dtnsim
