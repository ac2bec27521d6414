#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dtnsim/random.hpp"
#include "dtnsim/trace.hpp"

namespace dtnsim {

struct InterestVector {
  std::string user_id;
  int home_dtn = 0;
  std::vector<double> v;  // one entry per catalog object, L2-normalized

  bool active() const {
    return std::any_of(v.begin(), v.end(), [](double x) { return x != 0.0; });
  }
};

/// Per-user request counts over catalog objects in [from, to), L2-normalized.
/// Users are returned in id order.
inline std::vector<InterestVector> interest_vectors(const std::vector<AccessRecord>& records, const Catalog& catalog,
                                                    Timestamp from, Timestamp to,
                                                    const std::function<int(const std::string&)>& home_of) {
  std::map<std::string, std::vector<double>> counts;
  for (const auto& r : records) {
    if (r.ts < from || r.ts >= to) continue;
    auto& v = counts[r.user_id];
    if (v.empty()) v.assign(catalog.size(), 0.0);
    v[catalog.index_of(r.object_id)] += 1.0;
  }
  std::vector<InterestVector> out;
  for (auto& [user, v] : counts) {
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0)
      for (double& x : v) x /= norm;
    out.push_back({user, home_of(user), std::move(v)});
  }
  return out;
}

struct KMeansResult {
  std::vector<int> assignment;
  std::vector<std::vector<double>> centroids;
  std::vector<double> objective;  // within-cluster sum of squares after each iteration
  int iterations = 0;
};

namespace detail {
inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}
}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Points tie to the lowest-index
/// centroid; an emptied cluster keeps its previous centroid.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                           int max_iterations = 100, double tol = 1e-6) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (points.empty()) throw std::invalid_argument("kmeans needs at least one point");
  const std::size_t n = points.size();
  k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(k), n));
  Rng rng(seed);

  KMeansResult res;
  res.centroids.push_back(points[rng.below(n)]);
  std::vector<double> d2(n);
  while (res.centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::numeric_limits<double>::infinity();
      for (const auto& c : res.centroids) d2[i] = std::min(d2[i], detail::sq_dist(points[i], c));
      total += d2[i];
    }
    if (!(total > 0)) {
      res.centroids.push_back(res.centroids.front());  // all points coincide with chosen centers
      continue;
    }
    double pick = rng.uniform() * total;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (pick < d2[i]) {
        chosen = i;
        break;
      }
      pick -= d2[i];
    }
    res.centroids.push_back(points[chosen]);
  }

  res.assignment.assign(n, 0);
  const std::size_t dim = points.front().size();
  for (int iter = 0; iter < max_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < res.centroids.size(); ++c) {
        const double d = detail::sq_dist(points[i], res.centroids[c]);
        if (d < best) {
          best = d;
          res.assignment[i] = static_cast<int>(c);
        }
      }
    }
    std::vector<std::vector<double>> next(res.centroids.size(), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> sizes(res.centroids.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = static_cast<std::size_t>(res.assignment[i]);
      ++sizes[c];
      for (std::size_t j = 0; j < dim; ++j) next[c][j] += points[i][j];
    }
    double shift = 0;
    for (std::size_t c = 0; c < next.size(); ++c) {
      if (sizes[c] == 0) {
        next[c] = res.centroids[c];
        continue;
      }
      for (double& x : next[c]) x /= static_cast<double>(sizes[c]);
      shift = std::max(shift, std::sqrt(detail::sq_dist(next[c], res.centroids[c])));
    }
    res.centroids = std::move(next);
    res.iterations = iter + 1;
    double after = 0;
    for (std::size_t i = 0; i < n; ++i)
      after += detail::sq_dist(points[i], res.centroids[static_cast<std::size_t>(res.assignment[i])]);
    res.objective.push_back(after);
    if (shift <= tol) break;
  }
  return res;
}

struct SubGroup {
  int home_dtn = 0;
  std::vector<std::string> members;
  int hub_dtn = -1;
};

struct VirtualGroup {
  int group_id = 0;
  std::vector<std::string> members;
  std::vector<double> centroid;
  std::vector<SubGroup> subgroups;  // ascending home_dtn

  std::vector<int> dtns() const {
    std::vector<int> out;
    for (const auto& s : subgroups) out.push_back(s.home_dtn);
    return out;
  }
  int hub() const { return subgroups.empty() ? -1 : subgroups.front().hub_dtn; }
};

/// K-Means over active users, then each non-empty cluster split by home DTN.
/// Groups are numbered by their first member in input order.
inline std::vector<VirtualGroup> cluster_users(const std::vector<InterestVector>& users, int k, std::uint64_t seed) {
  std::vector<const InterestVector*> active;
  for (const auto& u : users)
    if (u.active()) active.push_back(&u);
  if (active.empty()) return {};
  std::vector<std::vector<double>> points;
  for (const auto* u : active) points.push_back(u->v);
  const auto km = kmeans(points, k, seed);

  std::map<int, int> renumber;
  std::vector<VirtualGroup> groups;
  for (std::size_t i = 0; i < active.size(); ++i) {
    const int c = km.assignment[i];
    auto [it, inserted] = renumber.emplace(c, static_cast<int>(groups.size()));
    if (inserted) groups.push_back({it->second, {}, km.centroids[static_cast<std::size_t>(c)], {}});
    groups[static_cast<std::size_t>(it->second)].members.push_back(active[i]->user_id);
  }
  std::unordered_map<std::string, int> home;
  for (const auto* u : active) home[u->user_id] = u->home_dtn;
  for (auto& g : groups) {
    std::map<int, std::vector<std::string>> by_dtn;
    for (const auto& m : g.members) by_dtn[home.at(m)].push_back(m);
    for (auto& [dtn, members] : by_dtn) g.subgroups.push_back({dtn, std::move(members), -1});
  }
  return groups;
}

struct HubWeights {
  double throughput = 0.6;
  double availability = 0.2;
  double frequency = 0.2;
};

struct HubCandidate {
  int dtn = 0;
  double throughput_sum = 0;  // sum of throughput to the other candidate DTNs
  double availability = 0;    // free resource fraction in [0,1]
  double frequency = 0;       // group requests per hour through this DTN
};

struct HubScore {
  int dtn = 0;
  double p_term = 0, u_term = 0, f_term = 0;
  double score() const { return p_term + u_term + f_term; }
};

struct HubChoice {
  int dtn = -1;
  std::vector<HubScore> scores;  // in candidate order
};

/// Weighted sum of min-max normalized terms; a term that is constant across
/// candidates contributes 0. Ties go to the lowest DTN id.
inline HubChoice select_hub(const std::vector<HubCandidate>& candidates, const HubWeights& w = {}) {
  if (candidates.empty()) throw std::invalid_argument("select_hub: no candidates");
  if (std::abs(w.throughput + w.availability + w.frequency - 1.0) > 1e-9)
    throw std::invalid_argument("hub weights must sum to 1");
  auto normalizer = [&](auto field) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& c : candidates) {
      const double v = c.*field;
      if (v < 0 || !std::isfinite(v)) throw std::invalid_argument("hub inputs must be finite and non-negative");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return [lo, hi, field](const HubCandidate& c) { return hi > lo ? (c.*field - lo) / (hi - lo) : 0.0; };
  };
  const auto np = normalizer(&HubCandidate::throughput_sum);
  const auto nu = normalizer(&HubCandidate::availability);
  const auto nf = normalizer(&HubCandidate::frequency);

  HubChoice out;
  double best = -1;
  for (const auto& c : candidates) {
    HubScore s{c.dtn, w.throughput * np(c), w.availability * nu(c), w.frequency * nf(c)};
    const double v = s.score();
    if (v > best + 1e-12 || (std::abs(v - best) <= 1e-12 && c.dtn < out.dtn)) {
      best = v;
      out.dtn = c.dtn;
    }
    out.scores.push_back(s);
  }
  return out;
}

struct HotObject {
  std::string object_id;
  std::uint64_t count = 0;
  Interval tr;  // most recent range the group requested
  Bytes bytes = 0;
};

struct Replication {
  std::string object_id;
  Interval tr;
  Bytes bytes = 0;
};

/// Hottest objects first (count desc, object id asc), taking each one whose
/// segment still fits in the remaining budget.
inline std::vector<Replication> replicate_hot(std::vector<HotObject> hot, Bytes budget) {
  std::sort(hot.begin(), hot.end(), [](const HotObject& a, const HotObject& b) {
    return a.count != b.count ? a.count > b.count : a.object_id < b.object_id;
  });
  std::vector<Replication> out;
  for (const auto& h : hot) {
    if (h.bytes == 0 || h.bytes > budget) continue;
    budget -= h.bytes;
    out.push_back({h.object_id, h.tr, h.bytes});
  }
  return out;
}

struct Placement {
  std::vector<VirtualGroup> groups;
  std::vector<HubChoice> hubs;  // parallel to groups
  std::unordered_map<std::string, int> group_of;

  int hub_for_user(const std::string& user_id) const {
    auto it = group_of.find(user_id);
    return it == group_of.end() ? -1 : groups[static_cast<std::size_t>(it->second)].hub();
  }
};

/// Re-clusters users and selects one hub per group; every sub-group of a group
/// shares it. `inputs` supplies the candidate terms for a group's DTNs.
inline Placement rebalance(const std::vector<InterestVector>& users, int k, std::uint64_t seed,
                           const std::function<std::vector<HubCandidate>(const VirtualGroup&)>& inputs,
                           const HubWeights& w = {}) {
  Placement p;
  p.groups = cluster_users(users, k, seed);
  for (auto& g : p.groups) {
    auto choice = select_hub(inputs(g), w);
    for (auto& s : g.subgroups) s.hub_dtn = choice.dtn;
    for (const auto& m : g.members) p.group_of[m] = g.group_id;
    p.hubs.push_back(std::move(choice));
  }
  return p;
}

/// group_id,members,subgroups,hub_dtn,p_term,u_term,f_term,score
inline void write_groups(std::ostream& os, const Placement& p) {
  os << "group_id,members,subgroups,hub_dtn,p_term,u_term,f_term,score\n";
  for (std::size_t i = 0; i < p.groups.size(); ++i) {
    const auto& g = p.groups[i];
    const auto& h = p.hubs[i];
    HubScore s;
    for (const auto& sc : h.scores)
      if (sc.dtn == h.dtn) s = sc;
    os << g.group_id << ',' << g.members.size() << ',' << g.subgroups.size() << ',' << h.dtn << ','
       << detail::format_double(s.p_term) << ',' << detail::format_double(s.u_term) << ','
       << detail::format_double(s.f_term) << ',' << detail::format_double(s.score()) << '\n';
  }
}

}  // namespace dtnsim
