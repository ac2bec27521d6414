#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtnsim/trace.hpp"

namespace dtnsim {

enum class NetworkCondition { Best, Medium, Worst };

inline double condition_scale(NetworkCondition c) {
  switch (c) {
    case NetworkCondition::Best: return 1.0;
    case NetworkCondition::Medium: return 0.5;
    case NetworkCondition::Worst: return 0.01;
  }
  return 1.0;
}

inline const char* to_string(NetworkCondition c) {
  switch (c) {
    case NetworkCondition::Best: return "best";
    case NetworkCondition::Medium: return "medium";
    case NetworkCondition::Worst: return "worst";
  }
  return "?";
}

inline NetworkCondition parse_condition(const std::string& s) {
  if (s == "best") return NetworkCondition::Best;
  if (s == "medium") return NetworkCondition::Medium;
  if (s == "worst") return NetworkCondition::Worst;
  throw std::invalid_argument("unknown network condition: " + s);
}

inline double gbps_to_bytes_per_s(double gbps) { return gbps * 1e9 / 8.0; }

struct DtnSpec {
  int id = 0;
  bool server = false;
  double port_gbps = 0;
  Bytes cache_capacity = 0;
};

/// DTNs, their port speeds, and the pairwise bandwidth matrix (Gbps, at the
/// best network condition). Users reach their home DTN over a dedicated
/// access link.
struct Topology {
  std::vector<DtnSpec> dtns;
  std::vector<std::vector<double>> bandwidth;  // Gbps; 0 = not connected
  double access_gbps = 100.0;
  double scale = 1.0;

  /// One 40 Gbps server and client ports spanning 40 to 10 Gbps; pairwise
  /// bandwidth is the slower port.
  static Topology standard(Bytes client_cache, NetworkCondition condition = NetworkCondition::Best,
                           std::vector<double> client_ports = {40, 35, 30, 20, 15, 10}, double server_port = 40) {
    Topology t;
    t.scale = condition_scale(condition);
    t.dtns.push_back({0, true, server_port, 0});
    for (std::size_t i = 0; i < client_ports.size(); ++i)
      t.dtns.push_back({static_cast<int>(i + 1), false, client_ports[i], client_cache});
    const auto n = t.dtns.size();
    t.bandwidth.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) t.bandwidth[i][j] = std::min(t.dtns[i].port_gbps, t.dtns[j].port_gbps);
    return t;
  }

  std::size_t size() const noexcept { return dtns.size(); }

  int server() const {
    for (const auto& d : dtns)
      if (d.server) return d.id;
    throw std::logic_error("topology has no server DTN");
  }

  std::vector<int> clients() const {
    std::vector<int> out;
    for (const auto& d : dtns)
      if (!d.server) out.push_back(d.id);
    return out;
  }

  /// Scaled pair bandwidth in bytes/s.
  double pair_rate(int src, int dst) const {
    const double b = bandwidth.at(static_cast<std::size_t>(src)).at(static_cast<std::size_t>(dst));
    if (!(b > 0)) throw std::invalid_argument("DTNs " + std::to_string(src) + " and " + std::to_string(dst) +
                                              " are not connected");
    return gbps_to_bytes_per_s(b * scale);
  }

  double port_rate(int dtn) const {
    return gbps_to_bytes_per_s(dtns.at(static_cast<std::size_t>(dtn)).port_gbps * scale);
  }

  double access_rate() const { return gbps_to_bytes_per_s(access_gbps); }

  void validate() const {
    if (dtns.empty()) throw std::invalid_argument("topology has no DTNs");
    int servers = 0;
    for (std::size_t i = 0; i < dtns.size(); ++i) {
      if (dtns[i].id != static_cast<int>(i)) throw std::invalid_argument("DTN ids must be 0..n-1 in order");
      if (!(dtns[i].port_gbps > 0)) throw std::invalid_argument("DTN port speeds must be positive");
      servers += dtns[i].server;
    }
    if (servers != 1) throw std::invalid_argument("topology needs exactly one server DTN");
    if (dtns.size() < 2) throw std::invalid_argument("topology needs at least one client DTN");
    if (bandwidth.size() != dtns.size()) throw std::invalid_argument("bandwidth matrix size mismatch");
    for (std::size_t i = 0; i < dtns.size(); ++i) {
      if (bandwidth[i].size() != dtns.size()) throw std::invalid_argument("bandwidth matrix size mismatch");
      for (std::size_t j = 0; j < dtns.size(); ++j) {
        if (bandwidth[i][j] < 0 || bandwidth[i][j] != bandwidth[j][i])
          throw std::invalid_argument("bandwidth matrix must be symmetric and non-negative");
      }
    }
    const int s = server();
    for (int c : clients())
      if (!(bandwidth[static_cast<std::size_t>(s)][static_cast<std::size_t>(c)] > 0))
        throw std::invalid_argument("every client DTN must reach the server");
    if (!(scale > 0) || !(access_gbps > 0)) throw std::invalid_argument("scale and access bandwidth must be positive");
  }
};

enum class TransferPurpose { Demand, Prefetch, Stream, Replicate };

struct Transfer {
  std::uint64_t id = 0;
  int src = 0;
  int dst = 0;
  double bytes = 0;
  double remaining = 0;
  double rate = 0;  // bytes/s
  Timestamp started = 0;
  Timestamp finish_at = 0;
  TransferPurpose purpose = TransferPurpose::Demand;
  std::uint64_t token = 0;  // owner's handle
};

/// Concurrent transfers under per-port fair sharing. A transfer's rate is the
/// smaller of its source and destination port shares (port rate divided by
/// the transfers using that port), capped by the pair bandwidth. Rates are
/// recomputed whenever a transfer starts or ends; progress is tracked in
/// remaining bytes.
class FlowNetwork {
 public:
  explicit FlowNetwork(const Topology& topo) : topo_(&topo), load_(topo.size(), 0) {}

  std::uint64_t start(int src, int dst, double bytes, Timestamp now, TransferPurpose purpose, std::uint64_t token) {
    if (src == dst) throw std::invalid_argument("transfer endpoints must differ");
    (void)topo_->pair_rate(src, dst);
    advance(now);
    const std::uint64_t id = next_id_++;
    active_.emplace(id, Transfer{id, src, dst, bytes, bytes, 0, now, now, purpose, token});
    ++load_[static_cast<std::size_t>(src)];
    ++load_[static_cast<std::size_t>(dst)];
    reshare(now);
    return id;
  }

  /// Earliest pending completion, or +inf when idle.
  Timestamp next_completion() const {
    Timestamp t = std::numeric_limits<double>::infinity();
    for (const auto& [_, tr] : active_) t = std::min(t, tr.finish_at);
    return t;
  }

  /// Advances to `now` and removes every transfer due by then, in id order.
  std::vector<Transfer> complete(Timestamp now) {
    std::vector<Transfer> done;
    for (auto it = active_.begin(); it != active_.end();) {
      if (it->second.finish_at <= now) {
        done.push_back(it->second);
        --load_[static_cast<std::size_t>(it->second.src)];
        --load_[static_cast<std::size_t>(it->second.dst)];
        it = active_.erase(it);
      } else {
        ++it;
      }
    }
    advance(now);
    if (!done.empty()) reshare(now);
    for (auto& d : done) {
      d.remaining = 0;
      d.finish_at = std::max(d.finish_at, d.started);
    }
    return done;
  }

  std::size_t active() const noexcept { return active_.size(); }
  const std::map<std::uint64_t, Transfer>& transfers() const noexcept { return active_; }
  int port_load(int dtn) const { return load_.at(static_cast<std::size_t>(dtn)); }

  /// Aggregate rate through a port right now (bytes/s).
  double port_flow(int dtn) const {
    double f = 0;
    for (const auto& [_, t] : active_)
      if (t.src == dtn || t.dst == dtn) f += t.rate;
    return f;
  }

 private:
  void advance(Timestamp now) {
    if (now <= clock_) return;
    for (auto& [_, t] : active_) t.remaining = std::max(0.0, t.remaining - t.rate * (now - clock_));
    clock_ = now;
  }

  void reshare(Timestamp now) {
    clock_ = std::max(clock_, now);
    for (auto& [_, t] : active_) {
      const double src_share = topo_->port_rate(t.src) / load_[static_cast<std::size_t>(t.src)];
      const double dst_share = topo_->port_rate(t.dst) / load_[static_cast<std::size_t>(t.dst)];
      t.rate = std::min({src_share, dst_share, topo_->pair_rate(t.src, t.dst)});
      t.finish_at = clock_ + t.remaining / t.rate;
    }
  }

  const Topology* topo_;
  std::vector<int> load_;
  std::map<std::uint64_t, Transfer> active_;
  std::uint64_t next_id_ = 0;
  Timestamp clock_ = 0;
};

}  // namespace dtnsim
