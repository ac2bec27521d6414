#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace dtnsim {

/// Half-open interval [begin, end) of observation time, in whole seconds.
struct Interval {
  std::int64_t begin = 0;
  std::int64_t end = 0;

  constexpr std::int64_t length() const noexcept { return end > begin ? end - begin : 0; }
  constexpr bool empty() const noexcept { return end <= begin; }
  constexpr bool valid() const noexcept { return begin < end; }

  friend constexpr bool operator==(const Interval&, const Interval&) = default;
  friend constexpr auto operator<=>(const Interval&, const Interval&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Interval& iv) {
  return os << '[' << iv.begin << ',' << iv.end << ')';
}

constexpr Interval intersect(const Interval& a, const Interval& b) noexcept {
  return {std::max(a.begin, b.begin), std::min(a.end, b.end)};
}

/// Canonical set of disjoint, non-adjacent half-open intervals.
class IntervalSet {
 public:
  IntervalSet() = default;
  IntervalSet(std::initializer_list<Interval> ivs) {
    for (const auto& iv : ivs) add(iv);
  }
  explicit IntervalSet(const Interval& iv) { add(iv); }

  void add(Interval iv) {
    if (iv.empty()) return;
    // First run whose end >= iv.begin may touch iv.
    auto it = runs_.upper_bound(iv.begin);
    if (it != runs_.begin()) {
      auto prev = std::prev(it);
      if (prev->second >= iv.begin) it = prev;
    }
    while (it != runs_.end() && it->first <= iv.end) {
      iv.begin = std::min(iv.begin, it->first);
      iv.end = std::max(iv.end, it->second);
      it = runs_.erase(it);
    }
    runs_.emplace(iv.begin, iv.end);
  }

  void add(const IntervalSet& other) {
    for (const auto& iv : other) add(iv);
  }

  void subtract(const Interval& iv) {
    if (iv.empty()) return;
    auto it = runs_.upper_bound(iv.begin);
    if (it != runs_.begin()) {
      auto prev = std::prev(it);
      if (prev->second > iv.begin) it = prev;
    }
    std::vector<Interval> keep;
    while (it != runs_.end() && it->first < iv.end) {
      if (it->first < iv.begin) keep.push_back({it->first, iv.begin});
      if (it->second > iv.end) keep.push_back({iv.end, it->second});
      it = runs_.erase(it);
    }
    for (const auto& k : keep) runs_.emplace(k.begin, k.end);
  }

  void subtract(const IntervalSet& other) {
    for (const auto& iv : other) subtract(iv);
  }

  /// Portion of `iv` covered by this set.
  IntervalSet intersection(const Interval& iv) const {
    IntervalSet out;
    if (iv.empty()) return out;
    auto it = runs_.upper_bound(iv.begin);
    if (it != runs_.begin()) {
      auto prev = std::prev(it);
      if (prev->second > iv.begin) it = prev;
    }
    for (; it != runs_.end() && it->first < iv.end; ++it) {
      Interval part = intersect({it->first, it->second}, iv);
      if (!part.empty()) out.runs_.emplace(part.begin, part.end);
    }
    return out;
  }

  IntervalSet intersection(const IntervalSet& other) const {
    IntervalSet out;
    for (const auto& iv : other) out.add(intersection(iv));
    return out;
  }

  /// Portion of `iv` not covered by this set.
  IntervalSet complement_within(const Interval& iv) const {
    IntervalSet out(iv);
    out.subtract(intersection(iv));
    return out;
  }

  bool covers(const Interval& iv) const {
    if (iv.empty()) return true;
    auto it = runs_.upper_bound(iv.begin);
    if (it == runs_.begin()) return false;
    --it;
    return it->first <= iv.begin && it->second >= iv.end;
  }

  std::int64_t measure() const noexcept {
    std::int64_t total = 0;
    for (const auto& [b, e] : runs_) total += e - b;
    return total;
  }

  bool empty() const noexcept { return runs_.empty(); }
  std::size_t size() const noexcept { return runs_.size(); }
  void clear() noexcept { runs_.clear(); }

  std::vector<Interval> intervals() const {
    std::vector<Interval> out;
    out.reserve(runs_.size());
    for (const auto& [b, e] : runs_) out.push_back({b, e});
    return out;
  }

  class const_iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = Interval;
    using difference_type = std::ptrdiff_t;
    using pointer = void;
    using reference = Interval;

    const_iterator() = default;
    explicit const_iterator(std::map<std::int64_t, std::int64_t>::const_iterator it) : it_(it) {}
    Interval operator*() const { return {it_->first, it_->second}; }
    const_iterator& operator++() {
      ++it_;
      return *this;
    }
    const_iterator operator++(int) {
      auto tmp = *this;
      ++it_;
      return tmp;
    }
    friend bool operator==(const const_iterator&, const const_iterator&) = default;

   private:
    std::map<std::int64_t, std::int64_t>::const_iterator it_;
  };

  const_iterator begin() const { return const_iterator(runs_.begin()); }
  const_iterator end() const { return const_iterator(runs_.end()); }

  friend bool operator==(const IntervalSet&, const IntervalSet&) = default;

 private:
  std::map<std::int64_t, std::int64_t> runs_;  // begin -> end
};

inline std::ostream& operator<<(std::ostream& os, const IntervalSet& s) {
  os << '{';
  bool first = true;
  for (const auto& iv : s) {
    if (!first) os << ',';
    os << iv;
    first = false;
  }
  return os << '}';
}

}  // namespace dtnsim
