#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dtnsim/interval.hpp"

namespace dtnsim {

using Timestamp = double;  // wall-clock seconds since the trace epoch
using Bytes = std::uint64_t;

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct DataObject {
  std::string object_id;
  int instrument_type_id = 0;
  int location_id = 0;
  double data_rate = 1.0;  // bytes per second of observation time

  friend bool operator==(const DataObject&, const DataObject&) = default;
};

/// Transfer size of `length` seconds of an object's observation data.
inline Bytes bytes_for(double data_rate, std::int64_t length) {
  if (length <= 0) return 0;
  return static_cast<Bytes>(std::llround(data_rate * static_cast<double>(length)));
}

class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<DataObject> objects) {
    for (auto& o : objects) add(std::move(o));
  }

  void add(DataObject obj) {
    if (!(obj.data_rate > 0) || !std::isfinite(obj.data_rate))
      throw std::invalid_argument("data_rate must be positive for " + obj.object_id);
    if (index_.count(obj.object_id)) throw std::invalid_argument("duplicate object_id " + obj.object_id);
    if (!placements_.emplace(obj.instrument_type_id, obj.location_id).second)
      throw std::invalid_argument("duplicate (instrument, location) for " + obj.object_id);
    index_.emplace(obj.object_id, objects_.size());
    objects_.push_back(std::move(obj));
  }

  bool contains(std::string_view id) const { return index_.count(std::string(id)) != 0; }

  const DataObject& at(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) throw std::out_of_range("unknown object_id " + std::string(id));
    return objects_[it->second];
  }

  std::size_t index_of(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) throw std::out_of_range("unknown object_id " + std::string(id));
    return it->second;
  }

  const std::vector<DataObject>& objects() const noexcept { return objects_; }
  std::size_t size() const noexcept { return objects_.size(); }

  friend bool operator==(const Catalog& a, const Catalog& b) { return a.objects_ == b.objects_; }

 private:
  std::vector<DataObject> objects_;
  std::unordered_map<std::string, std::size_t> index_;
  std::set<std::pair<int, int>> placements_;
};

struct AccessRecord {
  Timestamp ts = 0;
  std::string user_id;
  std::string object_id;
  Interval tr;

  friend bool operator==(const AccessRecord&, const AccessRecord&) = default;
};

inline bool record_order(const AccessRecord& a, const AccessRecord& b) {
  if (a.ts != b.ts) return a.ts < b.ts;
  if (a.object_id != b.object_id) return a.object_id < b.object_id;
  if (a.tr.begin != b.tr.begin) return a.tr.begin < b.tr.begin;
  if (a.user_id != b.user_id) return a.user_id < b.user_id;
  return a.tr.end < b.tr.end;
}

inline void sort_records(std::vector<AccessRecord>& records) {
  std::stable_sort(records.begin(), records.end(), record_order);
}

struct RequestSequence {
  std::string user_id;
  std::vector<AccessRecord> records;
};

/// Splits a sorted trace into per-user sequences, ordered by user_id.
inline std::vector<RequestSequence> group_by_user(const std::vector<AccessRecord>& records) {
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<RequestSequence> out;
  for (const auto& r : records) {
    auto [it, inserted] = slot.emplace(r.user_id, out.size());
    if (inserted) out.push_back({r.user_id, {}});
    out[it->second].records.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.user_id < b.user_id; });
  for (auto& s : out) sort_records(s.records);
  return out;
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(delim, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view text, std::size_t line, const char* field) {
  text = trim(text);
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ParseError(std::string("bad ") + field + " '" + std::string(text) + "'", line);
  return value;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline std::vector<AccessRecord> parse_trace(std::istream& in, const Catalog& catalog) {
  std::vector<AccessRecord> out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = detail::trim(line);
    if (view.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (view.rfind("ts", 0) == 0) continue;
    }
    auto f = detail::split(view, ',');
    if (f.size() != 5) throw ParseError("expected 5 fields, got " + std::to_string(f.size()), lineno);
    AccessRecord r;
    r.ts = detail::parse_number<double>(f[0], lineno, "ts");
    if (!std::isfinite(r.ts) || r.ts < 0) throw ParseError("ts must be finite and non-negative", lineno);
    r.user_id = std::string(detail::trim(f[1]));
    r.object_id = std::string(detail::trim(f[2]));
    if (r.user_id.empty()) throw ParseError("empty user_id", lineno);
    r.tr.begin = detail::parse_number<std::int64_t>(f[3], lineno, "range_start");
    r.tr.end = detail::parse_number<std::int64_t>(f[4], lineno, "range_end");
    if (!r.tr.valid()) throw ParseError("range_end must exceed range_start", lineno);
    if (!catalog.contains(r.object_id)) throw ParseError("unknown object_id '" + r.object_id + "'", lineno);
    out.push_back(std::move(r));
  }
  sort_records(out);
  return out;
}

inline std::vector<AccessRecord> parse_trace(const std::string& path, const Catalog& catalog) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace " + path);
  return parse_trace(in, catalog);
}

inline void write_trace(std::ostream& out, const std::vector<AccessRecord>& records) {
  out << "ts,user_id,object_id,range_start,range_end\n";
  for (const auto& r : records)
    out << detail::format_double(r.ts) << ',' << r.user_id << ',' << r.object_id << ',' << r.tr.begin << ','
        << r.tr.end << '\n';
}

inline Catalog parse_catalog(std::istream& in) {
  Catalog cat;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = detail::trim(line);
    if (view.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (view.rfind("object_id", 0) == 0) continue;
    }
    auto f = detail::split(view, ',');
    if (f.size() != 4) throw ParseError("expected 4 fields, got " + std::to_string(f.size()), lineno);
    DataObject o;
    o.object_id = std::string(detail::trim(f[0]));
    o.instrument_type_id = detail::parse_number<int>(f[1], lineno, "instrument_type_id");
    o.location_id = detail::parse_number<int>(f[2], lineno, "location_id");
    o.data_rate = detail::parse_number<double>(f[3], lineno, "data_rate");
    try {
      cat.add(std::move(o));
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return cat;
}

inline Catalog parse_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open catalog " + path);
  return parse_catalog(in);
}

inline void write_catalog(std::ostream& out, const Catalog& catalog) {
  out << "object_id,instrument_type_id,location_id,data_rate\n";
  for (const auto& o : catalog.objects())
    out << o.object_id << ',' << o.instrument_type_id << ',' << o.location_id << ','
        << detail::format_double(o.data_rate) << '\n';
}

/// Compresses (factor > 1) or stretches (factor < 1) request arrivals around the
/// first timestamp. Observation ranges are left untouched.
inline std::vector<AccessRecord> scale_traffic(std::vector<AccessRecord> records, double factor) {
  if (!(factor > 0) || !std::isfinite(factor)) throw std::invalid_argument("traffic factor must be positive");
  if (records.empty() || factor == 1.0) return records;
  const Timestamp t0 = records.front().ts;
  for (auto& r : records) r.ts = t0 + (r.ts - t0) / factor;
  return records;
}

inline Bytes request_bytes(const AccessRecord& r, const Catalog& catalog) {
  return bytes_for(catalog.at(r.object_id).data_rate, r.tr.length());
}

}  // namespace dtnsim
