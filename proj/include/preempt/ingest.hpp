#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "preempt/ecdf.hpp"

namespace preempt {

/// One observed preemption event.
struct LifetimeRecord {
  std::string vm_type;   // e.g. "n1-highcpu-16"
  std::string zone;      // e.g. "us-east1-b"
  std::int64_t launch_epoch;  // seconds since the UNIX epoch, UTC
  double lifetime_hours;
  std::string workload_tag;  // "idle" or a workload name
  std::optional<int> cohort_size;  // VMs launched simultaneously, when known

  bool operator==(const LifetimeRecord&) const = default;
};

struct RowError {
  std::size_t line;  // 1-based, header is line 1
  std::string message;
};

struct ParseResult {
  std::vector<LifetimeRecord> records;  // input order preserved
  std::vector<RowError> errors;
};

/// Maps our canonical column names to the names used by a foreign CSV.
using ColumnMapping = std::map<std::string, std::string>;

// Small slack over the 24h bound for clock skew in collected data.
constexpr double kMaxLifetimeHours = 24.5;

inline std::optional<std::int64_t> parse_utc_timestamp(std::string_view text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  const std::string buf(text);
  char tail[8] = {0};
  const int got = std::sscanf(buf.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%7s", &y, &mo, &d, &h, &mi, &s, tail);
  if (got < 6) return std::nullopt;
  const std::string_view rest(tail);
  if (!rest.empty() && rest != "Z" && rest != "+00:00") return std::nullopt;
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch();
  return duration_cast<seconds>(days).count() + h * 3600 + mi * 60 + s;
}

inline std::string format_utc_timestamp(std::int64_t epoch) {
  using namespace std::chrono;
  const sys_days days{floor<std::chrono::days>(seconds{epoch})};
  const year_month_day ymd{days};
  std::int64_t rem = epoch - duration_cast<seconds>(days.time_since_epoch()).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), int(rem / 3600),
                int(rem / 60 % 60), int(rem % 60));
  return buf;
}

namespace detail {

enum class DstRule { none, us, eu };

struct ZoneOffset {
  std::string_view prefix;
  int standard_minutes;
  DstRule rule;
};

// Static region -> UTC offset table; daylight saving is applied by the offset
// at the launch date.
inline constexpr ZoneOffset kZoneOffsets[] = {
    {"us-central1", -360, DstRule::us},   {"us-east1", -300, DstRule::us},
    {"us-east4", -300, DstRule::us},      {"us-west1", -480, DstRule::us},
    {"us-west2", -480, DstRule::us},      {"northamerica-northeast1", -300, DstRule::us},
    {"southamerica-east1", -180, DstRule::none},
    {"europe-west1", 60, DstRule::eu},    {"europe-west2", 0, DstRule::eu},
    {"europe-west3", 60, DstRule::eu},    {"europe-west4", 60, DstRule::eu},
    {"europe-north1", 120, DstRule::eu},  {"asia-east1", 480, DstRule::none},
    {"asia-east2", 480, DstRule::none},   {"asia-northeast1", 540, DstRule::none},
    {"asia-south1", 330, DstRule::none},  {"asia-southeast1", 480, DstRule::none},
};

inline bool dst_in_effect(DstRule rule, std::int64_t local_epoch) {
  if (rule == DstRule::none) return false;
  using namespace std::chrono;
  const sys_days day{floor<std::chrono::days>(seconds{local_epoch})};
  const year_month_day ymd{day};
  const auto y = ymd.year();
  sys_days begin, end;
  if (rule == DstRule::us) {
    begin = sys_days{y / March / Sunday[2]};
    end = sys_days{y / November / Sunday[1]};
  } else {
    begin = sys_days{y / March / Sunday[std::chrono::last]};
    end = sys_days{y / October / Sunday[std::chrono::last]};
  }
  return day >= begin && day < end;
}

}  // namespace detail

/// UTC offset (minutes) of a zone's local clock at the given instant.
/// Unknown zones fall back to UTC.
inline int zone_utc_offset_minutes(std::string_view zone, std::int64_t epoch) {
  for (const auto& z : detail::kZoneOffsets) {
    if (zone.substr(0, z.prefix.size()) == z.prefix) {
      const std::int64_t local = epoch + z.standard_minutes * 60;
      return z.standard_minutes + (detail::dst_in_effect(z.rule, local) ? 60 : 0);
    }
  }
  return 0;
}

enum class TimeOfDay { day, night };  // local 08:00-20:00 vs 20:00-08:00

inline TimeOfDay local_time_of_day(const LifetimeRecord& r) {
  const std::int64_t local = r.launch_epoch + 60 * zone_utc_offset_minutes(r.zone, r.launch_epoch);
  const int hour = static_cast<int>(((local % 86400) + 86400) % 86400 / 3600);
  return hour >= 8 && hour < 20 ? TimeOfDay::day : TimeOfDay::night;
}

/// Local day of week, 0 = Sunday .. 6 = Saturday.
inline int local_day_of_week(const LifetimeRecord& r) {
  using namespace std::chrono;
  const std::int64_t local = r.launch_epoch + 60 * zone_utc_offset_minutes(r.zone, r.launch_epoch);
  const sys_days day{floor<std::chrono::days>(seconds{local})};
  return static_cast<int>(weekday{day}.c_encoding());
}

/// Conjunctive record filter; unset fields match everything.
struct CohortFilter {
  std::optional<std::string> vm_type;
  std::optional<std::string> zone;
  std::optional<std::string> workload_tag;
  std::optional<TimeOfDay> time_of_day;
  std::optional<std::set<int>> days_of_week;  // 0 = Sunday .. 6 = Saturday
};

inline bool matches(const CohortFilter& f, const LifetimeRecord& r) {
  if (f.vm_type && *f.vm_type != r.vm_type) return false;
  if (f.zone && *f.zone != r.zone) return false;
  if (f.workload_tag && *f.workload_tag != r.workload_tag) return false;
  if (f.time_of_day && *f.time_of_day != local_time_of_day(r)) return false;
  if (f.days_of_week && !f.days_of_week->count(local_day_of_week(r))) return false;
  return true;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline const std::vector<std::string>& canonical_columns() {
  static const std::vector<std::string> cols{"vm_type", "zone", "launch_timestamp",
                                             "lifetime_hours", "workload_tag", "cohort_size"};
  return cols;
}

/// Parse a preemption dataset. Each row yields either a record or a
/// line-numbered error; a bad row never aborts the rest of the file.
/// `mapping` renames canonical columns to the file's header names.
inline ParseResult parse_dataset(std::istream& in, const ColumnMapping* mapping = nullptr) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset is empty: missing header");
  const auto header = detail::split_csv_line(line);

  std::vector<int> order;  // canonical column index -> file column index
  for (const auto& want : canonical_columns()) {
    std::string name = want;
    if (mapping) {
      if (const auto it = mapping->find(want); it != mapping->end()) name = it->second;
    }
    int idx = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) idx = static_cast<int>(i);
    }
    if (idx < 0 && want != "cohort_size") {
      throw std::invalid_argument("dataset header is missing column '" + name + "'");
    }
    order.push_back(idx);
  }

  ParseResult out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    auto field = [&](int canonical) -> std::optional<std::string> {
      const int idx = order[canonical];
      if (idx < 0 || idx >= static_cast<int>(fields.size())) return std::nullopt;
      return fields[idx];
    };
    auto fail = [&](const std::string& msg) { out.errors.push_back({line_no, msg}); };

    const auto vm_type = field(0), zone = field(1), stamp = field(2), life = field(3),
               tag = field(4), cohort = field(5);
    if (!vm_type || !zone || !stamp || !life || !tag) {
      fail("row has too few fields");
      continue;
    }
    if (vm_type->empty() || zone->empty()) {
      fail("vm_type and zone must be non-empty");
      continue;
    }
    const auto epoch = parse_utc_timestamp(*stamp);
    if (!epoch) {
      fail("unparseable launch_timestamp '" + *stamp + "'");
      continue;
    }
    double hours = 0.0;
    try {
      std::size_t used = 0;
      hours = std::stod(*life, &used);
      if (used != life->size()) throw std::invalid_argument("");
    } catch (...) {
      fail("unparseable lifetime_hours '" + *life + "'");
      continue;
    }
    if (!(hours > 0.0) || hours > kMaxLifetimeHours) {
      fail("lifetime_hours out of range (0, 24.5]: " + *life);
      continue;
    }
    std::optional<int> cohort_size;
    if (cohort && !cohort->empty()) {
      try {
        std::size_t used = 0;
        const int n = std::stoi(*cohort, &used);
        if (used != cohort->size() || n < 1) throw std::invalid_argument("");
        cohort_size = n;
      } catch (...) {
        fail("unparseable cohort_size '" + *cohort + "'");
        continue;
      }
    }
    out.records.push_back({*vm_type, *zone, *epoch, hours, *tag, cohort_size});
  }
  return out;
}

inline ParseResult parse_dataset_file(const std::string& path, const ColumnMapping* mapping = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open dataset file: " + path);
  return parse_dataset(in, mapping);
}

inline void write_dataset(std::ostream& out, const std::vector<LifetimeRecord>& records) {
  out << "vm_type,zone,launch_timestamp,lifetime_hours,workload_tag,cohort_size\n";
  char buf[32];
  for (const auto& r : records) {
    // Shortest representation that round-trips the double exactly.
    const auto res = std::to_chars(buf, buf + sizeof buf, r.lifetime_hours);
    out << r.vm_type << ',' << r.zone << ',' << format_utc_timestamp(r.launch_epoch) << ','
        << std::string_view(buf, res.ptr - buf) << ',' << r.workload_tag << ',';
    if (r.cohort_size) out << *r.cohort_size;
    out << '\n';
  }
}

/// Empirical CDF over the lifetimes of the records matching the filter.
inline EmpiricalCdf group_and_build(const std::vector<LifetimeRecord>& records,
                                    const CohortFilter& filter) {
  std::vector<double> lifetimes;
  for (const auto& r : records) {
    if (matches(filter, r)) lifetimes.push_back(r.lifetime_hours);
  }
  if (lifetimes.empty()) throw std::runtime_error("no records match the cohort filter");
  return EmpiricalCdf(std::move(lifetimes));
}

}  // namespace preempt
