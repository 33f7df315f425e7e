#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "amod/common.hpp"
#include "amod/network.hpp"

namespace amod::sim {

/// A trip request in projected meters; `time` in seconds.
struct Request {
  double time = 0.0;
  GeoPoint origin;
  GeoPoint destination;

  bool operator==(const Request&) const = default;
};

/// A trip as read from disk, still in degrees.
struct TripRecord {
  double time = 0.0;
  double o_lon = 0.0, o_lat = 0.0;
  double d_lon = 0.0, d_lat = 0.0;

  bool operator==(const TripRecord&) const = default;
};

enum class TripFormat { GenericCsv, Cabtrace };

inline void sort_by_time(std::vector<Request>& r) {
  std::stable_sort(r.begin(), r.end(), [](const Request& a, const Request& b) { return a.time < b.time; });
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, bool comma) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  if (comma) {
    while (true) {
      const std::size_t j = line.find(',', i);
      std::string_view f = line.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i);
      while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
      while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
      out.push_back(f);
      if (j == std::string_view::npos) break;
      i = j + 1;
    }
    return out;
  }
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool to_double(std::string_view s, double& v) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size() && std::isfinite(v);
}

inline bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

}  // namespace detail

/// Generic CSV: `epoch_seconds,o_lon,o_lat,d_lon,d_lat` per line. A first
/// line whose leading field is not a number is taken as a header; blank
/// lines and `#` comments are skipped. Output is sorted by time (stable).
inline std::vector<TripRecord> parse_generic_csv(std::istream& in, const std::string& source = "<stream>") {
  std::vector<TripRecord> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (detail::blank(line) || line.front() == '#') continue;
    const auto f = detail::split_fields(line, true);
    double v[5];
    bool ok = f.size() == 5;
    for (std::size_t c = 0; ok && c < 5; ++c) ok = detail::to_double(f[c], v[c]);
    if (!ok) {
      double probe;
      if (out.empty() && no == 1 && !f.empty() && !detail::to_double(f[0], probe)) continue;  // header
      throw InvalidInput(source + ":" + std::to_string(no) + ": expected 5 numeric fields");
    }
    out.push_back({v[0], v[1], v[2], v[3], v[4]});
  }
  std::stable_sort(out.begin(), out.end(), [](const TripRecord& a, const TripRecord& b) { return a.time < b.time; });
  return out;
}

/// One cab's trace: lines `lat lon occupied epoch` in any order. Each 0 -> 1
/// occupancy change starts a trip at that sample, the next 1 -> 0 change ends
/// it at that sample. A trace that starts or ends occupied drops the
/// incomplete trip.
inline std::vector<TripRecord> parse_cabtrace(std::istream& in, const std::string& source = "<stream>") {
  struct Sample {
    double t, lat, lon;
    bool occupied;
  };
  std::vector<Sample> s;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (detail::blank(line) || line.front() == '#') continue;
    const auto f = detail::split_fields(line, false);
    double lat, lon, occ, t;
    if (f.size() != 4 || !detail::to_double(f[0], lat) || !detail::to_double(f[1], lon) ||
        !detail::to_double(f[2], occ) || !detail::to_double(f[3], t) || (occ != 0.0 && occ != 1.0))
      throw InvalidInput(source + ":" + std::to_string(no) + ": expected `lat lon occupancy(0|1) epoch`");
    s.push_back({t, lat, lon, occ == 1.0});
  }
  std::stable_sort(s.begin(), s.end(), [](const Sample& a, const Sample& b) { return a.t < b.t; });
  std::vector<TripRecord> out;
  const Sample* pickup = nullptr;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!s[i - 1].occupied && s[i].occupied) pickup = &s[i];
    if (s[i - 1].occupied && !s[i].occupied && pickup) {
      out.push_back({pickup->t, pickup->lon, pickup->lat, s[i].lon, s[i].lat});
      pickup = nullptr;
    }
  }
  return out;
}

/// Reads trips from a file (or, for cabtraces, every `*.txt` file of a
/// directory, one cab per file). Sorted by time; an empty result is an error.
inline std::vector<TripRecord> ingest_trips(const std::filesystem::path& path, TripFormat format) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  std::error_code ec;
  if (format == TripFormat::Cabtrace && fs::is_directory(path, ec)) {
    for (const auto& e : fs::directory_iterator(path, ec))
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  std::vector<TripRecord> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw IoError("cannot open " + f.string());
    auto part = format == TripFormat::GenericCsv ? parse_generic_csv(in, f.string()) : parse_cabtrace(in, f.string());
    out.insert(out.end(), part.begin(), part.end());
  }
  if (out.empty()) throw InvalidInput("no trips in " + path.string());
  std::stable_sort(out.begin(), out.end(), [](const TripRecord& a, const TripRecord& b) { return a.time < b.time; });
  return out;
}

/// Projection centered on the mean of all trip endpoints.
inline Projection centered_projection(const std::vector<TripRecord>& trips) {
  if (trips.empty()) return {};
  double lat = 0.0, lon = 0.0;
  for (const auto& t : trips) {
    lat += t.o_lat + t.d_lat;
    lon += t.o_lon + t.d_lon;
  }
  const double n = 2.0 * static_cast<double>(trips.size());
  return {lat / n, lon / n};
}

inline std::vector<Request> project_trips(const std::vector<TripRecord>& trips, const Projection& proj) {
  std::vector<Request> out;
  out.reserve(trips.size());
  for (const auto& t : trips) out.push_back({t.time, proj.project(t.o_lon, t.o_lat), proj.project(t.d_lon, t.d_lat)});
  return out;
}

}  // namespace amod::sim
