#pragma once

// Per-member score table and per-band aggregates, written as CSV and JSON.

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "misr/member.hpp"

namespace misr {

struct ScoreRow {
  std::string member_id;
  Band band = Band::Red;
  double baseline = 0.0;
  double network = 0.0;

  bool network_wins() const { return network > baseline; }
  std::string winner() const { return network_wins() ? "network" : "bicubic"; }
};

struct ScoreAggregate {
  std::string band;  // "RED", "NIR" or "ALL"
  double avg_baseline = 0.0;
  double avg_network = 0.0;
  std::size_t n_images = 0;
  std::size_t n_network_wins = 0;
};

struct ScoreReport {
  std::vector<ScoreRow> rows;

  /// One aggregate per band present, in band order, followed by "ALL".
  std::vector<ScoreAggregate> aggregates() const {
    std::vector<ScoreAggregate> out;
    const auto summarize = [this](const std::string& name, auto&& keep) {
      ScoreAggregate a;
      a.band = name;
      for (const auto& r : rows) {
        if (!keep(r)) continue;
        a.avg_baseline += r.baseline;
        a.avg_network += r.network;
        ++a.n_images;
        a.n_network_wins += r.network_wins() ? 1 : 0;
      }
      if (a.n_images > 0) {
        a.avg_baseline /= static_cast<double>(a.n_images);
        a.avg_network /= static_cast<double>(a.n_images);
      }
      return a;
    };
    for (Band b : {Band::Red, Band::Nir}) {
      auto a = summarize(std::string(to_string(b)), [b](const ScoreRow& r) { return r.band == b; });
      if (a.n_images > 0) out.push_back(a);
    }
    out.push_back(summarize("ALL", [](const ScoreRow&) { return true; }));
    return out;
  }
};

namespace detail {

// Shortest text that reads back to the same double.
inline std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_rows_csv(std::ostream& out, const ScoreReport& report) {
  out << "member,band,cpsnr_bicubic,cpsnr_network,winner\n";
  for (const auto& r : report.rows) {
    out << r.member_id << ',' << to_string(r.band) << ',' << detail::exact(r.baseline) << ','
        << detail::exact(r.network) << ',' << r.winner() << '\n';
  }
}

inline void write_aggregates_csv(std::ostream& out, const ScoreReport& report) {
  out << "band,avg_cpsnr_bicubic,avg_cpsnr_network,n_images,n_network_wins\n";
  for (const auto& a : report.aggregates()) {
    out << a.band << ',' << detail::exact(a.avg_baseline) << ',' << detail::exact(a.avg_network) << ','
        << a.n_images << ',' << a.n_network_wins << '\n';
  }
}

inline nlohmann::json to_json(const ScoreReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"member", r.member_id},
                    {"band", to_string(r.band)},
                    {"cpsnr_bicubic", r.baseline},
                    {"cpsnr_network", r.network},
                    {"winner", r.winner()}});
  }
  nlohmann::json aggs = nlohmann::json::array();
  for (const auto& a : report.aggregates()) {
    aggs.push_back({{"band", a.band},
                    {"avg_cpsnr_bicubic", a.avg_baseline},
                    {"avg_cpsnr_network", a.avg_network},
                    {"n_images", a.n_images},
                    {"n_network_wins", a.n_network_wins}});
  }
  return {{"rows", std::move(rows)}, {"aggregates", std::move(aggs)}};
}

}  // namespace misr
