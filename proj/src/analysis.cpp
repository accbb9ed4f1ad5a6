#include "driveval/analysis.hpp"

#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "driveval/serialization.hpp"

namespace driveval {
namespace {

bool is_offline_metric(std::string_view m) {
  return std::find(kOfflineMetrics.begin(), kOfflineMetrics.end(), m) != kOfflineMetrics.end();
}

double axis_value(const StudyRecord& r, const std::string& metric, const std::string& source) {
  return is_offline_metric(metric) ? r.offline_value(metric, source) : r.online_value(metric, source);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

double StudyRecord::offline_value(std::string_view metric, const std::string& variant) const {
  auto it = offline.find(variant);
  if (it == offline.end()) {
    throw Error(ErrorKind::MissingMetric, model_id + " has no offline report for " + variant);
  }
  return it->second.value(metric);
}

double StudyRecord::online_value(std::string_view metric, const std::string& town) const {
  auto it = online.find(town);
  if (it == online.end()) {
    throw Error(ErrorKind::MissingMetric, model_id + " has no online report for town " + town);
  }
  return it->second.value(metric);
}

std::string variant_key(TownId town, int cameras, bool noise) {
  return std::string(to_string(town)) + "/" + std::to_string(cameras) + "cam" + (noise ? "+noise" : "");
}

std::vector<StudyRecord> filter_best(const std::vector<StudyRecord>& records, std::string_view metric,
                                     const std::string& variant, double keep_fraction) {
  if (records.empty()) throw Error(ErrorKind::Empty, "no records to filter");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "keep fraction must lie in (0, 1]");
  }
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    scored.emplace_back(records[i].offline_value(metric, variant), i);
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return records[a.second].model_id < records[b.second].model_id;
  });
  const auto keep = static_cast<std::size_t>(
      std::ceil(keep_fraction * static_cast<double>(records.size()) - 1e-9));
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < keep; ++k) kept.push_back(scored[k].second);
  std::sort(kept.begin(), kept.end());
  std::vector<StudyRecord> out;
  out.reserve(kept.size());
  for (std::size_t i : kept) out.push_back(records[i]);
  return out;
}

std::optional<CorrelationEntry> CorrelationReport::find(std::string_view x_metric,
                                                        std::string_view x_source,
                                                        std::string_view y_metric,
                                                        std::string_view town) const {
  for (const auto& e : entries) {
    if (e.x_metric == x_metric && e.x_source == x_source && e.y_metric == y_metric && e.town == town) {
      return e;
    }
  }
  return std::nullopt;
}

CorrelationReport correlate_study(const std::vector<StudyRecord>& records,
                                  const std::optional<FilterSpec>& filter) {
  CorrelationReport report;
  report.filter = filter;
  std::set<std::string> variants;
  std::set<std::string> towns;
  for (const auto& r : records) {
    for (const auto& [k, v] : r.offline) variants.insert(k);
    for (const auto& [k, v] : r.online) towns.insert(k);
  }

  auto correlate = [&](const std::vector<StudyRecord>& subset, CorrelationEntry entry) {
    const std::string key = entry.x_metric + "@" + entry.x_source + " vs " + entry.y_metric + "@" + entry.town;
    try {
      Eigen::VectorXd x(static_cast<Eigen::Index>(subset.size()));
      Eigen::VectorXd y(static_cast<Eigen::Index>(subset.size()));
      for (std::size_t i = 0; i < subset.size(); ++i) {
        x[static_cast<Eigen::Index>(i)] = axis_value(subset[i], entry.x_metric, entry.x_source);
        y[static_cast<Eigen::Index>(i)] = axis_value(subset[i], entry.y_metric, entry.town);
      }
      entry.r = pearson(x, y);
      entry.n = subset.size();
      report.entries.push_back(entry);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::MissingMetric) throw;
      report.warnings.push_back({key, e.what()});
    }
  };

  for (const auto& metric : kOfflineMetrics) {
    for (const auto& variant : variants) {
      std::vector<StudyRecord> subset = records;
      if (filter && !records.empty()) {
        const std::string by = filter->metric.empty() ? std::string(metric) : filter->metric;
        subset = filter_best(records, by, variant, filter->keep_fraction);
      }
      for (const auto& online : kOnlineMetrics) {
        for (const auto& town : towns) {
          correlate(subset, {"offline_online", std::string(metric), variant, std::string(online), town, 0.0, 0});
        }
      }
    }
  }
  for (const auto& town : towns) {
    for (std::size_t a = 0; a < kOnlineMetrics.size(); ++a) {
      for (std::size_t b = a + 1; b < kOnlineMetrics.size(); ++b) {
        correlate(records, {"online_online", std::string(kOnlineMetrics[a]), town,
                            std::string(kOnlineMetrics[b]), town, 0.0, 0});
      }
    }
  }
  auto key = [](const CorrelationEntry& e) {
    return std::tie(e.kind, e.x_metric, e.x_source, e.y_metric, e.town);
  };
  std::sort(report.entries.begin(), report.entries.end(),
            [&](const auto& a, const auto& b) { return key(a) < key(b); });
  std::sort(report.warnings.begin(), report.warnings.end(),
            [](const auto& a, const auto& b) { return a.pair < b.pair; });
  return report;
}

std::vector<ModelGroup> group_by_axis(const std::vector<StudyRecord>& records) {
  std::vector<ModelGroup> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const auto& g : records[i].groups) {
      auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& x) { return x.name == g; });
      if (it == groups.end()) {
        groups.push_back({g, {i}});
      } else {
        it->members.push_back(i);
      }
    }
  }
  return groups;
}

SelectionResult selection_consistency(const std::vector<StudyRecord>& records,
                                      const std::vector<ModelGroup>& groups,
                                      std::string_view offline_metric, const std::string& variant,
                                      const std::string& town) {
  SelectionResult result;
  for (const auto& g : groups) {
    if (g.members.empty()) throw Error(ErrorKind::EmptyGroup, "group " + g.name + " is empty");
    if (g.members.size() < 2) {
      throw Error(ErrorKind::InvalidArgument, "group " + g.name + " needs at least two models");
    }
    double best_offline = std::numeric_limits<double>::infinity();
    double best_online = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> offline_winners;
    std::vector<std::size_t> online_winners;
    for (std::size_t i : g.members) {
      const double off = records.at(i).offline_value(offline_metric, variant);
      const double on = records.at(i).online_value("success_rate", town);
      if (off < best_offline) {
        best_offline = off;
        offline_winners = {i};
      } else if (off == best_offline) {
        offline_winners.push_back(i);
      }
      if (on > best_online) {
        best_online = on;
        online_winners = {i};
      } else if (on == best_online) {
        online_winners.push_back(i);
      }
    }
    const bool match = offline_winners.size() == 1 && online_winners.size() == 1 &&
                       offline_winners[0] == online_winners[0];
    result.per_group.push_back(match);
    result.matches += match ? 1 : 0;
    ++result.groups;
  }
  return result;
}

void emit_scatter(const std::vector<StudyRecord>& records, const ScatterPair& pair,
                  const std::filesystem::path& stem) {
  std::vector<double> xs, ys;
  for (const auto& r : records) {
    xs.push_back(axis_value(r, pair.x_metric, pair.x_source));
    ys.push_back(axis_value(r, pair.y_metric, pair.town));
  }

  std::ostringstream csv;
  csv << "model_id,x,y,marker_size\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    csv << records[i].model_id << ',' << format_double(xs[i]) << ',' << format_double(ys[i]) << ','
        << records[i].size_rank << '\n';
  }

  std::string r_text = "r = n/a";
  if (xs.size() >= 2) {
    try {
      const Eigen::Map<const Eigen::VectorXd> x(xs.data(), static_cast<Eigen::Index>(xs.size()));
      const Eigen::Map<const Eigen::VectorXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
      r_text = "r = " + fixed(pearson(x, y), 3);
    } catch (const Error&) {
    }
  }

  constexpr double kWidth = 480, kHeight = 360, kMargin = 50;
  auto range = [](const std::vector<double>& v) {
    if (v.empty()) return std::pair<double, double>{0.0, 1.0};
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    double a = *lo, b = *hi;
    if (a == b) {
      a -= 0.5;
      b += 0.5;
    }
    const double pad = 0.05 * (b - a);
    return std::pair<double, double>{a - pad, b + pad};
  };
  const auto [x0, x1] = range(xs);
  const auto [y0, y1] = range(ys);
  auto px = [&](double x) { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); };
  auto py = [&](double y) { return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "  <rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n"
      << "  <line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin
      << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n"
      << "  <line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
      << kHeight - kMargin << "\" stroke=\"black\"/>\n"
      << "  <text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << xml_escape(pair.x_metric + " (" + pair.x_source + ")") << "</text>\n"
      << "  <text x=\"14\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
      << kHeight / 2 << ")\">" << xml_escape(pair.y_metric + " (town " + pair.town + ")") << "</text>\n"
      << "  <text x=\"" << kWidth - kMargin << "\" y=\"" << kMargin - 12
      << "\" text-anchor=\"end\" font-size=\"14\">" << r_text << "</text>\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    svg << "  <circle cx=\"" << fixed(px(xs[i]), 2) << "\" cy=\"" << fixed(py(ys[i]), 2) << "\" r=\""
        << fixed(3.0 + 2.0 * records[i].size_rank, 1)
        << "\" fill=\"steelblue\" fill-opacity=\"0.5\" stroke=\"navy\"><title>"
        << xml_escape(records[i].model_id) << "</title></circle>\n";
  }
  svg << "</svg>\n";

  std::filesystem::path csv_path = stem;
  csv_path += ".csv";
  std::filesystem::path svg_path = stem;
  svg_path += ".svg";
  write_text_file(csv_path, csv.str());
  write_text_file(svg_path, svg.str());
}

}  // namespace driveval
