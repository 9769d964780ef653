#include "nellcom/plots.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "nellcom/errors.hpp"
#include "nellcom/svg.hpp"

namespace nellcom {

namespace fs = std::filesystem;

namespace {

struct SeriesPoint {
  int epoch;
  double mean;
  double sd;
};

std::vector<SeriesPoint> series(const AggregateResult& agg, const std::string& phase,
                                const std::string& metric) {
  std::vector<SeriesPoint> out;
  for (const auto& [ph, epoch] : agg.epochs) {
    if (ph != phase) continue;
    const auto& per_metric = agg.stats.at(ph).at(epoch);
    const auto it = per_metric.find(metric);  // not every metric exists in every phase
    if (it == per_metric.end() || std::isnan(it->second.mean)) continue;
    out.push_back({epoch, it->second.mean, it->second.sd});
  }
  return out;
}

void draw_series(SvgCanvas& svg, const PlotArea& area, const std::vector<SeriesPoint>& pts,
                 const std::string& color) {
  if (pts.empty()) return;
  std::vector<std::pair<double, double>> band;
  band.reserve(pts.size() * 2);
  for (const SeriesPoint& p : pts) band.emplace_back(area.x(p.epoch), area.y(p.mean + p.sd));
  for (size_t i = pts.size(); i-- > 0;)
    band.emplace_back(area.x(pts[i].epoch), area.y(pts[i].mean - pts[i].sd));
  svg.polygon(band, color, 0.15);
  std::vector<std::pair<double, double>> line;
  line.reserve(pts.size());
  for (const SeriesPoint& p : pts) line.emplace_back(area.x(p.epoch), area.y(p.mean));
  svg.polyline(line, color, 1.6);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write plot '" + path.string() + "'");
  out << content;
}

const char* grammar_color(const std::string& grammar) {
  if (grammar == "fix+op") return "#1f77b4";
  if (grammar == "flex+op") return "#d62728";
  return "#2ca02c";
}

}  // namespace

void plot_timelines(const AggregateResult& agg, const fs::path& out_svg) {
  struct PanelSpec {
    std::string title;
    std::vector<std::pair<std::string, std::string>> metrics;  // metric, color
    bool marking_reference;
  };
  const std::vector<PanelSpec> rows = {
      {"accuracy",
       {{"listening_accuracy", "#1f77b4"},
        {"speaking_accuracy_permissive", "#2ca02c"},
        {"reconstruction_accuracy", "#d62728"}},
       false},
      {"order", {{"prop_sov", "#1f4e79"}, {"prop_osv", "#a03123"}, {"prop_other", "#888888"}}, false},
      {"marking", {{"prop_with_mk", "#6a3d9a"}, {"prop_no_mk", "#b2a066"}}, true},
      {"conditional marking", {{"cond_mark_sov", "#1f4e79"}, {"cond_mark_osv", "#a03123"}}, true},
  };
  const std::vector<std::string> phases = {"sl", "rl"};

  const double panel_w = 330, panel_h = 170, margin_l = 60, margin_t = 48, gap_x = 48,
               gap_y = 48;
  SvgCanvas svg(margin_l + 2 * panel_w + gap_x + 30,
                margin_t + rows.size() * (panel_h + gap_y));
  svg.text(margin_l, 22, agg.grammar + "  (mean over " + std::to_string(agg.n_runs) +
                             " seeds, shaded: +/- sd)",
           14, "start");

  std::ostringstream table;
  table << "phase,epoch,metric,mean,sd\n";

  for (size_t row = 0; row < rows.size(); ++row) {
    for (size_t col = 0; col < phases.size(); ++col) {
      const std::string& phase = phases[col];
      int max_epoch = 1;
      for (const auto& [ph, ep] : agg.epochs)
        if (ph == phase) max_epoch = std::max(max_epoch, ep);
      PlotArea area{margin_l + col * (panel_w + gap_x), margin_t + row * (panel_h + gap_y),
                    panel_w, panel_h, 0.0, static_cast<double>(max_epoch), 0.0, 1.0};
      draw_axes(svg, area, phase + " epoch", rows[row].title, 6, 4);
      if (rows[row].marking_reference) {
        svg.line(area.x(0), area.y(2.0 / 3.0), area.x(max_epoch), area.y(2.0 / 3.0), "#999999",
                 1.0, "4,4");
      }
      double legend_y = area.py + 4;
      for (const auto& [metric, color] : rows[row].metrics) {
        const auto pts = series(agg, phase, metric);
        if (pts.empty()) continue;
        draw_series(svg, area, pts, color);
        svg.line(area.px + panel_w - 86, legend_y + 4, area.px + panel_w - 72, legend_y + 4,
                 color, 2.0);
        svg.text(area.px + panel_w - 68, legend_y + 7, metric, 8, "start");
        legend_y += 12;
        for (const SeriesPoint& p : pts)
          table << phase << ',' << p.epoch << ',' << metric << ',' << format_double(p.mean)
                << ',' << format_double(p.sd) << '\n';
      }
    }
  }
  svg.comment(table.str());
  write_file(out_svg, svg.finish());
}

void plot_individuals(const std::vector<RunArtifacts>& runs, const fs::path& out_svg) {
  if (runs.empty()) throw DataError("plot_individuals: no runs");
  // Stack order and palette: dark/light blue for SOV with/without marker,
  // dark/light red for OSV, grey for unclassified.
  const std::array<size_t, 5> stack_order = {1, 0, 3, 2, 4};  // sov_mk, sov_no, osv_mk, osv_no, other
  const std::array<const char*, 5> color_of = {"#9dc3e6", "#1f4e79", "#f4b8b0", "#a03123",
                                               "#bbbbbb"};

  const size_t cols = 5;
  const size_t rows = (runs.size() + cols - 1) / cols;
  const double panel_w = 170, panel_h = 110, margin_l = 50, margin_t = 50, gap = 34;
  SvgCanvas svg(margin_l + cols * (panel_w + gap), margin_t + rows * (panel_h + gap) + 20);
  svg.text(margin_l, 22,
           runs.front().config.grammar + "  per-seed production shares across communication",
           14, "start");

  std::ostringstream table;
  table << "seed,epoch,sov_no_mk,sov_mk,osv_no_mk,osv_mk,other\n";

  for (size_t idx = 0; idx < runs.size(); ++idx) {
    const RunArtifacts& run = runs[idx];
    std::vector<const EpochRecord*> recs;
    for (const EpochRecord& r : run.trajectory.records)
      if (r.phase == "rl" && r.has_counts) recs.push_back(&r);
    if (recs.empty()) throw DataError("plot_individuals: no communication records in '" +
                                      run.dir.string() + "'");

    const size_t row = idx / cols, col = idx % cols;
    PlotArea area{margin_l + col * (panel_w + gap), margin_t + row * (panel_h + gap), panel_w,
                  panel_h, static_cast<double>(recs.front()->epoch),
                  static_cast<double>(recs.back()->epoch), 0.0, 1.0};
    const int seed_index = run.summary.value("seed_index", static_cast<int>(idx));
    svg.text(area.px + panel_w / 2, area.py - 5, "seed " + std::to_string(seed_index), 10,
             "middle");

    // Cumulative shares bottom-up, one band per class.
    std::vector<double> base(recs.size(), 0.0);
    for (size_t cls_pos = 0; cls_pos < stack_order.size(); ++cls_pos) {
      const size_t cls = stack_order[cls_pos];
      std::vector<std::pair<double, double>> poly;
      poly.reserve(recs.size() * 2);
      std::vector<double> top(recs.size());
      for (size_t i = 0; i < recs.size(); ++i) {
        double total = 0.0;
        for (size_t c = 0; c < 5; ++c) total += static_cast<double>(recs[i]->counts[c]);
        const double share =
            total > 0 ? static_cast<double>(recs[i]->counts[cls]) / total : 0.0;
        top[i] = base[i] + share;
        poly.emplace_back(area.x(recs[i]->epoch), area.y(top[i]));
      }
      for (size_t i = recs.size(); i-- > 0;)
        poly.emplace_back(area.x(recs[i]->epoch), area.y(base[i]));
      svg.polygon(poly, color_of[cls], 0.95);
      base = top;
    }
    svg.rect(area.px, area.py, panel_w, panel_h, "none", "#555555");

    for (const EpochRecord* r : recs) {
      table << seed_index << ',' << r->epoch;
      for (size_t c = 0; c < 5; ++c) table << ',' << r->counts[c];
      table << '\n';
    }
  }

  double lx = margin_l, ly = margin_t + rows * (panel_h + gap) - 6;
  const std::array<const char*, 5> label = {"SOV no mk", "SOV mk", "OSV no mk", "OSV mk",
                                            "other"};
  for (size_t cls : stack_order) {
    svg.rect(lx, ly, 10, 10, color_of[cls]);
    svg.text(lx + 14, ly + 9, label[cls], 10, "start");
    lx += 110;
  }

  svg.comment(table.str());
  write_file(out_svg, svg.finish());
}

void plot_tradeoff(const std::vector<AggregateResult>& aggs, const fs::path& out_svg) {
  if (aggs.empty()) throw DataError("plot_tradeoff: nothing to plot");
  double h_max = 0.5, e_min = 3.0, e_max = 4.05;
  for (const AggregateResult& agg : aggs) {
    for (const SeedPoint& pt : agg.final_points) {
      if (std::isnan(pt.h) || std::isnan(pt.e)) continue;
      h_max = std::max(h_max, pt.h + 0.05);
      e_min = std::min(e_min, pt.e - 0.1);
      e_max = std::max(e_max, pt.e + 0.1);
    }
  }

  SvgCanvas svg(520, 420);
  PlotArea area{70, 50, 400, 310, 0.0, h_max, e_min, e_max};
  draw_axes(svg, area, "uncertainty H (bits)", "effort E (words)", 5, 5);
  svg.text(70, 24, "uncertainty vs production effort (diamond: initial language)", 13, "start");

  std::ostringstream table;
  table << "grammar,kind,seed,h,e\n";
  double legend_y = 54;
  for (const AggregateResult& agg : aggs) {
    const std::string color = grammar_color(agg.grammar);
    double h_sum = 0.0, e_sum = 0.0;
    size_t n_defined = 0;
    for (const SeedPoint& pt : agg.final_points) {
      table << agg.grammar << ",pair," << pt.seed_index << ',' << format_double(pt.h) << ','
            << format_double(pt.e) << '\n';
      if (std::isnan(pt.h) || std::isnan(pt.e)) continue;
      svg.circle(area.x(pt.h), area.y(pt.e), 4.0, "none", color, 1.3);
      h_sum += pt.h;
      e_sum += pt.e;
      ++n_defined;
    }
    const double inv = n_defined > 0 ? 1.0 / static_cast<double>(n_defined)
                                     : std::numeric_limits<double>::quiet_NaN();
    if (n_defined > 0)
      svg.circle(area.x(h_sum * inv), area.y(e_sum * inv), 5.0, color, "#222222", 0.8);
    svg.diamond(area.x(agg.initial_h), area.y(agg.initial_e), 6.5, color);
    table << agg.grammar << ",initial,-1," << format_double(agg.initial_h) << ','
          << format_double(agg.initial_e) << '\n';
    table << agg.grammar << ",mean,-1," << format_double(h_sum * inv) << ','
          << format_double(e_sum * inv) << '\n';

    svg.circle(area.px + area.pw - 94, legend_y, 4, color);
    svg.text(area.px + area.pw - 86, legend_y + 3, agg.grammar, 10, "start");
    legend_y += 14;
  }

  svg.comment(table.str());
  write_file(out_svg, svg.finish());
}

}  // namespace nellcom
