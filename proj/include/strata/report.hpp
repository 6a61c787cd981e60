#pragma once

// Serialization of benchmark and diversity results: JSON documents, a long-form
// CSV of aggregated curves, and a hand-drawn SVG line chart.

#include "strata/diversity.hpp"
#include "strata/experiments.hpp"
#include "strata/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace strata::io {

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline json bench_params_json(const BenchParams& p) {
    return {{"num_tasks", p.num_tasks},
            {"num_traits", p.num_traits},
            {"num_noncumulative", p.num_noncumulative},
            {"num_species", p.num_species},
            {"agents_per_species", p.agents_per_species},
            {"runs", p.runs},
            {"rate_ceiling", p.rate_ceiling},
            {"eps_fraction", p.eps_fraction},
            {"q_samples", p.q_samples},
            {"meta_iterations", p.meta_iterations},
            {"time_points", p.time_points},
            {"extra_edge_probability", p.extra_edge_probability},
            {"seed", p.seed}};
}

inline json series_json(const MetricSeries& m) {
    json g1s = json::array(), g2s = json::array();
    for (const auto& v : m.delta_g1_sampled) g1s.push_back({v.mean, v.std});
    for (const auto& v : m.delta_g2_sampled) g2s.push_back({v.mean, v.std});
    return {{"times", m.times},
            {"delta_g1_mean", m.delta_g1_mean},
            {"delta_g2_mean", m.delta_g2_mean},
            {"delta_g1_sampled", g1s},
            {"delta_g2_sampled", g2s}};
}

/// Wall-clock times are left out so identical seeds give identical files.
inline json bench_json(const BenchReport& r, bool include_series = true) {
    json runs = json::array();
    for (const auto& rec : r.records) {
        json j = {{"run", rec.run},
                  {"strategy", to_string(rec.strategy)},
                  {"goal", to_string(rec.goal)},
                  {"converged", rec.converged},
                  {"settle_time", rec.settle_time},
                  {"residuals", rec.residuals},
                  {"delta_g1_at_settle", rec.delta_g1_at_settle},
                  {"delta_g2_at_settle", rec.delta_g2_at_settle}};
        if (!rec.error.empty()) j["error"] = rec.error;
        if (include_series) j["metrics"] = series_json(rec.metrics);
        runs.push_back(std::move(j));
    }
    json aggregates = json::array();
    for (const auto& a : r.aggregates) {
        json curves = json::object();
        for (const auto& [name, pts] : a.curves) {
            json c = json::array();
            for (const auto& p : pts) c.push_back({{"time", p.time}, {"mean", p.mean}, {"std", p.std}});
            curves[name] = std::move(c);
        }
        aggregates.push_back({{"strategy", to_string(a.strategy)},
                              {"goal", to_string(a.goal)},
                              {"runs", a.runs},
                              {"converged", a.converged},
                              {"curves", std::move(curves)}});
    }
    json tests = json::array();
    for (const auto& t : r.tests) {
        tests.push_back({{"goal", to_string(t.goal)},
                         {"strata_rate", t.strata_rate},
                         {"baseline_rate", t.baseline_rate},
                         {"z", t.z},
                         {"p_value", t.p_value}});
    }
    json strategies = json::array();
    for (auto s : r.strategies) strategies.push_back(to_string(s));
    return {{"schema_version", kSchemaVersion},
            {"kind", "bench"},
            {"params", bench_params_json(r.params)},
            {"strategies", strategies},
            {"runs", runs},
            {"aggregates", aggregates},
            {"convergence_tests", tests}};
}

inline std::string bench_csv(const BenchReport& r) {
    std::ostringstream out;
    out << "time,metric,mean,std,strategy,goal\n";
    for (const auto& a : r.aggregates) {
        for (const auto& [name, pts] : a.curves) {
            for (const auto& p : pts) {
                out << format_number(p.time) << ',' << name << ',' << format_number(p.mean) << ','
                    << format_number(p.std) << ',' << to_string(a.strategy) << ',' << to_string(a.goal) << '\n';
            }
        }
    }
    return out.str();
}

struct SvgSeries {
    std::string label;
    std::vector<double> x, y;
    std::string color;
    bool dashed = false;
};

struct SvgPanel {
    std::string title;
    std::vector<SvgSeries> series;
};

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

/// Panels stacked vertically, each with its own axes and legend.
inline std::string line_chart_svg(const std::vector<SvgPanel>& panels, const std::string& x_label,
                                  const std::string& y_label) {
    const double W = 720, H = 300, left = 70, right = 180, top = 40, bottom = 50;
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H * panels.size()
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const double y0 = H * static_cast<double>(p);
        double xmax = 0.0, ymax = 0.0;
        for (const auto& s : panels[p].series) {
            for (double v : s.x) xmax = std::max(xmax, v);
            for (double v : s.y) ymax = std::max(ymax, v);
        }
        if (xmax <= 0.0) xmax = 1.0;
        if (ymax <= 0.0) ymax = 1.0;
        ymax *= 1.05;
        const double pw = W - left - right, ph = H - top - bottom;
        auto px = [&](double x) { return left + pw * x / xmax; };
        auto py = [&](double y) { return y0 + top + ph * (1.0 - y / ymax); };

        o << "<g>\n<text x=\"" << left << "\" y=\"" << y0 + 22 << "\" font-size=\"14\">" << svg_escape(panels[p].title)
          << "</text>\n";
        o << "<rect x=\"" << left << "\" y=\"" << y0 + top << "\" width=\"" << pw << "\" height=\"" << ph
          << "\" fill=\"none\" stroke=\"#444\"/>\n";
        for (int k = 0; k <= 4; ++k) {
            const double xv = xmax * k / 4.0, yv = ymax * k / 4.0;
            o << "<text x=\"" << px(xv) << "\" y=\"" << y0 + top + ph + 16 << "\" text-anchor=\"middle\">"
              << format_number(std::round(xv * 100.0) / 100.0) << "</text>\n";
            o << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
              << format_number(std::round(yv * 10.0) / 10.0) << "</text>\n";
        }
        o << "<text x=\"" << left + pw / 2 << "\" y=\"" << y0 + H - 10 << "\" text-anchor=\"middle\">"
          << svg_escape(x_label) << "</text>\n";
        o << "<text transform=\"translate(18," << y0 + top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
          << svg_escape(y_label) << "</text>\n";
        int row = 0;
        for (const auto& s : panels[p].series) {
            if (!s.x.empty()) {
                o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.8\""
                  << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
                for (std::size_t i = 0; i < s.x.size(); ++i)
                    o << format_number(px(s.x[i])) << ',' << format_number(py(s.y[i])) << ' ';
                o << "\"/>\n";
            }
            const double ly = y0 + top + 14 + 18 * row++;
            o << "<line x1=\"" << W - right + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 36 << "\" y2=\"" << ly
              << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "")
              << "/>\n<text x=\"" << W - right + 42 << "\" y=\"" << ly + 4 << "\">" << svg_escape(s.label)
              << "</text>\n";
        }
        o << "</g>\n";
    }
    o << "</svg>\n";
    return o.str();
}

inline std::string bench_svg(const BenchReport& r) {
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c"};
    std::vector<SvgPanel> panels;
    for (Goal goal : {Goal::ExactMatching, Goal::MinimumMatching}) {
        SvgPanel panel;
        panel.title = std::string("Goal: ") + to_string(goal) + " matching (converged runs)";
        for (const auto& a : r.aggregates) {
            if (a.goal != goal) continue;
            const int c = static_cast<int>(a.strategy);
            for (const char* metric : {"delta_g1_mean", "delta_g2_mean"}) {
                const auto it = a.curves.find(metric);
                SvgSeries s;
                s.label = std::string(to_string(a.strategy)) + (metric[7] == '1' ? " exact" : " deficit") + " (" +
                          std::to_string(a.converged) + "/" + std::to_string(a.runs) + ")";
                s.color = colors[c];
                s.dashed = metric[7] == '2';
                if (it != a.curves.end()) {
                    for (const auto& p : it->second) {
                        s.x.push_back(p.time);
                        s.y.push_back(p.mean);
                    }
                }
                panel.series.push_back(std::move(s));
            }
        }
        panels.push_back(std::move(panel));
    }
    return line_chart_svg(panels, "time", "trait mismatch (%)");
}

inline json minspecies_json(const MinspeciesResult& r) {
    json A = json::array();
    for (Eigen::Index i = 0; i < r.combination.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < r.combination.cols(); ++j) row.push_back(r.combination(i, j));
        A.push_back(std::move(row));
    }
    return {{"cardinality", r.cardinality},
            {"members", r.members},
            {"combination", A},
            {"reduced_traits", matrix_json(r.reduced_traits)},
            {"total_coefficient", r.total_coefficient}};
}

} // namespace strata::io
