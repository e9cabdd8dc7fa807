#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "m2curl/harness/config.hpp"
#include "m2curl/harness/metrics.hpp"

namespace m2curl::harness {

struct CurvePoint {
    std::size_t env_steps = 0;
    double value = 0.0;
};

/// A metric over env_steps, sorted by steps.
using Curve = std::vector<CurvePoint>;

/// Value of the last point at or before `steps`; nullopt if the curve starts later.
inline std::optional<double> value_at_or_before(const Curve& c, std::size_t steps) {
    std::optional<double> v;
    for (const auto& p : c) {
        if (p.env_steps > steps) break;
        v = p.value;
    }
    return v;
}

/// Smallest env_steps at which `baseline` reaches the reference's score at
/// `milestone_steps`; nullopt means unreached.
inline std::optional<std::size_t> sample_efficiency(const Curve& reference, const Curve& baseline,
                                                    std::size_t milestone_steps) {
    if (reference.empty() || milestone_steps > reference.back().env_steps) {
        throw ContractError("sample_efficiency: milestone " + std::to_string(milestone_steps) +
                            " lies beyond the reference horizon");
    }
    const auto target = value_at_or_before(reference, milestone_steps);
    if (!target) {
        throw ContractError("sample_efficiency: milestone " + std::to_string(milestone_steps) +
                            " precedes the first reference eval");
    }
    for (const auto& p : baseline) {
        if (p.value >= *target) return p.env_steps;
    }
    return std::nullopt;
}

/// A finished (or partial) run directory: its config and metrics.
struct RunData {
    std::filesystem::path dir;
    RunConfig config;
    std::vector<MetricsRecord> records;

    /// Points of `key` from records of `kind` (any kind when empty).
    Curve curve(const std::string& key, const std::string& kind = "") const {
        Curve c;
        for (const auto& r : records) {
            if (!kind.empty() && r.kind != kind) continue;
            auto it = r.scalars.find(key);
            if (it != r.scalars.end()) c.push_back({r.env_steps, it->second});
        }
        return c;
    }
};

inline RunData load_run(const std::filesystem::path& dir) {
    RunData d;
    d.dir = dir;
    d.config = parse_config(dir / "config.json");
    d.records = read_metrics(dir / "metrics.jsonl");
    return d;
}

struct CellStat {
    std::size_t runs = 0;
    double mean = 0.0;
    std::optional<double> std;  // population std; absent for a single run
};

struct SummaryRow {
    std::string name;
    std::vector<std::optional<CellStat>> cells;  // one per milestone; absent if no run reached it
};

struct SummaryTable {
    std::vector<std::size_t> milestones;
    std::vector<SummaryRow> rows;
    std::vector<std::string> warnings;

    std::string text() const {
        std::vector<std::vector<std::string>> grid{{"run"}};
        for (auto m : milestones) grid[0].push_back(std::to_string(m));
        for (const auto& r : rows) {
            std::vector<std::string> line{r.name};
            for (const auto& c : r.cells) line.push_back(format_cell(c));
            grid.push_back(std::move(line));
        }
        std::vector<std::size_t> width(grid[0].size(), 0);
        for (const auto& line : grid)
            for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
        std::ostringstream os;
        for (const auto& line : grid) {
            for (std::size_t i = 0; i < line.size(); ++i) {
                if (i == 0) os << std::left << std::setw(static_cast<int>(width[i])) << line[i];
                else os << "  " << std::right << std::setw(static_cast<int>(width[i])) << line[i];
            }
            os << '\n';
        }
        return os.str();
    }

    std::string csv() const {
        std::ostringstream os;
        os << "run,milestone,runs,mean,std\n";
        os << std::setprecision(10);
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < milestones.size(); ++i) {
                os << r.name << ',' << milestones[i] << ',';
                if (const auto& c = r.cells[i]) {
                    os << c->runs << ',' << c->mean << ',';
                    if (c->std) os << *c->std;
                } else {
                    os << "0,,";
                }
                os << '\n';
            }
        }
        return os.str();
    }

private:
    static std::string format_cell(const std::optional<CellStat>& c) {
        if (!c) return "-";
        std::ostringstream os;
        os << std::fixed << std::setprecision(2) << c->mean;
        if (c->std) os << " ± " << *c->std;
        return os.str();
    }
};

/// Mean and population std of values; order-independent (values are sorted first).
inline CellStat cell_stat(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    CellStat s;
    s.runs = values.size();
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    if (values.size() >= 2) {
        double var = 0.0;
        for (double v : values) var += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(var / static_cast<double>(values.size()));
    }
    return s;
}

/// Groups runs by config name and reports, per milestone, the eval return at or
/// before the milestone across seeds.
inline SummaryTable summarize_runs(const std::vector<RunData>& runs, const std::vector<std::size_t>& milestones,
                                   const std::string& key = "episode_return") {
    SummaryTable t;
    t.milestones = milestones;
    std::map<std::string, std::vector<const RunData*>> cells;
    for (const auto& r : runs) cells[r.config.name].push_back(&r);
    for (const auto& [name, members] : cells) {
        SummaryRow row{name, {}};
        for (auto m : milestones) {
            std::vector<double> vals;
            for (const auto* r : members) {
                if (auto v = value_at_or_before(r->curve(key, "eval"), m)) vals.push_back(*v);
            }
            if (vals.empty()) {
                t.warnings.push_back("no eval at or before " + std::to_string(m) + " for " + name);
                row.cells.push_back(std::nullopt);
            } else {
                row.cells.push_back(cell_stat(std::move(vals)));
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline SummaryTable summarize_runs(const std::vector<std::filesystem::path>& dirs,
                                   const std::vector<std::size_t>& milestones) {
    std::vector<RunData> runs;
    for (const auto& d : dirs) runs.push_back(load_run(d));
    return summarize_runs(runs, milestones);
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
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

inline std::string num(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

}  // namespace detail

/// Per-cell mean curve with a min-max band across seeds, as a standalone SVG document.
/// Eval records supply "episode_return"; other keys are read from any record kind.
inline std::string plot_curves_svg(const std::vector<RunData>& runs, const std::string& key) {
    const std::string kind = key == "episode_return" || key == "episode_return_std" ? "eval" : "";
    struct Series {
        std::string name;
        std::vector<std::size_t> steps;
        std::vector<double> mean, lo, hi;
    };
    std::map<std::string, std::vector<Curve>> by_cell;
    for (const auto& r : runs) {
        Curve c = r.curve(key, kind);
        if (c.empty()) throw ParseError("metric '" + key + "' missing in run " + r.dir.string());
        by_cell[r.config.name].push_back(std::move(c));
    }
    std::vector<Series> series;
    double xmax = 1, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& [name, curves] : by_cell) {
        Series s{name, {}, {}, {}, {}};
        std::map<std::size_t, std::vector<double>> at;
        for (const auto& c : curves)
            for (const auto& p : c) at[p.env_steps].push_back(p.value);
        for (const auto& [step, vals] : at) {
            const CellStat st = cell_stat(vals);
            s.steps.push_back(step);
            s.mean.push_back(st.mean);
            s.lo.push_back(*std::min_element(vals.begin(), vals.end()));
            s.hi.push_back(*std::max_element(vals.begin(), vals.end()));
            xmax = std::max(xmax, static_cast<double>(step));
            ymin = std::min(ymin, s.lo.back());
            ymax = std::max(ymax, s.hi.back());
        }
        series.push_back(std::move(s));
    }
    if (!(ymax > ymin)) {
        ymin -= 1.0;
        ymax += 1.0;
    }
    const double W = 720, H = 440, left = 70, right = 180, top = 20, bottom = 50;
    const double pw = W - left - right, ph = H - top - bottom;
    auto X = [&](double s) { return left + pw * s / xmax; };
    auto Y = [&](double v) { return top + ph * (1.0 - (v - ymin) / (ymax - ymin)); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    static const char* dashes[] = {"", "6,3", "2,2", "8,3,2,3"};

    std::ostringstream os;
    using detail::num;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<g stroke=\"black\" stroke-width=\"1\">\n"
       << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\"/>\n"
       << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\"/>\n"
       << "</g>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = xmax * i / 4, yv = ymin + (ymax - ymin) * i / 4;
        os << "<text x=\"" << num(X(xv)) << "\" y=\"" << top + ph + 16 << "\" font-size=\"11\" text-anchor=\"middle\">"
           << static_cast<long long>(xv) << "</text>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << num(Y(yv) + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
           << num(yv) << "</text>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" font-size=\"13\" text-anchor=\"middle\">env_steps</text>\n"
       << "<text x=\"16\" y=\"" << top + ph / 2 << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << top + ph / 2 << ")\">" << detail::xml_escape(key) << "</text>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const char* color = colors[i % 8];
        const char* dash = dashes[i % 4];
        std::ostringstream band, line;
        for (std::size_t k = 0; k < s.steps.size(); ++k) band << num(X(s.steps[k])) << ',' << num(Y(s.hi[k])) << ' ';
        for (std::size_t k = s.steps.size(); k-- > 0;) band << num(X(s.steps[k])) << ',' << num(Y(s.lo[k])) << ' ';
        for (std::size_t k = 0; k < s.steps.size(); ++k) line << num(X(s.steps[k])) << ',' << num(Y(s.mean[k])) << ' ';
        os << "<polygon points=\"" << band.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n"
           << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"";
        if (*dash) os << " stroke-dasharray=\"" << dash << "\"";
        os << "/>\n";
        const double ly = top + 14 + 20.0 * static_cast<double>(i);
        os << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 40 << "\" y2=\"" << ly
           << "\" stroke=\"" << color << "\" stroke-width=\"2\"";
        if (*dash) os << " stroke-dasharray=\"" << dash << "\"";
        os << "/>\n<text x=\"" << left + pw + 46 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">"
           << detail::xml_escape(s.name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline void plot_curves(const std::vector<std::filesystem::path>& dirs, const std::string& key,
                        const std::filesystem::path& out_path) {
    std::vector<RunData> runs;
    for (const auto& d : dirs) runs.push_back(load_run(d));
    const std::string svg = plot_curves_svg(runs, key);
    std::ofstream out(out_path, std::ios::binary);
    out << svg;
    if (!out) throw std::runtime_error("cannot write " + out_path.string());
}

}  // namespace m2curl::harness
