#include "ielts/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ielts/common/error.hpp"

namespace ielts::eval {

namespace {

using nlohmann::json;

constexpr double kWidth = 640, kHeight = 480, kMargin = 60;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Frame {
    double lo_x, hi_x, lo_y, hi_y;

    double px(double x) const { return kMargin + (x - lo_x) / (hi_x - lo_x) * (kWidth - 2 * kMargin); }
    double py(double y) const { return kHeight - kMargin - (y - lo_y) / (hi_y - lo_y) * (kHeight - 2 * kMargin); }
};

std::pair<double, double> padded_range(std::span<const double> v) {
    if (v.empty()) return {0, 1};
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    double a = *lo, b = *hi;
    if (a == b) {
        a -= 0.5;
        b += 0.5;
    }
    const double pad = (b - a) * 0.05;
    return {a - pad, b + pad};
}

std::string open_svg(const std::string& title) {
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
    return o.str();
}

std::string axes(const Frame& f, const std::string& x_label, const std::string& y_label) {
    std::ostringstream o;
    o << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin << "\" y2=\""
      << kHeight - kMargin << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\"" << kHeight - kMargin
      << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = f.lo_x + (f.hi_x - f.lo_x) * i / 4.0, yv = f.lo_y + (f.hi_y - f.lo_y) * i / 4.0;
        o << "<text x=\"" << f.px(xv) << "\" y=\"" << kHeight - kMargin + 16 << "\" text-anchor=\"middle\">" << num(xv)
          << "</text>\n"
          << "<text x=\"" << kMargin - 6 << "\" y=\"" << f.py(yv) + 4 << "\" text-anchor=\"end\">" << num(yv)
          << "</text>\n";
    }
    o << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 16 << "\" text-anchor=\"middle\">" << escape(x_label)
      << "</text>\n"
      << "<text x=\"16\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << kHeight / 2 << ")\">" << escape(y_label) << "</text>\n";
    return o.str();
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] * (1 - frac) + v[i + 1] * frac : v[i];
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + path.string());
        out << content;
        if (!out) throw IoError("cannot write " + path.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot write " + path.string() + ": " + ec.message());
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string svg_scatter(std::span<const double> x, std::span<const double> y, const std::string& title,
                        const std::string& x_label, const std::string& y_label, std::span<const std::string> groups) {
    std::vector<double> both(x.begin(), x.end());
    both.insert(both.end(), y.begin(), y.end());
    const auto [lo, hi] = padded_range(both);
    const Frame f{lo, hi, lo, hi};
    std::ostringstream o;
    o << open_svg(title) << axes(f, x_label, y_label);
    o << "<line x1=\"" << f.px(lo) << "\" y1=\"" << f.py(lo) << "\" x2=\"" << f.px(hi) << "\" y2=\"" << f.py(hi)
      << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
    std::map<std::string, std::size_t> colours;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        std::size_t c = 0;
        if (!groups.empty()) c = colours.emplace(groups[i], colours.size()).first->second;
        o << "<circle cx=\"" << f.px(x[i]) << "\" cy=\"" << f.py(y[i]) << "\" r=\"4\" fill=\"" << kPalette[c % 7]
          << "\" fill-opacity=\"0.7\"/>\n";
    }
    double ly = kMargin;
    for (const auto& [name, c] : colours) {
        o << "<circle cx=\"" << kWidth - kMargin + 10 << "\" cy=\"" << ly << "\" r=\"4\" fill=\"" << kPalette[c % 7]
          << "\"/><text x=\"" << kWidth - kMargin + 18 << "\" y=\"" << ly + 4 << "\">" << escape(name) << "</text>\n";
        ly += 16;
    }
    o << "</svg>\n";
    return o.str();
}

std::string svg_box(std::span<const Series> series, const std::string& title) {
    std::vector<double> all;
    for (const auto& s : series) all.insert(all.end(), s.values.begin(), s.values.end());
    const auto [lo, hi] = padded_range(all);
    const Frame f{0, static_cast<double>(std::max<std::size_t>(series.size(), 1)), lo, hi};
    std::ostringstream o;
    o << open_svg(title) << axes(f, "", "band");
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& v = series[i].values;
        if (v.empty()) continue;
        const double q1 = quantile(v, 0.25), q2 = quantile(v, 0.5), q3 = quantile(v, 0.75);
        const double mn = *std::min_element(v.begin(), v.end()), mx = *std::max_element(v.begin(), v.end());
        const double cx = f.px(i + 0.5), half = (f.px(1) - f.px(0)) * 0.2;
        o << "<line x1=\"" << cx << "\" y1=\"" << f.py(mn) << "\" x2=\"" << cx << "\" y2=\"" << f.py(mx)
          << "\" stroke=\"black\"/>\n"
          << "<rect x=\"" << cx - half << "\" y=\"" << f.py(q3) << "\" width=\"" << 2 * half << "\" height=\""
          << f.py(q1) - f.py(q3) << "\" fill=\"" << kPalette[i % 7] << "\" fill-opacity=\"0.5\" stroke=\"black\"/>\n"
          << "<line x1=\"" << cx - half << "\" y1=\"" << f.py(q2) << "\" x2=\"" << cx + half << "\" y2=\"" << f.py(q2)
          << "\" stroke=\"black\" stroke-width=\"2\"/>\n"
          << "<text x=\"" << cx << "\" y=\"" << kHeight - kMargin + 32 << "\" text-anchor=\"middle\">"
          << escape(series[i].name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

json histogram_json(std::span<const double> values, double bin_width, double marker) {
    if (!(bin_width > 0)) throw InvalidInput("bin width must be positive");
    std::map<long, std::size_t> bins;
    for (double v : values) ++bins[static_cast<long>(std::floor(v / bin_width + 1e-9))];
    json out = json::array();
    if (!bins.empty()) {
        for (long b = bins.begin()->first; b <= bins.rbegin()->first; ++b) {
            const auto it = bins.find(b);
            out.push_back({{"lo", b * bin_width}, {"hi", (b + 1) * bin_width}, {"count", it == bins.end() ? 0 : it->second}});
        }
    }
    return {{"bin_width", bin_width}, {"bins", out}, {"mean_delta", marker}, {"n", values.size()}};
}

std::string svg_histogram(std::span<const double> values, double bin_width, double marker, const std::string& title) {
    const auto h = histogram_json(values, bin_width, marker);
    const auto& bins = h["bins"];
    double lo = marker, hi = marker, top = 1;
    for (const auto& b : bins) {
        lo = std::min(lo, b["lo"].get<double>());
        hi = std::max(hi, b["hi"].get<double>());
        top = std::max(top, b["count"].get<double>());
    }
    if (lo == hi) hi = lo + bin_width;
    const Frame f{lo, hi, 0, top * 1.1};
    std::ostringstream o;
    o << open_svg(title) << axes(f, "score change", "essays");
    for (const auto& b : bins) {
        const double x0 = f.px(b["lo"].get<double>()), x1 = f.px(b["hi"].get<double>());
        const double y = f.py(b["count"].get<double>());
        o << "<rect x=\"" << x0 << "\" y=\"" << y << "\" width=\"" << std::max(0.0, x1 - x0 - 1) << "\" height=\""
          << f.py(0) - y << "\" fill=\"" << kPalette[0] << "\" fill-opacity=\"0.7\"/>\n";
    }
    o << "<line x1=\"" << f.px(marker) << "\" y1=\"" << kMargin << "\" x2=\"" << f.px(marker) << "\" y2=\""
      << kHeight - kMargin << "\" stroke=\"" << kPalette[1] << "\" stroke-dasharray=\"6 3\"/>\n"
      << "<text x=\"" << f.px(marker) + 4 << "\" y=\"" << kMargin + 12 << "\" fill=\"" << kPalette[1] << "\">mean "
      << num(marker) << "</text>\n</svg>\n";
    return o.str();
}

std::string svg_confusion(const ConfusionMatrix& m, const std::string& title) {
    std::size_t top = 1;
    for (const auto& row : m.counts) {
        for (auto c : row) top = std::max(top, c);
    }
    const double cell = (kHeight - 2 * kMargin) / corpus::kBandCount;
    std::ostringstream o;
    o << open_svg(title);
    for (int a = 0; a < corpus::kBandCount; ++a) {
        for (int p = 0; p < corpus::kBandCount; ++p) {
            const auto c = m.counts[a][p];
            const double x = kMargin + p * cell, y = kMargin + (corpus::kBandCount - 1 - a) * cell;
            const int shade = 255 - static_cast<int>(200.0 * static_cast<double>(c) / static_cast<double>(top));
            o << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
              << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"#ddd\"/>\n";
            if (c) {
                o << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
                  << "\" text-anchor=\"middle\" font-size=\"10\">" << c << "</text>\n";
            }
        }
        const std::string label = num(corpus::band_at(a).value()).substr(0, 3);
        o << "<text x=\"" << kMargin - 4 << "\" y=\"" << kMargin + (corpus::kBandCount - 1 - a) * cell + cell / 2 + 4
          << "\" text-anchor=\"end\" font-size=\"10\">" << label << "</text>\n"
          << "<text x=\"" << kMargin + a * cell + cell / 2 << "\" y=\"" << kMargin + corpus::kBandCount * cell + 12
          << "\" text-anchor=\"middle\" font-size=\"10\">" << label << "</text>\n";
    }
    o << "<text x=\"" << kMargin + corpus::kBandCount * cell / 2 << "\" y=\"" << kHeight - 14
      << "\" text-anchor=\"middle\">predicted band</text>\n"
      << "<text x=\"16\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << kHeight / 2
      << ")\">actual band</text>\n</svg>\n";
    return o.str();
}

MetricsReport write_benchmark(const std::filesystem::path& out_dir, const std::string& name,
                              std::span<const std::string> ids, std::span<const double> preds,
                              std::span<const double> labels, const json& extra) {
    if (ids.size() != preds.size()) throw InvalidInput("ids and predictions differ in length");
    const auto metrics = compute_metrics(preds, labels);
    const auto conf = confusion(preds, labels);

    json j = metrics.to_json();
    j["name"] = name;
    for (const auto& [k, v] : extra.items()) j[k] = v;
    write_json(out_dir / "metrics.json", j);
    write_json(out_dir / "confusion.json", conf.to_json());

    std::string csv = "id,prediction,band,label\n";
    std::vector<double> residuals(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        csv += csv_field(ids[i]) + "," + fmt17(preds[i]) + "," + fmt17(corpus::round_to_band(preds[i]).value()) + "," +
               fmt17(labels[i]) + "\n";
        residuals[i] = preds[i] - labels[i];
    }
    write_text(out_dir / "predictions.csv", csv);

    write_text(out_dir / "scatter.svg", svg_scatter(labels, preds, name + ": actual vs predicted", "actual band",
                                                    "predicted band"));
    const std::vector<Series> box = {{"actual", {labels.begin(), labels.end()}},
                                     {"predicted", {preds.begin(), preds.end()}}};
    write_text(out_dir / "box.svg", svg_box(box, name + ": actual vs predicted"));
    write_text(out_dir / "residual.svg",
               svg_scatter(preds, residuals, name + ": residuals", "predicted band", "prediction - actual"));
    write_text(out_dir / "confusion.svg", svg_confusion(conf, name + ": confusion matrix"));
    return metrics;
}

void write_paired(const std::filesystem::path& out_dir, const StatsReport& stats, std::span<const double> before,
                  std::span<const double> after, std::span<const std::string> groups) {
    write_json(out_dir / "stats.json", stats.to_json());
    std::vector<double> deltas(before.size());
    for (std::size_t i = 0; i < deltas.size(); ++i) deltas[i] = after[i] - before[i];
    write_json(out_dir / "histogram.json", histogram_json(deltas, 0.05, stats.mean_delta));
    write_text(out_dir / "histogram.svg", svg_histogram(deltas, 0.05, stats.mean_delta, "Score change after revision"));
    const std::vector<Series> box = {{"before", {before.begin(), before.end()}}, {"after", {after.begin(), after.end()}}};
    write_text(out_dir / "box.svg", svg_box(box, "Scores before and after revision"));
    write_text(out_dir / "scatter.svg",
               svg_scatter(before, after, "Before vs after revision", "original score", "revised score", groups));
    write_text(out_dir / "improvement.svg",
               svg_scatter(before, deltas, "Improvement by original score", "original score", "change", groups));
}

json compare_runs(const std::vector<std::pair<std::string, MetricsReport>>& runs) {
    if (runs.size() < 2) throw InvalidInput("comparison needs at least two runs");
    struct Row {
        const char* key;
        const char* label;
        bool lower_is_better;
    };
    const Row rows[] = {{"exact_pct", "Exact Match (%)", false},
                        {"within05_pct", "Within ±0.5 band (%)", false},
                        {"within10_pct", "Within ±1.0 band (%)", false},
                        {"r2", "R²", false},
                        {"mae", "Mean Absolute Error (bands)", true}};
    json names = json::array(), table = json::array();
    for (const auto& [name, m] : runs) names.push_back(name);
    for (const auto& row : rows) {
        json values = json::array();
        for (const auto& [name, m] : runs) values.push_back(m.to_json()[row.key]);
        const double first = values.front().get<double>(), last = values.back().get<double>();
        table.push_back({{"metric", row.key},
                         {"label", row.label},
                         {"values", values},
                         {"improvement", row.lower_is_better ? first - last : last - first}});
    }
    return {{"runs", names}, {"rows", table}};
}

std::string compare_table_markdown(const json& comparison) {
    std::ostringstream o;
    o << "| Metric |";
    for (const auto& n : comparison.at("runs")) o << " " << n.get<std::string>() << " |";
    o << " Δ Improvement |\n|---|";
    for (std::size_t i = 0; i < comparison.at("runs").size(); ++i) o << "---|";
    o << "---|\n";
    for (const auto& row : comparison.at("rows")) {
        o << "| " << row.at("label").get<std::string>() << " |";
        for (const auto& v : row.at("values")) o << " " << num(v.get<double>()) << " |";
        o << " " << num(row.at("improvement").get<double>()) << " |\n";
    }
    return o.str();
}

}  // namespace ielts::eval
