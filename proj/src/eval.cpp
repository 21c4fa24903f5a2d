#include "vicsfm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vicsfm/error.hpp"

namespace vicsfm {

namespace {

// Shortest decimal representation that parses back to exactly the same double.
std::string exact_double(double v) {
    char buf[64];
    if (v == std::floor(v) && std::abs(v) < 1e15) {
        std::snprintf(buf, sizeof(buf), "%.0f", v);
        return buf;
    }
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

MatchCurve anchor_match_curve(const std::vector<std::vector<Feature>>& frames, int window,
                              int stride, double ratio) {
    if (window < 1) throw std::invalid_argument("anchor_match_curve: window must be >= 1");
    if (static_cast<int>(frames.size()) < window + 1)
        throw std::invalid_argument("anchor_match_curve: needs at least window + 1 frames");
    if (stride <= 0) stride = window + 1;

    MatchCurve curve;
    curve.window = window;
    curve.mean_matches.assign(window, 0.0);
    for (int start = 0; start + window < static_cast<int>(frames.size()); start += stride) {
        const auto anchor = descriptors_of(frames[start]);
        for (int off = 1; off <= window; ++off) {
            const auto other = descriptors_of(frames[start + off]);
            curve.mean_matches[off - 1] +=
                static_cast<double>(match_exhaustive(anchor, other, ratio).size());
        }
        ++curve.samples;
    }
    for (double& m : curve.mean_matches) m /= curve.samples;
    return curve;
}

std::string format_percent(long numerator, long denominator) {
    if (denominator <= 0 || numerator < 0)
        throw std::invalid_argument("format_percent: requires denominator > 0, numerator >= 0");
    // Half-up rounding of 10000*num/den in integer arithmetic.
    const long long centi =
        (20000LL * numerator + denominator) / (2LL * denominator);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld.%02lld%%", centi / 100, centi % 100);
    return buf;
}

MetricsRow table_metrics(const Reconstruction& recon, int input_count,
                         const std::string& label) {
    if (input_count <= 0)
        throw std::invalid_argument("table_metrics: input image count must be positive");
    const int reconstructed = static_cast<int>(recon.frames.size());
    if (reconstructed > input_count)
        throw std::invalid_argument(
            "table_metrics: more registered frames than input images");

    MetricsRow row;
    row.label = label;
    row.input_images = input_count;
    row.reconstructed_images = reconstructed;
    const std::string pct = format_percent(reconstructed, input_count);
    row.reconstructed_pct = std::strtod(pct.c_str(), nullptr);
    row.points3d = static_cast<long>(recon.points.size());
    if (reconstructed > 0)
        row.avg_observations =
            static_cast<double>(recon.observation_count()) / reconstructed;
    return row;
}

CompareReport compare_rows(const std::vector<MetricsRow>& rows) {
    if (rows.size() < 2) throw std::invalid_argument("compare_rows: needs at least two rows");

    CompareReport report;
    report.rows = rows;

    struct MetricDef {
        const char* name;
        double (*get)(const MetricsRow&);
    };
    static const MetricDef defs[] = {
        {"reconstructed_images",
         [](const MetricsRow& r) { return static_cast<double>(r.reconstructed_images); }},
        {"reconstructed_pct", [](const MetricsRow& r) { return r.reconstructed_pct; }},
        {"points3d", [](const MetricsRow& r) { return static_cast<double>(r.points3d); }},
        {"avg_observations", [](const MetricsRow& r) { return r.avg_observations; }},
    };

    std::ostringstream csv;
    csv << "metric";
    for (const auto& r : rows) csv << ',' << r.label;
    csv << ",winner\n";

    for (const auto& def : defs) {
        MetricFlag flag;
        flag.metric = def.name;
        double best = def.get(rows[0]);
        for (const auto& r : rows) best = std::max(best, def.get(r));
        for (int i = 0; i < static_cast<int>(rows.size()); ++i)
            if (def.get(rows[i]) == best) flag.winners.push_back(i);
        flag.tie = flag.winners.size() > 1;

        csv << def.name;
        for (const auto& r : rows) csv << ',' << exact_double(def.get(r));
        csv << ',' << (flag.tie ? std::string("tie") : rows[flag.winners[0]].label) << '\n';
        report.flags.push_back(std::move(flag));
    }
    report.csv = csv.str();
    return report;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write metrics file: " + path.string());
    out << "label,input_images,reconstructed_images,reconstructed_pct,points3d,"
           "avg_observations\n";
    for (const auto& r : rows) {
        char pct[32];
        std::snprintf(pct, sizeof(pct), "%.2f%%", r.reconstructed_pct);
        out << r.label << ',' << r.input_images << ',' << r.reconstructed_images << ',' << pct
            << ',' << r.points3d << ',' << exact_double(r.avg_observations) << '\n';
    }
    if (!out) throw IoError("failed writing metrics file: " + path.string());
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read metrics file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty metrics file: " + path.string());
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cols = split_csv_line(line);
        if (cols.size() != 6) throw IoError("malformed metrics row: " + line);
        MetricsRow r;
        r.label = cols[0];
        r.input_images = std::stoi(cols[1]);
        r.reconstructed_images = std::stoi(cols[2]);
        r.reconstructed_pct = std::strtod(cols[3].c_str(), nullptr);
        r.points3d = std::stol(cols[4]);
        r.avg_observations = std::strtod(cols[5].c_str(), nullptr);
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_curve_csv(const MatchCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write curve file: " + path.string());
    out << "# window=" << curve.window << " samples=" << curve.samples << '\n';
    out << "offset,mean_matches,samples\n";
    for (int i = 0; i < curve.window; ++i)
        out << (i + 1) << ',' << exact_double(curve.mean_matches[i]) << ',' << curve.samples
            << '\n';
    if (!out) throw IoError("failed writing curve file: " + path.string());
}

void write_curve_svg(const MatchCurve& curve, const std::filesystem::path& path) {
    const int width = 640, height = 400;
    const double left = 60, right = 20, top = 30, bottom = 50;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    double max_y = 1.0;
    for (double m : curve.mean_matches) max_y = std::max(max_y, m);
    max_y = std::ceil(max_y * 1.05);

    auto sx = [&](double offset) {
        return left + (curve.window > 1 ? (offset - 1) / (curve.window - 1) * plot_w
                                        : 0.5 * plot_w);
    };
    auto sy = [&](double v) { return top + (1.0 - v / max_y) * plot_h; };

    std::ofstream out(path);
    if (!out) throw IoError("cannot write curve plot: " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"13\">mean matches vs. frame offset ("
        << curve.samples << " samples)</text>\n";
    // axes
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
    for (int i = 1; i <= curve.window; ++i) {
        out << "<text x=\"" << sx(i) << "\" y=\"" << top + plot_h + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << i
            << "</text>\n";
    }
    for (int g = 0; g <= 4; ++g) {
        const double v = max_y * g / 4.0;
        out << "<text x=\"" << left - 6 << "\" y=\"" << sy(v) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << exact_double(std::round(v * 10) / 10) << "</text>\n";
    }
    out << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"";
    for (int i = 0; i < curve.window; ++i)
        out << sx(i + 1) << ',' << sy(curve.mean_matches[i]) << ' ';
    out << "\"/>\n";
    for (int i = 0; i < curve.window; ++i)
        out << "<circle cx=\"" << sx(i + 1) << "\" cy=\"" << sy(curve.mean_matches[i])
            << "\" r=\"3\" fill=\"#1f6fb2\"/>\n";
    out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">frame "
           "offset</text>\n";
    out << "</svg>\n";
    if (!out) throw IoError("failed writing curve plot: " + path.string());
}

}  // namespace vicsfm
