#include "textgan/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace textgan {

namespace fs = std::filesystem;

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write metrics csv: " + path);
    out << metrics_csv_header() << "\n";
    for (const MetricsRecord& rec : records) out << metrics_csv_row(rec) << "\n";
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("missing metrics file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != metrics_csv_header()) {
        throw FormatError("metrics csv has an unexpected header: " + path);
    }
    std::vector<MetricsRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != 14) throw FormatError("metrics csv row with " +
                                                  std::to_string(cells.size()) + " cells");
        auto opt = [](const std::string& s) -> std::optional<double> {
            if (s == "nan") return std::nullopt;
            return std::stod(s);
        };
        MetricsRecord rec;
        rec.phase = cells[0];
        rec.iteration = std::stoi(cells[1]);
        rec.nll_gen = opt(cells[2]);
        rec.nll_div = opt(cells[3]);
        for (int n = 2; n <= 5; ++n) rec.bleu[n] = opt(cells[static_cast<size_t>(2 + n)]);
        for (int n = 2; n <= 4; ++n) rec.self_bleu[n] = opt(cells[static_cast<size_t>(6 + n)]);
        rec.distinct1 = opt(cells[11]);
        rec.distinct2 = opt(cells[12]);
        rec.empty_fraction = opt(cells[13]);
        records.push_back(std::move(rec));
    }
    return records;
}

const std::vector<std::string>& tracked_metrics() {
    static const std::vector<std::string> names = {
        "nll_gen",   "nll_div",   "bleu2",     "bleu3",     "bleu4",         "bleu5",
        "sbleu2",    "sbleu3",    "sbleu4",    "distinct1", "distinct2",     "empty_fraction",
    };
    return names;
}

namespace {

std::optional<double> metric_value(const MetricsRecord& rec, const std::string& name) {
    if (name == "nll_gen") return rec.nll_gen;
    if (name == "nll_div") return rec.nll_div;
    if (name == "distinct1") return rec.distinct1;
    if (name == "distinct2") return rec.distinct2;
    if (name == "empty_fraction") return rec.empty_fraction;
    if (name.rfind("bleu", 0) == 0) {
        auto it = rec.bleu.find(name[4] - '0');
        return it == rec.bleu.end() ? std::nullopt : it->second;
    }
    if (name.rfind("sbleu", 0) == 0) {
        auto it = rec.self_bleu.find(name[5] - '0');
        return it == rec.self_bleu.end() ? std::nullopt : it->second;
    }
    throw ContractError("unknown metric: " + name);
}

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

}  // namespace

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<ChartSeries>& series) {
    constexpr double W = 640, H = 400;
    constexpr double ml = 60, mr = 16, mt = 36, mb = 40;

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool any = false;
    for (const ChartSeries& s : series) {
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!any) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                any = true;
            } else {
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i]);
                ymax = std::max(ymax, s.y[i]);
            }
        }
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1;
    if (ymax - ymin < 1e-12) ymax = ymin + 1;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4g", v);
        return std::string(buf);
    };

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write svg: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\""
        << " font-size=\"14\">" << title << "</text>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
        << H - mb << "\" stroke=\"#444\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
        << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << ml - 6 << "\" y=\"" << py(ymin) << "\" text-anchor=\"end\""
        << " font-family=\"sans-serif\" font-size=\"11\">" << fmt(ymin) << "</text>\n";
    out << "<text x=\"" << ml - 6 << "\" y=\"" << py(ymax) + 4 << "\" text-anchor=\"end\""
        << " font-family=\"sans-serif\" font-size=\"11\">" << fmt(ymax) << "</text>\n";
    out << "<text x=\"" << px(xmin) << "\" y=\"" << H - mb + 16 << "\" text-anchor=\"middle\""
        << " font-family=\"sans-serif\" font-size=\"11\">" << fmt(xmin) << "</text>\n";
    out << "<text x=\"" << px(xmax) << "\" y=\"" << H - mb + 16 << "\" text-anchor=\"middle\""
        << " font-family=\"sans-serif\" font-size=\"11\">" << fmt(xmax) << "</text>\n";

    for (size_t si = 0; si < series.size(); ++si) {
        const ChartSeries& s = series[si];
        const char* color = kSeriesColors[si % 4];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (i) out << " ";
            out << px(s.x[i]) << "," << py(s.y[i]);
        }
        out << "\"/>\n";
        out << "<text x=\"" << W - mr - 4 << "\" y=\"" << mt + 14 * (si + 1)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
            << color << "\">" << s.label << "</text>\n";
    }
    out << "</svg>\n";
}

void emit_report(const std::string& run_dir) {
    const fs::path dir(run_dir);
    const std::vector<MetricsRecord> records = read_metrics_csv((dir / "metrics.csv").string());
    fs::create_directories(dir / "svg");

    for (const std::string& name : tracked_metrics()) {
        // pretrain and adversarial phases become separate series over iteration
        std::vector<ChartSeries> series;
        for (const char* phase : {"pretrain", "adversarial"}) {
            ChartSeries s;
            s.label = phase;
            for (const MetricsRecord& rec : records) {
                if (rec.phase != phase) continue;
                const auto v = metric_value(rec, name);
                if (!v.has_value() || !std::isfinite(*v)) continue;
                s.x.push_back(rec.iteration);
                s.y.push_back(*v);
            }
            if (!s.x.empty()) series.push_back(std::move(s));
        }
        write_svg_chart((dir / "svg" / (name + ".svg")).string(), name, series);
    }

    // Collate per-phase sample tables when the run produced them.
    std::ofstream all(dir / "samples.txt", std::ios::trunc);
    for (const char* phase : {"pretrain", "adversarial"}) {
        const fs::path table = dir / ("samples_" + std::string(phase) + ".txt");
        if (!fs::exists(table)) continue;
        all << "== " << phase << " ==\n";
        std::ifstream in(table);
        all << in.rdbuf() << "\n";
    }
}

void write_sample_table(const std::string& path, const std::vector<std::string>& decoded) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write sample table: " + path);
    for (const std::string& s : decoded) {
        out << (s.empty() ? "<empty>" : s) << "\n";
    }
}

}  // namespace textgan
