#include "seqdesign/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace seqdesign {

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
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

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '\t')) out.push_back(cell);
    return out;
}

}  // namespace

void write_text_file(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + file.string());
}

std::string read_text_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<ChartSeries>& series) {
    constexpr double width = 560, height = 360, left = 60, right = 150, top = 40, bottom = 50;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool first = true;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            if (first) {
                x0 = x1 = s.x[i];
                y0 = std::min(0.0, s.y[i]);
                y1 = std::max(1.0, s.y[i]);
                first = false;
            }
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double pw = width - left - right, ph = height - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(title)
       << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
       << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double xv = x0 + (x1 - x0) * k / 5.0;
        const double yv = y0 + (y1 - y0) * k / 5.0;
        os << "<text x=\"" << px(xv) << "\" y=\"" << top + ph + 15 << "\" text-anchor=\"middle\">" << num(xv)
           << "</text>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << num(yv)
           << "</text>\n";
        os << "<line x1=\"" << left << "\" y1=\"" << py(yv) << "\" x2=\"" << left + pw << "\" y2=\"" << py(yv)
           << "\" stroke=\"#dddddd\"/>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">"
       << xml_escape(x_label) << "</text>\n";
    os << "<text x=\"14\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
       << top + ph / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kPalette[k % (sizeof kPalette / sizeof kPalette[0])];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (std::isfinite(s.y[i])) os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        }
        os << "\"/>\n";
        const double ly = top + 14.0 * static_cast<double>(k);
        os << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30 << "\" y2=\""
           << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << left + pw + 35 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::vector<std::string> write_replication_outputs(const std::filesystem::path& dir,
                                                   const ExperimentConfig& config,
                                                   const std::vector<TrueModelResult>& results) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> files;
    std::ostringstream summary, trials, eff, acc, cost_tsv, miss;
    summary << "true_model\treplications\tmean_efficiency\tmean_proof_side\tselection_accuracy\t"
               "final_model_accuracy\tmean_misselections\tmean_cost\toptimal_cost\n";
    trials << "true_model\ttrial\tefficiency\tproof_side\tmisselections\tfinal_model\tacc_selected\tcost\tn\tstages\n";
    eff << "true_model\tdesign\tn\tefficiency\n";
    acc << "true_model\tdesign\tselection_accuracy\tfinal_model_accuracy\n";
    cost_tsv << "true_model\tdesign\tcost\n";
    miss << "true_model\tstage\tmean_cumulative_misselections\n";
    for (const auto& [t, s] : results) {
        const std::string label = model_label(t);
        summary << label << '\t' << s.replications << '\t' << num(s.mean_efficiency) << '\t'
                << num(s.mean_proof_side) << '\t' << num(s.selection_accuracy) << '\t'
                << num(s.final_model_accuracy) << '\t' << num(s.mean_misselections) << '\t' << num(s.mean_cost)
                << '\t' << num(s.optimal_cost) << '\n';
        for (std::size_t r = 0; r < s.trials.size(); ++r) {
            const auto& m = s.trials[r];
            trials << label << '\t' << r << '\t' << num(m.efficiency) << '\t' << num(m.proof_side) << '\t'
                   << m.misselections << '\t' << model_label(m.final_model) << '\t'
                   << (m.acc_selected ? model_label(*m.acc_selected) : "none") << '\t' << num(m.cost) << '\t'
                   << m.n << '\t' << m.stages << '\n';
        }
        std::vector<ChartSeries> chart;
        ChartSeries seq{"sequential", {}, {}};
        for (std::size_t i = 0; i < s.checkpoints.size(); ++i) {
            eff << label << "\tsequential\t" << s.checkpoints[i] << '\t' << num(s.efficiency_by_n[i]) << '\n';
            seq.x.push_back(s.checkpoints[i]);
            seq.y.push_back(s.efficiency_by_n[i]);
        }
        chart.push_back(seq);
        for (const auto& c : s.comparisons) {
            ChartSeries cs{c.name, {}, {}};
            for (int n : s.checkpoints) {
                eff << label << '\t' << c.name << '\t' << n << '\t' << num(c.efficiency) << '\n';
                cs.x.push_back(n);
                cs.y.push_back(c.efficiency);
            }
            chart.push_back(cs);
        }
        acc << label << "\tsequential\t" << num(s.selection_accuracy) << '\t' << num(s.final_model_accuracy) << '\n';
        for (const auto& c : s.comparisons) acc << label << '\t' << c.name << '\t' << num(c.accuracy) << "\tNA\n";
        cost_tsv << label << "\tsequential\t" << num(s.mean_cost) << '\n';
        cost_tsv << label << "\toptimal-true\t" << num(s.optimal_cost) << '\n';
        for (const auto& c : s.comparisons) cost_tsv << label << '\t' << c.name << '\t' << num(c.cost) << '\n';
        for (std::size_t i = 0; i < s.misselect_by_stage.size(); ++i) {
            miss << label << '\t' << i + 1 << '\t' << num(s.misselect_by_stage[i]) << '\n';
        }
        const std::string svg = "efficiency_" + label + ".svg";
        write_text_file(dir / svg, svg_line_chart(config.sim.suite + ", true model " + label, "total sample size n",
                                                  "efficiency", chart));
        files.push_back(svg);
    }
    const std::pair<const char*, std::string> tables[] = {
        {"summary.tsv", summary.str()}, {"trials.tsv", trials.str()},   {"efficiency_by_n.tsv", eff.str()},
        {"accuracy.tsv", acc.str()},    {"cost.tsv", cost_tsv.str()},   {"misselect.tsv", miss.str()},
    };
    for (const auto& [name, text] : tables) {
        write_text_file(dir / name, text);
        files.emplace_back(name);
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::string summary_text(const ExperimentConfig& config, const std::vector<TrueModelResult>& results) {
    std::ostringstream os;
    os << "suite " << config.sim.suite << ", " << results.front().second.replications << " replications\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-6s %10s %10s %10s %10s %10s\n", "true", "eff", "ACC", "final", "missel",
                  "cost");
    os << buf;
    for (const auto& [t, s] : results) {
        std::snprintf(buf, sizeof buf, "%-6s %10.4f %10.4f %10.4f %10.3f %10.1f\n", model_label(t).c_str(),
                      s.mean_efficiency, s.selection_accuracy, s.final_model_accuracy, s.mean_misselections,
                      s.mean_cost);
        os << buf;
        for (const auto& c : s.comparisons) {
            std::snprintf(buf, sizeof buf, "  %-12s eff %.4f  cost %.1f\n", c.name.c_str(), c.efficiency, c.cost);
            os << buf;
        }
    }
    return os.str();
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const std::filesystem::path& dir, const Manifest& m) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["tool"] = "seqdesign";
    j["version"] = SEQDESIGN_VERSION;
    j["command"] = m.command;
    j["arguments"] = m.arguments;
    j["config"] = m.config_text;
    j["seed"] = m.seed;
    j["started"] = m.started;
    j["finished"] = m.finished;
    j["outputs"] = m.outputs;
    write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

Manifest read_manifest(const std::filesystem::path& file) {
    const auto j = nlohmann::json::parse(read_text_file(file));
    Manifest m;
    m.command = j.at("command").get<std::string>();
    m.config_text = j.at("config").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    m.outputs = j.value("outputs", std::vector<std::string>{});
    m.arguments = j.value("arguments", std::vector<std::string>{});
    return m;
}

std::string regenerate_report(const std::filesystem::path& dir, std::vector<std::string>& written) {
    const std::string eff = read_text_file(dir / "efficiency_by_n.tsv");
    std::istringstream in(eff);
    std::string line;
    std::getline(in, line);  // header
    // true model -> design -> series, designs in order of appearance
    std::map<std::string, std::vector<ChartSeries>> charts;
    while (std::getline(in, line)) {
        const auto cells = split_tabs(line);
        if (cells.size() != 4) throw std::runtime_error("efficiency_by_n.tsv: malformed line '" + line + "'");
        auto& list = charts[cells[0]];
        auto it = std::find_if(list.begin(), list.end(), [&](const ChartSeries& s) { return s.name == cells[1]; });
        if (it == list.end()) {
            list.push_back({cells[1], {}, {}});
            it = list.end() - 1;
        }
        it->x.push_back(std::stod(cells[2]));
        it->y.push_back(cells[3] == "NA" ? std::nan("") : std::stod(cells[3]));
    }
    for (const auto& [label, series] : charts) {
        const std::string svg = "efficiency_" + label + ".svg";
        write_text_file(dir / svg, svg_line_chart("true model " + label, "total sample size n", "efficiency", series));
        written.push_back(svg);
    }
    // aligned copy of the summary table
    std::istringstream sum(read_text_file(dir / "summary.tsv"));
    std::vector<std::vector<std::string>> rows;
    while (std::getline(sum, line)) rows.push_back(split_tabs(line));
    std::vector<std::size_t> widths;
    for (const auto& r : rows) {
        if (widths.size() < r.size()) widths.resize(r.size(), 0);
        for (std::size_t c = 0; c < r.size(); ++c) widths[c] = std::max(widths[c], r[c].size());
    }
    std::ostringstream os;
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            os << r[c] << std::string(widths[c] - r[c].size() + 2, ' ');
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace seqdesign
