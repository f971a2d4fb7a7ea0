#include "seqdesign/interactive.hpp"

#include "seqdesign/report.hpp"

#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace seqdesign {

using nlohmann::json;

namespace {

std::string format_point(const Point& x, const std::vector<std::string>& names) {
    std::ostringstream os;
    os << '(';
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        if (k) os << ", ";
        os << names[static_cast<std::size_t>(k)] << '=';
        if (is_uncontrolled(x[k])) os << '*';
        else os << std::setprecision(6) << x[k];
    }
    os << ')';
    return os.str();
}

json observations_json(const ObservationSet& data) {
    json arr = json::array();
    for (const auto& row : data.rows) {
        json x = json::array();
        for (Eigen::Index k = 0; k < row.x.size(); ++k) x.push_back(row.x[k]);
        arr.push_back({{"x", x}, {"y", row.y}});
    }
    return arr;
}

ObservationSet observations_from(const json& arr) {
    ObservationSet data;
    for (const auto& e : arr) {
        const auto xs = e.at("x").get<std::vector<double>>();
        Point x(static_cast<Eigen::Index>(xs.size()));
        for (std::size_t k = 0; k < xs.size(); ++k) x[static_cast<Eigen::Index>(k)] = xs[k];
        data.rows.push_back({x, e.at("y").get<double>()});
    }
    return data;
}

}  // namespace

InteractiveSession::InteractiveSession(ExperimentConfig config, std::filesystem::path session_file)
    : config_(std::move(config)), file_(std::move(session_file)) {
    config_.sim.true_index = config_.true_models.front();
    study_ = build_study(config_.sim);
    state_ = init(static_cast<int>(study_.suite.candidates.size()));
}

InteractiveSession InteractiveSession::resume(const std::filesystem::path& session_file) {
    const json j = json::parse(read_text_file(session_file));
    InteractiveSession s(parse_config(j.at("config").get<std::string>()), session_file);
    s.state_.a = j.at("a").get<std::vector<int>>();
    s.state_.b = j.at("b").get<std::vector<int>>();
    s.state_.N = j.at("N").get<std::vector<int>>();
    s.state_.t = j.at("t").get<int>();
    s.stage_sizes_ = j.at("stage_sizes").get<std::vector<int>>();
    for (const auto& line : j.at("records")) s.records_.push_back(record_from_json_line(line.get<std::string>()));
    if (!j.at("pretest").is_null()) s.pretest_ = observations_from(j.at("pretest"));
    s.used_ = j.at("used").get<int>();
    if (s.state_.arms() != static_cast<int>(s.study_.suite.candidates.size()) ||
        s.records_.size() != s.stage_sizes_.size()) {
        throw std::runtime_error("session file " + session_file.string() + " is inconsistent");
    }
    return s;
}

void InteractiveSession::save() const {
    json j;
    j["config"] = config_to_text(config_);
    j["a"] = state_.a;
    j["b"] = state_.b;
    j["N"] = state_.N;
    j["t"] = state_.t;
    j["used"] = used_;
    j["stage_sizes"] = stage_sizes_;
    json recs = json::array();
    for (const auto& r : records_) recs.push_back(record_to_json_line(r));
    j["records"] = recs;
    j["pretest"] = pretest_ ? observations_json(*pretest_) : json(nullptr);
    // write then rename so a kill never leaves a truncated file
    const auto tmp = std::filesystem::path(file_.string() + ".tmp");
    write_text_file(tmp, j.dump(1) + "\n");
    std::filesystem::rename(tmp, file_);
}

bool InteractiveSession::finished() const {
    return !stages_remaining(config_.sim, static_cast<int>(records_.size()), used_);
}

Design InteractiveSession::aggregate() const {
    std::vector<Design> parts;
    std::vector<double> sizes;
    if (pretest_) {
        parts.push_back(study_.uniform);
        sizes.push_back(config_.sim.pretest_n);
    }
    for (std::size_t i = 0; i < records_.size(); ++i) {
        parts.push_back(records_[i].hybrid);
        sizes.push_back(stage_sizes_[i]);
    }
    double total = 0.0;
    for (double v : sizes) total += v;
    for (double& v : sizes) v /= total;
    return mix(parts, sizes);
}

bool InteractiveSession::read_runs(const std::vector<RoundedRun>& runs, std::istream& in, std::ostream& out,
                                   ObservationSet& data) const {
    const DesignSpace& space = study_.suite.candidates.front().space();
    const auto& names = space.axis_names();
    for (const auto& run : runs) {
        std::vector<int> open;
        for (Eigen::Index k = 0; k < run.point.size(); ++k) {
            if (is_uncontrolled(run.point[k])) open.push_back(static_cast<int>(k));
        }
        for (int r = 0; r < run.runs; ++r) {
            while (true) {
                out << "  run " << r + 1 << '/' << run.runs << " at " << format_point(run.point, names) << ": enter ";
                for (int k : open) out << names[static_cast<std::size_t>(k)] << ' ';
                out << "y > " << std::flush;
                std::string line;
                if (!std::getline(in, line)) return false;
                std::istringstream ls(line);
                std::vector<double> values;
                std::string token;
                bool ok = true;
                while (ls >> token) {
                    try {
                        std::size_t used = 0;
                        values.push_back(std::stod(token, &used));
                        ok = ok && used == token.size() && std::isfinite(values.back());
                    } catch (const std::exception&) {
                        ok = false;
                    }
                }
                if (!ok || values.size() != open.size() + 1) {
                    out << "  expected " << open.size() + 1 << " numbers, try again\n";
                    continue;
                }
                Observation obs{run.point, values.back()};
                for (std::size_t i = 0; i < open.size(); ++i) obs.x[open[i]] = values[i];
                if (!space.contains(obs.x, 1e-9)) {
                    out << "  values outside the design space, try again\n";
                    continue;
                }
                data.rows.push_back(obs);
                break;
            }
        }
    }
    return true;
}

bool InteractiveSession::run(std::istream& in, std::ostream& out) {
    const SimConfig& cfg = config_.sim;
    const auto& models = study_.suite.candidates;
    const auto& names = models.front().space().axis_names();
    StageContext ctx = make_stage_context(cfg, study_, nullptr);

    if (cfg.pretest_n > 0 && !pretest_) {
        const auto runs = pretest_runs(cfg, study_);
        out << "pretest: " << cfg.pretest_n << " runs on the uniform design\n";
        for (const auto& run : runs) out << "  " << format_point(run.point, names) << " x " << run.runs << '\n';
        ObservationSet data;
        if (!read_runs(runs, in, out, data)) return false;
        pretest_ = data;
        used_ = cfg.pretest_n;
        save();
    }
    ctx.pretest = pretest_;

    while (!finished()) {
        const auto stage = static_cast<std::uint64_t>(state_.t);
        Rng select_rng = make_rng(cfg.seed, {0, stage, kSelectionStream});
        const StageSizer sizer = [&](int arm) { return next_stage_size(cfg, arm, used_); };
        const StagePlan plan = plan_stage(state_, ctx, sizer, select_rng);
        out << "stage " << plan.t << ": arm " << model_label(plan.arm) << " (" << models[static_cast<std::size_t>(plan.arm)].id()
            << "), rho = " << plan.rho << ", " << plan.n_runs << " runs\n";
        for (const auto& run : plan.runs) {
            if (run.runs > 0) out << "  " << format_point(run.point, names) << " x " << run.runs << '\n';
        }
        ObservationSet data;
        if (!read_runs(plan.runs, in, out, data)) {
            out << "input ended; stage " << plan.t << " not recorded\n";
            return false;
        }
        const StageRecord rec = complete_stage(state_, ctx, plan, std::move(data));
        records_.push_back(rec);
        stage_sizes_.push_back(plan.n_runs);
        used_ += plan.n_runs;
        save();

        out << "  selected: " << (rec.scores.selected ? model_label(*rec.scores.selected) : std::string("none")) << '\n';
        for (std::size_t j = 0; j < models.size(); ++j) {
            out << "  " << model_label(static_cast<int>(j)) << ": a=" << state_.a[j] << " b=" << state_.b[j]
                << " zeta=" << rec.scores.zeta[j] << (rec.scores.checked[j] ? "" : " (not estimable)")
                << (rec.scores.rejected[j] ? " (rejected)" : "") << '\n';
        }
        out << "  aggregate design so far:\n" << design_to_text(aggregate(), names);
    }
    out << "design complete after " << records_.size() << " stages; most pulled model "
        << model_label(final_model(state_)) << '\n';
    return true;
}

}  // namespace seqdesign
