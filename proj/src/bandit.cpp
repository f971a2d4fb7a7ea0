#include "seqdesign/bandit.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace seqdesign {

using nlohmann::json;

BanditState init(int K) {
    if (K < 1) throw std::invalid_argument("bandit: need at least one arm");
    BanditState s;
    s.a.assign(static_cast<std::size_t>(K), 1);
    s.b.assign(static_cast<std::size_t>(K), 1);
    s.N.assign(static_cast<std::size_t>(K), 0);
    s.t = 1;
    return s;
}

int select_arm(const BanditState& state, Rng& rng) {
    int best = 0;
    double best_draw = -1.0;
    for (int j = 0; j < state.arms(); ++j) {
        const auto k = static_cast<std::size_t>(j);
        std::gamma_distribution<double> ga(state.a[k], 1.0);
        std::gamma_distribution<double> gb(state.b[k], 1.0);
        const double x = ga(rng);
        const double y = gb(rng);
        const double eta = x / (x + y);
        if (eta > best_draw) {
            best_draw = eta;
            best = j;
        }
    }
    return best;
}

RhoSchedule RhoSchedule::parse(const std::string& text) {
    RhoSchedule r;
    if (text == "default" || text == "pulls" || text == "exclusive") return r;
    if (text == "inclusive") {
        r.count = Count::inclusive;
        return r;
    }
    if (text == "zero") {
        r.kind = Kind::zero;
        return r;
    }
    const std::string prefix = "constant:";
    if (text.rfind(prefix, 0) == 0) {
        r.kind = Kind::constant;
        std::size_t used = 0;
        const std::string value = text.substr(prefix.size());
        r.c = std::stod(value, &used);
        if (used != value.size() || !(r.c >= 0.0 && r.c < 1.0)) {
            throw std::invalid_argument("rho constant must lie in [0,1)");
        }
        return r;
    }
    throw std::invalid_argument("unknown rho schedule '" + text + "'");
}

std::string RhoSchedule::name() const {
    switch (kind) {
        case Kind::zero: return "zero";
        case Kind::constant: return "constant:" + std::to_string(c);
        case Kind::pulls: break;
    }
    return count == Count::inclusive ? "inclusive" : "default";
}

double rho_schedule(const BanditState& state, int arm, const RhoSchedule& schedule) {
    if (arm < 0 || arm >= state.arms()) throw std::invalid_argument("rho_schedule: bad arm");
    switch (schedule.kind) {
        case RhoSchedule::Kind::zero: return 0.0;
        case RhoSchedule::Kind::constant:
            if (!(schedule.c >= 0.0 && schedule.c < 1.0)) {
                throw std::invalid_argument("rho constant must lie in [0,1)");
            }
            return schedule.c;
        case RhoSchedule::Kind::pulls: break;
    }
    double n = state.N[static_cast<std::size_t>(arm)];
    if (schedule.count == RhoSchedule::Count::inclusive) n += 1.0;
    return n / (n + 1.0);
}

StagePlan plan_stage(const BanditState& state, const StageContext& ctx, int n_t, Rng& rng,
                     bool require_all) {
    return plan_stage(state, ctx, [&](int) { return std::make_pair(n_t, require_all); }, rng);
}

StagePlan plan_stage(const BanditState& state, const StageContext& ctx, const StageSizer& sizer,
                     Rng& rng) {
    if (ctx.optimal.size() != static_cast<std::size_t>(state.arms()) ||
        ctx.models.size() != ctx.optimal.size()) {
        throw std::invalid_argument("stage: one model and one optimal design per arm required");
    }
    StagePlan plan;
    plan.t = state.t;
    plan.arm = select_arm(state, rng);
    const Design& best = ctx.optimal[static_cast<std::size_t>(plan.arm)];
    if (ctx.pretest) {
        plan.rho = 1.0;
        plan.hybrid = best;
    } else if (ctx.rho.kind == RhoSchedule::Kind::zero) {
        // every candidate is estimable from the optimal design alone, so the
        // stage drops the uniform component entirely
        plan.rho = 0.0;
        plan.hybrid = best;
    } else {
        plan.rho = rho_schedule(state, plan.arm, ctx.rho);
        if (plan.rho == 0.0) {
            plan.hybrid = ctx.uniform;
        } else {
            const std::vector<Design> parts{best, ctx.uniform};
            const std::vector<double> alphas{plan.rho, 1.0 - plan.rho};
            plan.hybrid = mix(parts, alphas);
        }
    }
    const auto [n_t, require_all] = sizer(plan.arm);
    if (n_t < 1) throw std::invalid_argument("stage: n_t must be positive");
    if (require_all && static_cast<std::size_t>(n_t) < plan.hybrid.size()) {
        throw std::invalid_argument("stage: n_t is smaller than the hybrid design's support");
    }
    plan.runs = round_design(plan.hybrid, n_t, require_all);
    plan.n_runs = n_t;
    return plan;
}

StageRecord complete_stage(BanditState& state, const StageContext& ctx, const StagePlan& plan,
                           ObservationSet data) {
    if (plan.t != state.t) throw std::invalid_argument("stage: plan does not match the state");
    data.stage = plan.t;
    ObservationSet scored = data;
    if (ctx.pretest) {
        scored = *ctx.pretest;
        scored.append(data);
    }
    StageRecord rec;
    rec.t = plan.t;
    rec.arm = plan.arm;
    rec.rho = plan.rho;
    rec.hybrid = plan.hybrid;
    rec.scores = evaluate_stage(ctx.models, scored, ctx.eval, ctx.gof_level, ctx.gof_reference);
    rec.data = std::move(data);
    if (ctx.true_model) rec.stage_reward = reward(plan.hybrid, *ctx.true_model, ctx.criterion, ctx.minimal_support);
    for (std::size_t j = 0; j < state.a.size(); ++j) {
        if (!rec.scores.checked[j]) continue;
        state.a[j] += rec.scores.zeta[j];
        state.b[j] += 1 - rec.scores.zeta[j];
    }
    ++state.N[static_cast<std::size_t>(plan.arm)];
    ++state.t;
    rec.a_after = state.a;
    rec.b_after = state.b;
    return rec;
}

StageRecord run_stage(BanditState& state, const StageContext& ctx, int n_t,
                      const Responder& responder, Rng& rng, bool require_all) {
    return run_stage(state, ctx, [&](int) { return std::make_pair(n_t, require_all); }, responder, rng);
}

StageRecord run_stage(BanditState& state, const StageContext& ctx, const StageSizer& sizer,
                      const Responder& responder, Rng& rng) {
    const StagePlan plan = plan_stage(state, ctx, sizer, rng);
    ObservationSet data;
    for (const auto& run : plan.runs) {
        for (int r = 0; r < run.runs; ++r) data.rows.push_back(responder(run.point));
    }
    return complete_stage(state, ctx, plan, std::move(data));
}

Design aggregate(std::span<const StageRecord> records, std::span<const int> n_per_stage) {
    if (records.empty()) throw std::invalid_argument("aggregate: no stages");
    if (records.size() != n_per_stage.size()) throw std::invalid_argument("aggregate: size mismatch");
    double n = 0.0;
    for (int v : n_per_stage) {
        if (v <= 0) throw std::invalid_argument("aggregate: stage sizes must be positive");
        n += v;
    }
    std::vector<Design> parts;
    std::vector<double> alphas;
    for (std::size_t i = 0; i < records.size(); ++i) {
        parts.push_back(records[i].hybrid);
        alphas.push_back(n_per_stage[i] / n);
    }
    return mix(parts, alphas);
}

int final_model(const BanditState& state) {
    if (state.N.empty()) throw std::invalid_argument("final_model: no arms");
    return static_cast<int>(std::max_element(state.N.begin(), state.N.end()) - state.N.begin());
}

TheoryBounds theory_bounds(int K, double alpha, int T) {
    if (K < 1) throw std::invalid_argument("theory_bounds: K must be positive");
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("theory_bounds: alpha must lie in (0, 1/2)");
    if (T < 2) throw std::invalid_argument("theory_bounds: T must be at least 2");
    const double a2 = alpha * alpha;
    const double lt = std::log(static_cast<double>(T));
    const double tt = T;
    TheoryBounds out;
    out.misselect_bound = K * (2.0 + 2.0 / a2) + 8.0 * lt / a2;
    out.eff_bound_plain = 1.0 - (8.0 + a2) * lt / (a2 * tt) - (2.0 + 2.0 / a2) * K / tt;
    out.eff_bound_gof = 1.0 - (8.0 * K - 8.0 + a2) * lt / (a2 * tt) - (3.0 + 4.0 / a2) * K / tt - 1.0 / tt;
    return out;
}

namespace {

json point_json(const Point& x) {
    json arr = json::array();
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        if (is_uncontrolled(x[k])) arr.push_back(nullptr);
        else arr.push_back(x[k]);
    }
    return arr;
}

Point point_from(const json& arr) {
    Point x(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t k = 0; k < arr.size(); ++k) {
        x[static_cast<Eigen::Index>(k)] =
            arr[k].is_null() ? std::numeric_limits<double>::quiet_NaN() : arr[k].get<double>();
    }
    return x;
}

json doubles_json(const std::vector<double>& v) {
    json arr = json::array();
    for (double d : v) {
        if (std::isfinite(d)) arr.push_back(d);
        else if (std::isnan(d)) arr.push_back(nullptr);
        else arr.push_back(d > 0 ? "inf" : "-inf");
    }
    return arr;
}

std::vector<double> doubles_from(const json& arr) {
    std::vector<double> v;
    for (const auto& e : arr) {
        if (e.is_null()) v.push_back(std::numeric_limits<double>::quiet_NaN());
        else if (e.is_string()) v.push_back(e.get<std::string>() == "inf" ? std::numeric_limits<double>::infinity()
                                                                          : -std::numeric_limits<double>::infinity());
        else v.push_back(e.get<double>());
    }
    return v;
}

}  // namespace

std::string record_to_json_line(const StageRecord& r) {
    json j;
    j["t"] = r.t;
    j["arm"] = r.arm;
    j["rho"] = r.rho;
    json hybrid = json::array();
    for (std::size_t i = 0; i < r.hybrid.size(); ++i) {
        hybrid.push_back({{"x", point_json(r.hybrid.point(i))}, {"w", r.hybrid.weight(i)}});
    }
    j["hybrid"] = hybrid;
    json data = json::array();
    for (const auto& row : r.data.rows) data.push_back({{"x", point_json(row.x)}, {"y", row.y}});
    j["data"] = data;
    j["zeta"] = r.scores.zeta;
    j["selected"] = r.scores.selected ? json(*r.scores.selected) : json(nullptr);
    std::vector<int> checked(r.scores.checked.begin(), r.scores.checked.end());
    std::vector<int> rejected(r.scores.rejected.begin(), r.scores.rejected.end());
    j["checked"] = checked;
    j["rejected"] = rejected;
    j["bic"] = doubles_json(r.scores.bic);
    j["gof_p"] = doubles_json(r.scores.gof_p_value);
    j["reward"] = r.stage_reward;
    j["a"] = r.a_after;
    j["b"] = r.b_after;
    return j.dump();
}

StageRecord record_from_json_line(const std::string& line) {
    const json j = json::parse(line);
    StageRecord r;
    r.t = j.at("t").get<int>();
    r.arm = j.at("arm").get<int>();
    r.rho = j.at("rho").get<double>();
    std::vector<Point> pts;
    std::vector<double> ws;
    for (const auto& e : j.at("hybrid")) {
        pts.push_back(point_from(e.at("x")));
        ws.push_back(e.at("w").get<double>());
    }
    r.hybrid = Design::normalized(std::move(pts), std::move(ws));
    r.data.stage = r.t;
    for (const auto& e : j.at("data")) r.data.rows.push_back({point_from(e.at("x")), e.at("y").get<double>()});
    r.scores.zeta = j.at("zeta").get<std::vector<int>>();
    if (!j.at("selected").is_null()) r.scores.selected = j.at("selected").get<int>();
    for (int c : j.at("checked").get<std::vector<int>>()) r.scores.checked.push_back(c != 0);
    for (int c : j.at("rejected").get<std::vector<int>>()) r.scores.rejected.push_back(c != 0);
    r.scores.bic = doubles_from(j.at("bic"));
    r.scores.gof_p_value = doubles_from(j.at("gof_p"));
    r.stage_reward = j.at("reward").get<double>();
    r.a_after = j.at("a").get<std::vector<int>>();
    r.b_after = j.at("b").get<std::vector<int>>();
    return r;
}

}  // namespace seqdesign
