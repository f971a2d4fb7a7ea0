#include "helpers.hpp"

#include "seqdesign/bandit.hpp"
#include "seqdesign/simharness.hpp"
#include "seqdesign/suites.hpp"

#include <doctest.h>

#include <cmath>

using namespace seqdesign;
using testing::design1;

namespace {

struct DoseFixture {
    SimConfig config;
    Study study;
    DoseFixture(int truth = 0, const std::string& suite = "dose-response:delta=5") {
        config.suite = suite;
        config.true_index = truth;
        study = build_study(config);
    }
    StageContext context(EvalMode mode = EvalMode::plain_bic) {
        config.eval = mode;
        return make_stage_context(config, study, &study.suite.candidates[static_cast<std::size_t>(config.true_index)]);
    }
    Responder responder(Rng& rng) const {
        const ModelSpec& truth = study.suite.candidates[static_cast<std::size_t>(config.true_index)];
        return [&truth, &rng](const Point& x) { return simulate_response(truth, x, rng); };
    }
};

}  // namespace

TEST_CASE("init gives flat priors") {
    const BanditState s = init(3);
    CHECK(s.a == std::vector<int>{1, 1, 1});
    CHECK(s.b == std::vector<int>{1, 1, 1});
    CHECK(s.N == std::vector<int>{0, 0, 0});
    CHECK(s.t == 1);
}

TEST_CASE("arm draws from flat priors are uniform") {
    const BanditState s = init(3);
    std::vector<int> hits(3, 0);
    const int R = 10000;
    for (int r = 0; r < R; ++r) {
        Rng rng = make_rng(5, {static_cast<std::uint64_t>(r)});
        ++hits[static_cast<std::size_t>(select_arm(s, rng))];
    }
    for (int h : hits) CHECK(std::abs(h / double(R) - 1.0 / 3) <= 0.02);
}

TEST_CASE("concentrated posteriors pick the favoured arm") {
    BanditState s = init(2);
    s.a = {100, 1};
    s.b = {1, 100};
    Rng rng(3);
    int zero = 0;
    for (int r = 0; r < 10000; ++r) zero += select_arm(s, rng) == 0;
    CHECK(zero >= 9990);

    const BanditState single = init(1);
    for (int r = 0; r < 10; ++r) CHECK(select_arm(single, rng) == 0);
}

TEST_CASE("rho schedules") {
    BanditState s = init(2);
    const RhoSchedule def = RhoSchedule::parse("default");
    CHECK(rho_schedule(s, 0, def) == 0.0);
    s.N = {3, 0};
    CHECK(rho_schedule(s, 0, def) == doctest::Approx(0.75));
    CHECK(rho_schedule(s, 0, RhoSchedule::parse("inclusive")) == doctest::Approx(0.8));
    CHECK(rho_schedule(s, 1, RhoSchedule::parse("inclusive")) == doctest::Approx(0.5));
    CHECK(rho_schedule(s, 0, RhoSchedule::parse("zero")) == 0.0);
    CHECK(rho_schedule(s, 0, RhoSchedule::parse("constant:0.3")) == doctest::Approx(0.3));
    for (const char* text : {"default", "inclusive", "zero", "constant:0.25"}) {
        const RhoSchedule r = RhoSchedule::parse(text);
        const RhoSchedule back = RhoSchedule::parse(r.name());
        CHECK(back.kind == r.kind);
        CHECK(back.count == r.count);
        CHECK(back.c == r.c);
    }
    CHECK_THROWS(RhoSchedule::parse("constant:1.5"));
    CHECK_THROWS(RhoSchedule::parse("sometimes"));
}

TEST_CASE("final model is the most pulled arm") {
    BanditState s = init(3);
    s.N = {8, 1, 1};
    CHECK(final_model(s) == 0);
    s.N = {2, 5, 5};
    CHECK(final_model(s) == 1);
    CHECK(final_model(init(1)) == 0);
}

TEST_CASE("plain-mode update") {
    DoseFixture fx;
    const StageContext ctx = fx.context();
    BanditState s = init(3);
    Rng rng(1), resp(2);
    const StageRecord rec = run_stage(s, ctx, 15, fx.responder(resp), rng);
    REQUIRE(rec.scores.selected.has_value());
    const int j = *rec.scores.selected;
    for (int k = 0; k < 3; ++k) {
        CHECK(s.a[static_cast<std::size_t>(k)] == (k == j ? 2 : 1));
        CHECK(s.b[static_cast<std::size_t>(k)] == (k == j ? 1 : 2));
    }
    CHECK(s.t == 2);
    CHECK(rec.data.size() == 15);
    CHECK(rec.a_after == s.a);
    CHECK(rec.b_after == s.b);
}

TEST_CASE("unchecked models keep their counters") {
    SimConfig cfg;
    cfg.suite = "multivariate-linear";
    cfg.eval = EvalMode::gof_filtered;
    cfg.n_t = 36;
    const Study study = build_study(cfg);
    StageContext ctx = make_stage_context(cfg, study, &study.suite.candidates[0]);
    // vertex-only stages cannot estimate the quadratic models
    ctx.uniform = uniform_design(study.suite.candidates[0].space(), 8);
    ctx.rho = RhoSchedule::parse("constant:0");
    BanditState s = init(6);
    Rng rng(4), resp(5);
    const ModelSpec& truth = study.suite.candidates[0];
    const Responder responder = [&](const Point& x) { return simulate_response(truth, x, resp); };
    for (int t = 0; t < 5; ++t) {
        const StageRecord rec = run_stage(s, ctx, 36, responder, rng);
        CHECK_FALSE(rec.scores.checked[1]);
        CHECK_FALSE(rec.scores.checked[5]);
    }
    CHECK(s.a[1] == 1);
    CHECK(s.b[1] == 1);
    CHECK(s.a[5] == 1);
    CHECK(s.b[5] == 1);
}

TEST_CASE("counter invariants over many random stages") {
    for (EvalMode mode : {EvalMode::plain_bic, EvalMode::gof_filtered}) {
        DoseFixture fx(1);
        const StageContext ctx = fx.context(mode);
        BanditState s = init(3);
        std::vector<int> checks(3, 0);
        Rng rng(7), resp(8);
        const Responder responder = fx.responder(resp);
        for (int t = 1; t <= 1000; ++t) {
            const std::vector<int> a_before = s.a;
            const StageRecord rec = run_stage(s, ctx, 10, responder, rng, false);
            int total = 0, increments = 0;
            for (int n : s.N) total += n;
            CHECK(total == s.t - 1);
            for (std::size_t j = 0; j < 3; ++j) {
                checks[j] += rec.scores.checked[j];
                CHECK(s.a[j] + s.b[j] - 2 == checks[j]);
                increments += s.a[j] - a_before[j];
            }
            CHECK(increments <= 1);
            CHECK(rec.scores.valid());
        }
    }
}

TEST_CASE("aggregate design") {
    DoseFixture fx;
    const StageContext ctx = fx.context();
    BanditState s = init(3);
    Rng rng(1), resp(2);
    std::vector<StageRecord> recs;
    for (int t = 0; t < 4; ++t) recs.push_back(run_stage(s, ctx, 15, fx.responder(resp), rng));
    const std::vector<int> n{15, 20, 10, 15};
    const Design agg = aggregate(recs, n);
    const ModelSpec& m = fx.study.suite.candidates[0];
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(3, 3);
    for (std::size_t i = 0; i < 4; ++i) expect += (n[i] / 60.0) * info_matrix(m, recs[i].hybrid);
    CHECK((info_matrix(m, agg) - expect).cwiseAbs().maxCoeff() < 1e-12);

    const std::vector<StageRecord> first{recs[0]};
    const std::vector<int> n1{15};
    const Design single = aggregate(first, n1);
    REQUIRE(single.size() == recs[0].hybrid.size());
    for (std::size_t i = 0; i < single.size(); ++i) CHECK(single.weight(i) == doctest::Approx(recs[0].hybrid.weight(i)));
}

TEST_CASE("stages are deterministic under a fixed seed") {
    DoseFixture fx;
    const StageContext ctx = fx.context();
    auto run = [&] {
        BanditState s = init(3);
        std::string out;
        for (int t = 1; t <= 6; ++t) {
            Rng rng = make_rng(42, {0, static_cast<std::uint64_t>(t), kSelectionStream});
            Rng resp = make_rng(42, {0, static_cast<std::uint64_t>(t), kResponseStream});
            out += record_to_json_line(run_stage(s, ctx, 15, fx.responder(resp), rng)) + "\n";
        }
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("stage records survive a JSON round trip") {
    DoseFixture fx;
    const StageContext ctx = fx.context();
    BanditState s = init(3);
    Rng rng(1), resp(2);
    const StageRecord rec = run_stage(s, ctx, 15, fx.responder(resp), rng);
    const std::string line = record_to_json_line(rec);
    CHECK(line.find('\n') == std::string::npos);
    const StageRecord back = record_from_json_line(line);
    CHECK(back.t == rec.t);
    CHECK(back.arm == rec.arm);
    CHECK(back.a_after == rec.a_after);
    CHECK(back.scores.zeta == rec.scores.zeta);
    CHECK(back.data.size() == rec.data.size());
    CHECK(record_to_json_line(back) == line);
}

TEST_CASE("stage size below the hybrid support is an error") {
    DoseFixture fx;
    const StageContext ctx = fx.context();
    BanditState s = init(3);
    Rng rng(1), resp(2);
    CHECK_THROWS(run_stage(s, ctx, 3, fx.responder(resp), rng));
}

TEST_CASE("theory bounds arithmetic") {
    const TheoryBounds b = theory_bounds(3, 0.4, 10);
    CHECK(b.misselect_bound == doctest::Approx(3 * (2 + 12.5) + 8 * std::log(10.0) / 0.16));
    CHECK(b.misselect_bound == doctest::Approx(158.64).epsilon(1e-4));
    CHECK(b.eff_bound_gof <= b.eff_bound_plain);
    double last = -1e300;
    for (int T : {100, 10000, 1000000}) {
        const TheoryBounds x = theory_bounds(3, 0.4, T);
        CHECK(x.eff_bound_plain > last);
        last = x.eff_bound_plain;
        CHECK(x.eff_bound_gof <= x.eff_bound_plain);
    }
    CHECK(last > 0.99);
    CHECK_THROWS(theory_bounds(3, 0.6, 10));
    CHECK_THROWS(theory_bounds(3, 0.0, 10));
    CHECK_THROWS(theory_bounds(3, 0.3, 1));
}
