#include "seqdesign/selection.hpp"

#include "seqdesign/design.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace seqdesign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr double kLmTol = 1e-10;
constexpr int kLmMaxIter = 200;
// Boxes for the nonlinear parameter, in multiples of the largest dose:
// ED50 of the Emax model in [0.001, 1.5], exponential rate scale in [0.1, 2].
struct NonlinearBox {
    double lo;
    double hi;
};

NonlinearBox nonlinear_box(const ModelSpec& model) {
    const double top = std::max(std::abs(model.space().upper()[0]), 1e-12);
    if (model.family() == Family::emax) return {0.001 * top, 1.5 * top};
    return {0.1 * top, 2.0 * top};
}

Eigen::VectorXd responses(const ObservationSet& data) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) y[static_cast<Eigen::Index>(i)] = data.rows[i].y;
    return y;
}

Eigen::MatrixXd jacobian(const ModelSpec& model, const ObservationSet& data,
                         const Eigen::VectorXd& beta) {
    Eigen::MatrixXd j(static_cast<Eigen::Index>(data.size()), model.num_params());
    for (std::size_t i = 0; i < data.size(); ++i) {
        j.row(static_cast<Eigen::Index>(i)) = model.grad(data.rows[i].x, beta).transpose();
    }
    return j;
}

// Residuals y - f; false when the model is undefined at beta.
bool residuals(const ModelSpec& model, const ObservationSet& data, const Eigen::VectorXd& beta,
               Eigen::VectorXd& r) {
    r.resize(static_cast<Eigen::Index>(data.size()));
    try {
        for (std::size_t i = 0; i < data.size(); ++i) {
            r[static_cast<Eigen::Index>(i)] = data.rows[i].y - model.mean(data.rows[i].x, beta);
        }
    } catch (const DomainError&) {
        return false;
    }
    return r.allFinite();
}

void project(const ModelSpec& model, Eigen::VectorXd& beta) {
    const NonlinearBox box = nonlinear_box(model);
    beta[2] = std::clamp(beta[2], box.lo, box.hi);
}

FitResult fit_linear(const ModelSpec& model, const ObservationSet& data) {
    const Eigen::MatrixXd x = jacobian(model, data, model.beta());
    const Eigen::VectorXd y = responses(data);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    FitResult out;
    out.n = static_cast<int>(data.size());
    out.p = model.num_params();
    out.beta_hat = qr.solve(y);
    out.rss = (y - x * out.beta_hat).squaredNorm();
    out.converged = true;
    return out;
}

struct LmOutcome {
    Eigen::VectorXd beta;
    double rss = kInf;
    bool converged = false;
};

LmOutcome levenberg_marquardt(const ModelSpec& model, const ObservationSet& data,
                              Eigen::VectorXd beta) {
    LmOutcome out;
    Eigen::VectorXd r;
    project(model, beta);
    if (!residuals(model, data, beta, r)) return out;
    double rss = r.squaredNorm();
    double lambda = 1e-3;
    for (int iter = 0; iter < kLmMaxIter; ++iter) {
        Eigen::MatrixXd j;
        try {
            j = jacobian(model, data, beta);
        } catch (const DomainError&) {
            break;
        }
        const Eigen::MatrixXd jtj = j.transpose() * j;
        const Eigen::VectorXd jtr = j.transpose() * r;
        const Eigen::VectorXd scale = jtj.diagonal().cwiseMax(1e-12);
        bool improved = false;
        while (lambda < 1e16) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += lambda * scale;
            const Eigen::VectorXd step = a.ldlt().solve(jtr);
            Eigen::VectorXd trial = beta + step;
            project(model, trial);
            Eigen::VectorXd trial_r;
            if (step.allFinite() && residuals(model, data, trial, trial_r) &&
                trial_r.squaredNorm() < rss) {
                const double trial_rss = trial_r.squaredNorm();
                const double drop = rss - trial_rss;
                const double move = (trial - beta).norm();
                beta = trial;
                r = trial_r;
                rss = trial_rss;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                if (drop <= kLmTol * std::max(rss, 1e-300) ||
                    move <= kLmTol * (beta.norm() + kLmTol)) {
                    out.converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        // no descent step at any damping: stationary point
        if (!improved) out.converged = true;
        if (out.converged) break;
    }
    out.beta = beta;
    out.rss = rss;
    return out;
}

// Deterministic starting values: five log-spaced points inside the box for
// the nonlinear parameter, the linear ones by least squares given it.
std::array<double, 5> start_lattice(const ModelSpec& model) {
    const NonlinearBox box = nonlinear_box(model);
    std::array<double, 5> out{};
    const double lo = std::log(box.lo), hi = std::log(box.hi);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(lo + (hi - lo) * (i + 0.5) / out.size());
    return out;
}

FitResult fit_nonlinear(const ModelSpec& model, const ObservationSet& data) {
    FitResult best;
    best.n = static_cast<int>(data.size());
    best.p = model.num_params();
    best.rss = kInf;
    best.beta_hat = model.beta();
    const Eigen::VectorXd y = responses(data);
    for (double theta : start_lattice(model)) {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), 2);
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double d = data.rows[i].x[0];
            const double shape = model.family() == Family::emax ? d / (d + theta) : std::exp(d / theta);
            x(static_cast<Eigen::Index>(i), 0) = 1.0;
            x(static_cast<Eigen::Index>(i), 1) = shape;
        }
        const Eigen::VectorXd lin = x.colPivHouseholderQr().solve(y);
        Eigen::VectorXd start(3);
        start << lin[0], lin[1], theta;
        if (!start.allFinite()) continue;
        const LmOutcome lm = levenberg_marquardt(model, data, start);
        if (lm.converged && lm.rss < best.rss) {
            best.beta_hat = lm.beta;
            best.rss = lm.rss;
            best.converged = true;
        }
    }
    return best;
}

}  // namespace

bool ScoreVector::valid() const {
    if (checked.size() != zeta.size()) return false;
    int ones = 0;
    for (std::size_t j = 0; j < zeta.size(); ++j) {
        if (zeta[j] != 0 && zeta[j] != 1) return false;
        if (zeta[j] == 1) {
            ++ones;
            if (!checked[j]) return false;
            if (!selected || *selected != static_cast<int>(j)) return false;
        }
    }
    if (selected) return ones == 1;
    return ones == 0;
}

bool data_estimable(const ModelSpec& model, const ObservationSet& data) {
    if (data.size() < static_cast<std::size_t>(model.num_params())) return false;
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(model.num_params(), model.num_params());
    try {
        for (const auto& row : data.rows) {
            const Eigen::VectorXd g = model.grad(row.x);
            info.noalias() += g * g.transpose();
        }
    } catch (const DomainError&) {
        return false;
    }
    return is_estimable(info);
}

FitResult fit(const ModelSpec& model, const ObservationSet& data) {
    if (data.size() < static_cast<std::size_t>(model.num_params())) {
        throw std::invalid_argument("fit: fewer observations than parameters for " + model.id());
    }
    if (!data_estimable(model, data)) {
        throw std::invalid_argument("fit: data cannot estimate " + model.id());
    }
    if (model.is_linear()) return fit_linear(model, data);
    return fit_nonlinear(model, data);
}

double bic(const FitResult& f) {
    if (!f.converged || !std::isfinite(f.rss)) return kInf;
    const double n = f.n;
    if (f.rss <= 0.0) return -kInf;
    return n * std::log(f.rss / n) + f.p * std::log(n);
}

double bic(const ModelSpec& model, const ObservationSet& data) {
    const FitResult f = fit(model, data);
    double scale = 0.0;
    for (const auto& row : data.rows) scale += row.y * row.y;
    // numerically exact fits
    if (f.converged && f.rss <= 1e-20 * std::max(1.0, scale)) return -kInf;
    return bic(f);
}

namespace {

// Picks the lowest BIC among the eligible models; ties by fewer parameters,
// then by position.
void choose(std::span<const ModelSpec> models, const std::vector<bool>& eligible, ScoreVector& s) {
    std::optional<int> best;
    for (std::size_t j = 0; j < models.size(); ++j) {
        if (!eligible[j] || std::isnan(s.bic[j]) || s.bic[j] == kInf) continue;
        if (!best) {
            best = static_cast<int>(j);
            continue;
        }
        const auto b = static_cast<std::size_t>(*best);
        if (s.bic[j] < s.bic[b] ||
            (s.bic[j] == s.bic[b] && models[j].num_params() < models[b].num_params())) {
            best = static_cast<int>(j);
        }
    }
    s.selected = best;
    if (best) s.zeta[static_cast<std::size_t>(*best)] = 1;
}

ScoreVector empty_scores(std::size_t k) {
    ScoreVector s;
    s.zeta.assign(k, 0);
    s.checked.assign(k, false);
    s.bic.assign(k, kNaN);
    s.gof_p_value.assign(k, kNaN);
    s.rejected.assign(k, false);
    return s;
}

void score_bic(std::span<const ModelSpec> models, const ObservationSet& data, ScoreVector& s) {
    for (std::size_t j = 0; j < models.size(); ++j) {
        s.checked[j] = data_estimable(models[j], data);
        if (s.checked[j]) s.bic[j] = bic(models[j], data);
    }
}

}  // namespace

ScoreVector select_bic(std::span<const ModelSpec> models, const ObservationSet& data) {
    ScoreVector s = empty_scores(models.size());
    score_bic(models, data, s);
    choose(models, s.checked, s);
    return s;
}

GofResult pearson_gof(const ModelSpec& model, const ObservationSet& data, double level,
                      GofReference reference) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("pearson_gof: level must be in (0,1)");
    // group replicated points
    std::vector<Point> distinct;
    std::vector<double> sum;
    std::vector<int> count;
    std::vector<std::size_t> group(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Point& x = data.rows[i].x;
        std::size_t g = 0;
        while (g < distinct.size() && point_distance(distinct[g], x) > 1e-12) ++g;
        if (g == distinct.size()) {
            distinct.push_back(x);
            sum.push_back(0.0);
            count.push_back(0);
        }
        sum[g] += data.rows[i].y;
        ++count[g];
        group[i] = g;
    }
    const int n = static_cast<int>(data.size());
    const int m = static_cast<int>(distinct.size());
    if (n <= m) throw std::invalid_argument("pearson_gof: no replicated points, pure error undefined");
    double pure = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double mean = sum[group[i]] / count[group[i]];
        pure += (data.rows[i].y - mean) * (data.rows[i].y - mean);
    }
    const FitResult f = fit(model, data);
    GofResult out;
    out.df = n - model.num_params();
    out.lof_df = m - model.num_params();
    out.pure_error_df = n - m;
    const double s2 = pure / (n - m);
    if (!(s2 > 0.0)) throw std::invalid_argument("pearson_gof: zero pure-error variance");
    if (!f.converged) {
        out.statistic = kInf;
        out.p_value = 0.0;
        out.reject = true;
        return out;
    }
    out.statistic = f.rss / s2;
    if (reference == GofReference::chi_square_residual) {
        if (out.df < 1) return out;
        boost::math::chi_squared dist(out.df);
        out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
    } else {
        // a saturated model has no lack-of-fit component to test
        if (out.lof_df < 1) return out;
        const double fstat = std::max(0.0, (out.statistic - out.pure_error_df) / out.lof_df);
        boost::math::fisher_f dist(out.lof_df, out.pure_error_df);
        out.p_value = boost::math::cdf(boost::math::complement(dist, fstat));
    }
    out.reject = out.p_value < level;
    return out;
}

ScoreVector evaluate_stage(std::span<const ModelSpec> models, const ObservationSet& data,
                           EvalMode mode, double level, GofReference reference) {
    ScoreVector s = empty_scores(models.size());
    score_bic(models, data, s);
    std::vector<bool> eligible = s.checked;
    if (mode == EvalMode::gof_filtered) {
        for (std::size_t j = 0; j < models.size(); ++j) {
            if (!s.checked[j]) continue;
            try {
                const GofResult g = pearson_gof(models[j], data, level, reference);
                s.gof_p_value[j] = g.p_value;
                s.rejected[j] = g.reject;
            } catch (const std::invalid_argument&) {
                // without replication the test cannot run; the model stays eligible
            }
            eligible[j] = !s.rejected[j];
        }
    }
    choose(models, eligible, s);
    return s;
}

}  // namespace seqdesign
