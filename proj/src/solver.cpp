#include "seqdesign/solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace seqdesign {

namespace {

// Per-model piece of the objective sum_k coef_k * log phi_k(I_k(xi)).
struct Component {
    const ModelSpec* model = nullptr;
    double coef = 1.0;
    // Rows f with I(x_i) = sum over rows owned by i of f f^T.
    Eigen::MatrixXd factors;
    std::vector<int> owner;
};

// Spectral quantities of one information matrix under Phi_q.
struct Spectral {
    bool regular = false;
    Eigen::MatrixXd sens;   // M^{q-1}
    double trace_q = 0.0;   // tr(M^q), p for D
    double log_phi = -std::numeric_limits<double>::infinity();
};

Spectral analyze(const Eigen::MatrixXd& m, double q) {
    Spectral s;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const double top = ev.maxCoeff();
    if (!(top > 0.0) || ev.minCoeff() <= kEstimableRelTol * top) return s;
    const auto p = static_cast<double>(ev.size());
    const Eigen::VectorXd pow_qm1 = ev.array().pow(q - 1.0).matrix();
    s.sens = eig.eigenvectors() * pow_qm1.asDiagonal() * eig.eigenvectors().transpose();
    if (q == 0.0) {
        s.trace_q = p;
        s.log_phi = ev.array().log().sum() / p;
    } else {
        s.trace_q = ev.array().pow(q).sum();
        s.log_phi = std::log(top) + std::log((ev.array() / top).pow(q).sum() / p) / q;
    }
    s.regular = true;
    return s;
}

void append_factors(const ModelSpec& model, const Point& x, int owner,
                    std::vector<Eigen::VectorXd>& rows, std::vector<int>& owners) {
    bool expected = false;
    for (int k = 0; k < x.size(); ++k) {
        if (model.used_axes()[static_cast<std::size_t>(k)] && is_uncontrolled(x[k])) expected = true;
    }
    if (!expected) {
        rows.push_back(model.grad(x));
        owners.push_back(owner);
        return;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.fisher_point(x));
    const double top = eig.eigenvalues().maxCoeff();
    for (Eigen::Index c = 0; c < eig.eigenvalues().size(); ++c) {
        const double lambda = eig.eigenvalues()[c];
        if (lambda > 1e-14 * std::max(top, 1.0)) {
            rows.push_back(eig.eigenvectors().col(c) * std::sqrt(lambda));
            owners.push_back(owner);
        }
    }
}

class Problem {
public:
    Problem(std::span<const ModelSpec> models, const Criterion& crit, std::span<const Point> grid,
            double gap_scale)
        : crit_(crit), q_(crit.exponent()), gap_scale_(gap_scale), grid_(grid.begin(), grid.end()) {
        if (models.empty()) throw std::invalid_argument("solver: no models");
        if (grid_.empty()) throw std::invalid_argument("solver: empty grid");
        const double coef = 1.0 / static_cast<double>(models.size());
        for (const auto& model : models) {
            Component c;
            c.model = &model;
            c.coef = coef;
            std::vector<Eigen::VectorXd> rows;
            for (std::size_t i = 0; i < grid_.size(); ++i) {
                if (grid_[i].size() != model.space().dim() || !model.space().contains(grid_[i], 1e-9)) {
                    throw std::invalid_argument("solver: grid point outside the space of " + model.id());
                }
                append_factors(model, grid_[i], static_cast<int>(i), rows, c.owner);
            }
            c.factors.resize(static_cast<Eigen::Index>(rows.size()), model.num_params());
            for (std::size_t r = 0; r < rows.size(); ++r) {
                c.factors.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
            }
            components_.push_back(std::move(c));
        }
        for (const auto& model : models) {
            if (model.space().dim() != 1 || model.space().is_finite()) one_dimensional_ = false;
        }
        if (one_dimensional_) {
            lo_ = models.front().space().lower()[0];
            hi_ = models.front().space().upper()[0];
            std::vector<double> xs;
            for (const auto& g : grid_) xs.push_back(g[0]);
            std::sort(xs.begin(), xs.end());
            spacing_ = hi_ - lo_;
            for (std::size_t i = 1; i < xs.size(); ++i) {
                if (xs[i] - xs[i - 1] > 1e-12) spacing_ = std::min(spacing_, xs[i] - xs[i - 1]);
            }
        }
        xtol_ = kDefaultXtol * std::max(1.0, models.front().space().diameter());
        lambda_ = q_ < 0.0 ? 1.0 / (1.0 - q_) : 1.0;
    }

    std::size_t grid_size() const { return grid_.size(); }
    double xtol() const { return xtol_; }

    // Objective and normalized sensitivities at grid weights w.
    bool evaluate_grid(const Eigen::VectorXd& w, double& objective, Eigen::VectorXd& sens) const {
        objective = 0.0;
        sens = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid_.size()));
        for (const auto& c : components_) {
            Eigen::VectorXd row_w(c.factors.rows());
            for (Eigen::Index r = 0; r < row_w.size(); ++r) row_w[r] = w[c.owner[static_cast<std::size_t>(r)]];
            const Eigen::MatrixXd m = c.factors.transpose() * row_w.asDiagonal() * c.factors;
            const Spectral s = analyze(m, q_);
            if (!s.regular) return false;
            objective += c.coef * s.log_phi;
            const Eigen::VectorXd per_row = ((c.factors * s.sens).cwiseProduct(c.factors)).rowwise().sum();
            for (Eigen::Index r = 0; r < per_row.size(); ++r) {
                sens[c.owner[static_cast<std::size_t>(r)]] += c.coef * per_row[r] / s.trace_q;
            }
        }
        return true;
    }

    std::vector<Spectral> analyze_design(const Design& design) const {
        std::vector<Spectral> out;
        for (const auto& c : components_) out.push_back(analyze(info_matrix(*c.model, design), q_));
        return out;
    }

    static bool all_regular(const std::vector<Spectral>& spectra) {
        return std::all_of(spectra.begin(), spectra.end(), [](const Spectral& s) { return s.regular; });
    }

    double sensitivity_at(const std::vector<Spectral>& spectra, const Point& x) const {
        double s = 0.0;
        for (std::size_t k = 0; k < components_.size(); ++k) {
            const Eigen::MatrixXd info = components_[k].model->fisher_point(x);
            s += components_[k].coef * (spectra[k].sens.cwiseProduct(info)).sum() / spectra[k].trace_q;
        }
        return s;
    }

    double objective_of(const std::vector<Spectral>& spectra) const {
        double v = 0.0;
        for (std::size_t k = 0; k < components_.size(); ++k) v += components_[k].coef * spectra[k].log_phi;
        return v;
    }

    double gap(const Design& design) const {
        const auto spectra = analyze_design(design);
        if (!all_regular(spectra)) {
            throw std::invalid_argument("equivalence gap: singular information matrix");
        }
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& x : grid_) best = std::max(best, sensitivity_at(spectra, x));
        return gap_scale_ * (best - 1.0);
    }

    SolveReport solve(const SolveOptions& options) const {
        SolveReport report;
        const auto n = static_cast<Eigen::Index>(grid_.size());
        Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
        double objective = 0.0;
        Eigen::VectorXd sens;
        if (!evaluate_grid(w, objective, sens)) {
            throw std::invalid_argument("solver: the candidate grid cannot estimate every parameter");
        }
        const int phase_one_cap = options.refine_support ? std::min(options.max_iter, 2000) : options.max_iter;
        const double switch_gap = 1e-3 * gap_scale_;
        int iter = 0;
        double grid_gap = gap_scale_ * (sens.maxCoeff() - 1.0);
        auto multiplicative = [&](int cap, double stop_gap) {
            while (iter < cap) {
                if (options.record_trace) report.trace.push_back(objective);
                grid_gap = gap_scale_ * (sens.maxCoeff() - 1.0);
                if (grid_gap <= stop_gap) break;
                w = w.cwiseProduct(sens.array().pow(lambda_).matrix());
                w /= w.sum();
                ++iter;
                if (!evaluate_grid(w, objective, sens)) {
                    throw std::runtime_error("solver: information matrix became singular");
                }
            }
            grid_gap = gap_scale_ * (sens.maxCoeff() - 1.0);
        };

        multiplicative(phase_one_cap, options.refine_support ? std::max(options.tol, switch_gap) : options.tol);

        Design design = grid_design(w);
        if (options.refine_support && grid_gap > options.tol) {
            bool refined_ok = false;
            Design refined = refine(w, options, iter, refined_ok);
            if (refined_ok) {
                design = std::move(refined);
            } else {
                multiplicative(options.max_iter, options.tol);
                design = grid_design(w);
            }
        }

        const Design pruned = prune(design, kPruneWtol, xtol_);
        design = all_regular(analyze_design(pruned)) ? pruned : design;
        report.design = design;
        report.equivalence_gap = gap(design);
        report.iterations = iter;
        report.converged = report.equivalence_gap <= options.tol;
        report.criterion_value = components_.size() == 1
                                     ? criterion_value(crit_, *components_.front().model, design)
                                     : std::exp(objective_of(analyze_design(design)));
        return report;
    }

private:
    Design grid_design(const Eigen::VectorXd& w) const {
        std::vector<Point> pts;
        std::vector<double> ws;
        const double cutoff = 1e-12 * w.maxCoeff();
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            if (w[i] > cutoff) {
                pts.push_back(grid_[static_cast<std::size_t>(i)]);
                ws.push_back(w[i]);
            }
        }
        return Design::normalized(std::move(pts), std::move(ws), xtol_);
    }

    // Support from grid weights; on 1-d spaces runs of adjacent grid points
    // collapse to their weighted mean.
    void initial_support(const Eigen::VectorXd& w, std::vector<Point>& pts, std::vector<double>& ws) const {
        const double cutoff = 1e-4 * w.maxCoeff();
        std::vector<std::size_t> idx;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            if (w[i] > cutoff) idx.push_back(static_cast<std::size_t>(i));
        }
        if (!one_dimensional_) {
            for (std::size_t i : idx) {
                pts.push_back(grid_[i]);
                ws.push_back(w[static_cast<Eigen::Index>(i)]);
            }
            return;
        }
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return grid_[a][0] < grid_[b][0]; });
        for (std::size_t k = 0; k < idx.size();) {
            double wsum = 0.0, xsum = 0.0;
            double last = grid_[idx[k]][0];
            std::size_t j = k;
            while (j < idx.size() && grid_[idx[j]][0] - last <= 1.01 * spacing_) {
                last = grid_[idx[j]][0];
                wsum += w[static_cast<Eigen::Index>(idx[j])];
                xsum += w[static_cast<Eigen::Index>(idx[j])] * last;
                ++j;
            }
            Point x(1);
            x[0] = xsum / wsum;
            pts.push_back(x);
            ws.push_back(wsum);
            k = j;
        }
    }

    // Multiplicative weight updates restricted to the support.
    void optimize_support_weights(const std::vector<Point>& pts, std::vector<double>& ws, int& iter) const {
        for (int round = 0; round < 20000; ++round) {
            const Design d = Design::normalized(pts, ws, 0.0);
            const auto spectra = analyze_design(d);
            if (!all_regular(spectra)) return;
            // Design sorts its support, so evaluate in that order and map back.
            std::vector<double> s(pts.size());
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < pts.size(); ++i) {
                s[i] = sensitivity_at(spectra, pts[i]);
                if (ws[i] > 0.0) top = std::max(top, s[i]);
            }
            if (top - 1.0 < 1e-13) return;
            double total = 0.0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                ws[i] *= std::pow(s[i], lambda_);
                total += ws[i];
            }
            for (double& v : ws) v /= total;
            ++iter;
        }
    }

    // Moves each interior support point to the local maximum of the
    // sensitivity function within two grid cells.
    double move_support_points(std::vector<Point>& pts, const std::vector<double>& ws) const {
        const Design d = Design::normalized(pts, ws, 0.0);
        const auto spectra = analyze_design(d);
        if (!all_regular(spectra)) return 0.0;
        double moved = 0.0;
        Point probe(1);
        auto f = [&](double x) {
            probe[0] = x;
            return sensitivity_at(spectra, probe);
        };
        const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
        for (auto& p : pts) {
            double a = std::max(lo_, p[0] - 2.0 * spacing_);
            double b = std::min(hi_, p[0] + 2.0 * spacing_);
            double c = b - golden * (b - a);
            double e = a + golden * (b - a);
            double fc = f(c), fe = f(e);
            for (int it = 0; it < 100 && b - a > 1e-13; ++it) {
                if (fc < fe) {
                    a = c;
                    c = e;
                    fc = fe;
                    e = a + golden * (b - a);
                    fe = f(e);
                } else {
                    b = e;
                    e = c;
                    fe = fc;
                    c = b - golden * (b - a);
                    fc = f(c);
                }
            }
            double best = 0.5 * (a + b);
            // the ends of the space are candidates in their own right
            for (double edge : {lo_, hi_}) {
                if (std::abs(edge - best) < 1e-9 || (std::abs(edge - p[0]) <= 2.0 * spacing_ && f(edge) >= f(best))) {
                    best = edge;
                }
            }
            if (f(best) >= f(p[0])) {
                moved = std::max(moved, std::abs(best - p[0]));
                p[0] = best;
            }
        }
        return moved;
    }

    Design refine(const Eigen::VectorXd& w, const SolveOptions& options, int& iter, bool& ok) const {
        ok = false;
        std::vector<Point> pts;
        std::vector<double> ws;
        initial_support(w, pts, ws);
        for (int outer = 0; outer < 30; ++outer) {
            for (int inner = 0; inner < 200; ++inner) {
                optimize_support_weights(pts, ws, iter);
                const double moved = one_dimensional_ ? move_support_points(pts, ws) : 0.0;
                Design merged = Design::normalized(pts, ws, xtol_);
                pts = merged.points();
                ws = merged.weights();
                if (moved < 1e-12) break;
            }
            optimize_support_weights(pts, ws, iter);
            Design candidate = Design::normalized(pts, ws, xtol_);
            const auto spectra = analyze_design(candidate);
            if (!all_regular(spectra)) return candidate;
            // add the grid points that still violate the certificate
            std::vector<std::pair<double, std::size_t>> violators;
            for (std::size_t i = 0; i < grid_.size(); ++i) {
                const double s = sensitivity_at(spectra, grid_[i]);
                if (gap_scale_ * (s - 1.0) > options.tol) violators.emplace_back(s, i);
            }
            if (violators.empty()) {
                ok = true;
                return candidate;
            }
            std::sort(violators.rbegin(), violators.rend());
            const double fresh = 0.05 / static_cast<double>(pts.size());
            for (std::size_t v = 0; v < std::min<std::size_t>(violators.size(), 3); ++v) {
                pts.push_back(grid_[violators[v].second]);
                ws.push_back(fresh);
            }
            const double total = std::accumulate(ws.begin(), ws.end(), 0.0);
            for (double& v : ws) v /= total;
        }
        return Design::normalized(pts, ws, xtol_);
    }

    Criterion crit_;
    double q_;
    double gap_scale_;
    double lambda_ = 1.0;
    double xtol_ = kDefaultXtol;
    std::vector<Point> grid_;
    std::vector<Component> components_;
    bool one_dimensional_ = true;
    double lo_ = 0.0, hi_ = 1.0, spacing_ = 1.0;
};

std::string grid_key(std::span<const Point> grid) {
    // FNV-1a over the raw coordinates
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& p : grid) {
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            const double v = p[k];
            const auto* bytes = reinterpret_cast<const unsigned char*>(&v);
            for (std::size_t b = 0; b < sizeof v; ++b) {
                h ^= bytes[b];
                h *= 1099511628211ULL;
            }
        }
    }
    std::ostringstream os;
    os << grid.size() << ':' << std::hex << h;
    return os.str();
}

}  // namespace

SolveReport solve_locally_optimal(const ModelSpec& model, const Criterion& crit,
                                  std::span<const Point> grid, const SolveOptions& options) {
    const Problem problem(std::span<const ModelSpec>(&model, 1), crit, grid, model.num_params());
    return problem.solve(options);
}

double equivalence_gap(const ModelSpec& model, const Criterion& crit, const Design& design,
                       std::span<const Point> grid) {
    const Problem problem(std::span<const ModelSpec>(&model, 1), crit, grid, model.num_params());
    return problem.gap(design);
}

SolveReport robust_geometric_mean_design(std::span<const ModelSpec> models, const Criterion& crit,
                                         std::span<const Point> grid, const SolveOptions& options) {
    const Problem problem(models, crit, grid, 1.0);
    return problem.solve(options);
}

double compound_equivalence_gap(std::span<const ModelSpec> models, const Criterion& crit,
                                const Design& design, std::span<const Point> grid) {
    const Problem problem(models, crit, grid, 1.0);
    return problem.gap(design);
}

std::vector<Point> common_grid(std::span<const ModelSpec> models) {
    if (models.empty()) throw std::invalid_argument("common_grid: no models");
    const DesignSpace& space = models.front().space();
    if (space.is_finite()) return space.finite_points();
    const int d = space.dim();
    if (d == 1) return models.front().candidate_grid();
    std::vector<int> levels(static_cast<std::size_t>(d), 1);
    std::vector<bool> used(static_cast<std::size_t>(d), false);
    for (const auto& model : models) {
        if (model.space().dim() != d) throw std::invalid_argument("common_grid: spaces differ");
        // recover the per-axis level count from the model's own grid
        const auto grid = model.candidate_grid();
        for (int k = 0; k < d; ++k) {
            if (!model.used_axes()[static_cast<std::size_t>(k)]) continue;
            used[static_cast<std::size_t>(k)] = true;
            std::vector<double> values;
            for (const auto& p : grid) values.push_back(p[k]);
            std::sort(values.begin(), values.end());
            const auto distinct = std::unique(values.begin(), values.end()) - values.begin();
            levels[static_cast<std::size_t>(k)] = std::max(levels[static_cast<std::size_t>(k)],
                                                           static_cast<int>(distinct));
        }
    }
    return space.lattice(levels, used);
}

const SolveReport& DesignCache::get(const ModelSpec& model, const Criterion& crit) {
    const auto grid = model.candidate_grid();
    return get(model, crit, grid);
}

const SolveReport& DesignCache::get(const ModelSpec& model, const Criterion& crit,
                                    std::span<const Point> grid) {
    std::ostringstream key;
    key.precision(17);
    key << model.id() << '|' << crit.name() << '|' << grid_key(grid) << '|' << model.beta().transpose();
    {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto it = reports_.find(key.str());
        if (it != reports_.end()) return it->second;
    }
    SolveReport report = solve_locally_optimal(model, crit, grid);
    std::lock_guard<std::mutex> lock(mutex_);
    return reports_.emplace(key.str(), std::move(report)).first->second;
}

std::size_t DesignCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return reports_.size();
}

DesignCache& global_design_cache() {
    static DesignCache cache;
    return cache;
}

}  // namespace seqdesign
