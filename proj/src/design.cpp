#include "seqdesign/design.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace seqdesign {

namespace {

constexpr double kWeightSumTol = 1e-12;

double sort_key(const Point& p) {
    return p.size() == 0 || is_uncontrolled(p[0]) ? -std::numeric_limits<double>::infinity() : p[0];
}

// Merge clusters of points within xtol; location is the weight average.
void merge_close(std::vector<Point>& points, std::vector<double>& weights, double xtol) {
    const std::size_t m = points.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return sort_key(points[a]) < sort_key(points[b]); });

    std::vector<std::size_t> cluster(m, m);  // cluster id per sorted slot
    std::vector<Point> sums;
    std::vector<double> wsum;
    std::vector<Point> reps;
    std::vector<double> rep_key;
    for (std::size_t s = 0; s < m; ++s) {
        const Point& p = points[order[s]];
        const double key = sort_key(p);
        std::size_t found = m;
        for (std::size_t r = reps.size(); r-- > 0;) {
            if (key - rep_key[r] > xtol && std::isfinite(key)) break;
            if (point_distance(reps[r], p) <= xtol) {
                found = r;
                break;
            }
        }
        const double w = weights[order[s]];
        if (found == m) {
            reps.push_back(p);
            rep_key.push_back(key);
            Point scaled = p;
            for (Eigen::Index k = 0; k < scaled.size(); ++k) {
                if (!is_uncontrolled(scaled[k])) scaled[k] *= w;
            }
            sums.push_back(scaled);
            wsum.push_back(w);
            found = reps.size() - 1;
        } else {
            for (Eigen::Index k = 0; k < p.size(); ++k) {
                if (!is_uncontrolled(p[k])) sums[found][k] += w * p[k];
            }
            wsum[found] += w;
        }
        cluster[s] = found;
    }
    std::vector<Point> out_points;
    std::vector<double> out_weights;
    out_points.reserve(reps.size());
    for (std::size_t r = 0; r < reps.size(); ++r) {
        Point loc = reps[r];
        if (wsum[r] > 0.0) {
            for (Eigen::Index k = 0; k < loc.size(); ++k) {
                if (!is_uncontrolled(loc[k])) loc[k] = sums[r][k] / wsum[r];
            }
        }
        out_points.push_back(std::move(loc));
        out_weights.push_back(wsum[r]);
    }
    points = std::move(out_points);
    weights = std::move(out_weights);
}

void sort_support(std::vector<Point>& points, std::vector<double>& weights) {
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return point_less(points[a], points[b]); });
    std::vector<Point> p;
    std::vector<double> w;
    p.reserve(order.size());
    w.reserve(order.size());
    for (std::size_t i : order) {
        p.push_back(std::move(points[i]));
        w.push_back(weights[i]);
    }
    points = std::move(p);
    weights = std::move(w);
}

std::string format_number(double v) {
    if (is_uncontrolled(v)) return "*";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

}  // namespace

double point_distance(const Point& a, const Point& b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double dist = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        const bool ua = is_uncontrolled(a[k]);
        const bool ub = is_uncontrolled(b[k]);
        if (ua && ub) continue;
        if (ua != ub) return std::numeric_limits<double>::infinity();
        dist = std::max(dist, std::abs(a[k] - b[k]));
    }
    return dist;
}

bool point_less(const Point& a, const Point& b) {
    const Eigen::Index n = std::min(a.size(), b.size());
    for (Eigen::Index k = 0; k < n; ++k) {
        const bool ua = is_uncontrolled(a[k]);
        const bool ub = is_uncontrolled(b[k]);
        if (ua && ub) continue;
        if (ua != ub) return ua;
        if (a[k] != b[k]) return a[k] < b[k];
    }
    return a.size() < b.size();
}

// ---------------------------------------------------------------------------
// Design

Design::Design(std::vector<Point> points, std::vector<double> weights, double xtol) {
    if (points.empty()) throw std::invalid_argument("design: no support points");
    if (points.size() != weights.size()) {
        throw std::invalid_argument("design: points and weights differ in length");
    }
    const Eigen::Index dim = points.front().size();
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].size() != dim) throw std::invalid_argument("design: mixed point dimensions");
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
            throw std::invalid_argument("design: weights must be finite and nonnegative");
        }
        for (Eigen::Index k = 0; k < dim; ++k) {
            if (std::isinf(points[i][k])) throw std::invalid_argument("design: infinite coordinate");
        }
        total += weights[i];
    }
    if (std::abs(total - 1.0) > kWeightSumTol) {
        throw std::invalid_argument("design: weights must sum to one");
    }
    merge_close(points, weights, xtol);
    sort_support(points, weights);
    points_ = std::move(points);
    weights_ = std::move(weights);
}

Design Design::normalized(std::vector<Point> points, std::vector<double> weights, double xtol) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw std::invalid_argument("design: weights must have a positive finite sum");
    }
    for (double& w : weights) w /= total;
    // absorb rounding in the largest weight
    const double resid = 1.0 - std::accumulate(weights.begin(), weights.end(), 0.0);
    *std::max_element(weights.begin(), weights.end()) += resid;
    return Design(std::move(points), std::move(weights), xtol);
}

Design Design::single(Point x) { return Design({std::move(x)}, {1.0}); }

// ---------------------------------------------------------------------------
// Criteria

Criterion Criterion::phi(double q) {
    if (!(q < 1.0) || !std::isfinite(q)) throw std::invalid_argument("Phi_q requires finite q < 1");
    if (q == 0.0) return d();
    return {Kind::PhiQ, q};
}

double Criterion::exponent() const {
    switch (kind) {
        case Kind::D: return 0.0;
        case Kind::A: return -1.0;
        case Kind::PhiQ: return q;
    }
    return 0.0;
}

std::string Criterion::name() const {
    switch (kind) {
        case Kind::D: return "D";
        case Kind::A: return "A";
        case Kind::PhiQ: {
            std::ostringstream os;
            os << "phi:q=" << q;
            return os.str();
        }
    }
    return "?";
}

Criterion Criterion::parse(const std::string& text) {
    if (text == "D" || text == "d") return d();
    if (text == "A" || text == "a") return a();
    const std::string prefix = "phi:q=";
    if (text.rfind(prefix, 0) == 0) {
        std::size_t used = 0;
        const std::string tail = text.substr(prefix.size());
        const double q = std::stod(tail, &used);
        if (used != tail.size()) throw std::invalid_argument("bad criterion '" + text + "'");
        return phi(q);
    }
    throw std::invalid_argument("unknown criterion '" + text + "' (expected D, A or phi:q=<q>)");
}

Eigen::MatrixXd info_matrix(const ModelSpec& model, const Design& design) {
    const int p = model.num_params();
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t i = 0; i < design.size(); ++i) {
        info.noalias() += design.weight(i) * model.fisher_point(design.point(i));
    }
    return info;
}

bool is_estimable(const Eigen::MatrixXd& info) {
    if (info.rows() == 0 || !info.allFinite()) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    const double top = ev.maxCoeff();
    return top > 0.0 && ev.minCoeff() > kEstimableRelTol * top;
}

bool is_estimable(const ModelSpec& model, const Design& design) {
    return is_estimable(info_matrix(model, design));
}

double criterion_value(const Criterion& crit, const Eigen::MatrixXd& info) {
    if (info.rows() == 0 || !info.allFinite()) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const double top = ev.maxCoeff();
    if (!(top > 0.0) || ev.minCoeff() <= kEstimableRelTol * top) return 0.0;
    const double p = static_cast<double>(ev.size());
    const double q = crit.exponent();
    if (q == 0.0) return std::exp(ev.array().log().sum() / p);
    // scale out the largest eigenvalue to keep powers in range
    const double mean_pow = (ev.array() / top).pow(q).sum() / p;
    return top * std::pow(mean_pow, 1.0 / q);
}

double criterion_value(const Criterion& crit, const ModelSpec& model, const Design& design) {
    return criterion_value(crit, info_matrix(model, design));
}

double efficiency(const Criterion& crit, const ModelSpec& model, const Design& design,
                  const Design& reference) {
    const double ref = criterion_value(crit, model, reference);
    if (!(ref > 0.0)) throw std::invalid_argument("efficiency: reference design is singular");
    return criterion_value(crit, model, design) / ref;
}

Design mix(std::span<const Design> designs, std::span<const double> alphas, double xtol) {
    if (designs.empty()) throw std::invalid_argument("mix: no designs");
    if (designs.size() != alphas.size()) throw std::invalid_argument("mix: alphas length mismatch");
    double total = 0.0;
    for (double a : alphas) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("mix: negative alpha");
        total += a;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mix: alphas must sum to one");
    std::vector<Point> points;
    std::vector<double> weights;
    for (std::size_t k = 0; k < designs.size(); ++k) {
        if (alphas[k] == 0.0) continue;
        for (std::size_t i = 0; i < designs[k].size(); ++i) {
            points.push_back(designs[k].point(i));
            weights.push_back(alphas[k] / total * designs[k].weight(i));
        }
    }
    return Design::normalized(std::move(points), std::move(weights), xtol);
}

Design uniform_design(const DesignSpace& space, std::size_t m, std::vector<bool> axes) {
    if (m == 0) throw std::invalid_argument("uniform_design: m must be >= 1");
    const int d = space.dim();
    if (space.is_finite()) {
        const auto& pts = space.finite_points();
        if (m > pts.size()) throw std::invalid_argument("uniform_design: m exceeds available grid points");
        std::vector<Point> chosen;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t idx = m == 1 ? 0 : i * (pts.size() - 1) / (m - 1);
            chosen.push_back(pts[idx]);
        }
        return Design(std::move(chosen), std::vector<double>(m, 1.0 / static_cast<double>(m)));
    }
    if (axes.empty()) axes.assign(static_cast<std::size_t>(d), true);
    if (axes.size() != static_cast<std::size_t>(d)) {
        throw std::invalid_argument("uniform_design: axis mask has wrong size");
    }
    const int k = static_cast<int>(std::count(axes.begin(), axes.end(), true));
    if (k == 0) throw std::invalid_argument("uniform_design: no axes selected");
    std::vector<int> levels(static_cast<std::size_t>(d), 1);
    if (k == 1) {
        for (int a = 0; a < d; ++a) levels[static_cast<std::size_t>(a)] = static_cast<int>(m);
    } else {
        // m must be L^k for an integer L >= 2
        const auto level = static_cast<int>(std::lround(std::pow(static_cast<double>(m), 1.0 / k)));
        std::size_t check = 1;
        for (int a = 0; a < k; ++a) check *= static_cast<std::size_t>(std::max(level, 0));
        if (level < 2 || check != m) {
            throw std::invalid_argument("uniform_design: m must be L^k on a " + std::to_string(k) +
                                        "-dimensional box");
        }
        levels.assign(static_cast<std::size_t>(d), level);
    }
    std::vector<Point> pts = space.lattice(levels, axes);
    if (pts.size() != m) throw std::invalid_argument("uniform_design: m exceeds available grid points");
    return Design(std::move(pts), std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

std::vector<RoundedRun> round_design(const Design& design, int n, bool require_all) {
    const std::size_t m = design.size();
    if (m == 0) throw std::invalid_argument("round_design: empty design");
    if (n < 0 || (require_all && static_cast<std::size_t>(n) < m)) {
        throw std::invalid_argument("round_design: n = " + std::to_string(n) +
                                    " is smaller than the support size " + std::to_string(m));
    }
    const int floor_min = require_all ? 1 : 0;
    std::vector<double> quota(m);
    std::vector<int> count(m);
    int total = 0;
    for (std::size_t i = 0; i < m; ++i) {
        quota[i] = n * design.weight(i);
        count[i] = std::max(floor_min, static_cast<int>(std::floor(quota[i] + 1e-9)));
        total += count[i];
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    if (total < n) {
        // largest remainder first, lower point wins ties
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return quota[a] - count[a] > quota[b] - count[b] + 1e-12;
        });
        for (std::size_t k = 0; total < n; k = (k + 1) % m) {
            ++count[order[k]];
            ++total;
        }
    } else if (total > n) {
        // most over-allocated first, higher point gives up ties
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double ra = quota[a] - count[a];
            const double rb = quota[b] - count[b];
            if (std::abs(ra - rb) > 1e-12) return ra < rb;
            return a > b;
        });
        while (total > n) {
            bool moved = false;
            for (std::size_t i : order) {
                if (total == n) break;
                if (count[i] > floor_min) {
                    --count[i];
                    --total;
                    moved = true;
                }
            }
            if (!moved) throw std::logic_error("round_design: cannot reach n");
        }
    }
    std::vector<RoundedRun> runs;
    runs.reserve(m);
    for (std::size_t i = 0; i < m; ++i) runs.push_back({design.point(i), count[i]});
    return runs;
}

Design prune(const Design& design, double wtol, double xtol) {
    std::vector<Point> points;
    std::vector<double> weights;
    for (std::size_t i = 0; i < design.size(); ++i) {
        if (design.weight(i) >= wtol) {
            points.push_back(design.point(i));
            weights.push_back(design.weight(i));
        }
    }
    if (points.empty()) throw std::invalid_argument("prune: every weight is below wtol");
    return Design::normalized(std::move(points), std::move(weights), xtol);
}

double reward(const Design& design, const ModelSpec& true_model, const Criterion& crit,
              std::size_t minimal_support) {
    const double xtol = kDefaultXtol * std::max(1.0, true_model.space().diameter());
    const Design pruned = prune(design, kPruneWtol, xtol);
    if (pruned.size() > minimal_support) return 0.0;
    return criterion_value(crit, true_model, design);
}

std::string design_to_text(const Design& design, const std::vector<std::string>& axis_names) {
    std::ostringstream os;
    os << '#';
    for (int k = 0; k < design.dim(); ++k) {
        os << ' '
           << (static_cast<std::size_t>(k) < axis_names.size() ? axis_names[static_cast<std::size_t>(k)]
                                                               : "x" + std::to_string(k + 1));
    }
    os << " weight\n";
    for (std::size_t i = 0; i < design.size(); ++i) {
        for (int k = 0; k < design.dim(); ++k) os << format_number(design.point(i)[k]) << '\t';
        os << format_number(design.weight(i)) << '\n';
    }
    return os.str();
}

Design design_from_text(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string line;
    std::vector<Point> points;
    std::vector<double> weights;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream row(line);
        std::vector<double> values;
        std::string token;
        while (row >> token) {
            if (token == "*") {
                values.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(token, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != token.size()) {
                throw std::invalid_argument("design text line " + std::to_string(line_no) +
                                            ": bad number '" + token + "'");
            }
            values.push_back(v);
        }
        if (values.size() < 2) {
            throw std::invalid_argument("design text line " + std::to_string(line_no) +
                                        ": expected coordinates and a weight");
        }
        weights.push_back(values.back());
        values.pop_back();
        points.emplace_back(Eigen::Map<Eigen::VectorXd>(values.data(),
                                                       static_cast<Eigen::Index>(values.size())));
    }
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("design text: weights sum to " + std::to_string(total));
    }
    return Design::normalized(std::move(points), std::move(weights));
}

}  // namespace seqdesign
