#pragma once

#include "seqdesign/model.hpp"

#include <Eigen/Core>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seqdesign {

inline constexpr double kDefaultXtol = 1e-8;
inline constexpr double kPruneWtol = 1e-6;
inline constexpr double kEstimableRelTol = 1e-9;

/// Approximate design: a probability measure with finite support.
///
/// Support points are kept in lexicographic order (uncontrolled coordinates
/// sort first) and points within xtol of each other (max-norm) are merged,
/// their weights summed and their location weight-averaged.
class Design {
public:
    Design() = default;
    // Weights must be nonnegative and sum to one within 1e-12.
    Design(std::vector<Point> points, std::vector<double> weights, double xtol = kDefaultXtol);

    static Design normalized(std::vector<Point> points, std::vector<double> weights,
                             double xtol = kDefaultXtol);
    static Design single(Point x);

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    int dim() const { return points_.empty() ? 0 : static_cast<int>(points_.front().size()); }
    const std::vector<Point>& points() const { return points_; }
    const std::vector<double>& weights() const { return weights_; }
    const Point& point(std::size_t i) const { return points_[i]; }
    double weight(std::size_t i) const { return weights_[i]; }

private:
    std::vector<Point> points_;
    std::vector<double> weights_;
};

// Max-norm distance; two uncontrolled coordinates match, an uncontrolled and
// a set coordinate never do.
double point_distance(const Point& a, const Point& b);
bool point_less(const Point& a, const Point& b);

/// Information function. D is the log-det limit of the Phi_q family;
/// A is Phi_{-1}.
struct Criterion {
    enum class Kind { D, A, PhiQ };
    Kind kind = Kind::D;
    double q = 0.0;

    static Criterion d() { return {Kind::D, 0.0}; }
    static Criterion a() { return {Kind::A, -1.0}; }
    static Criterion phi(double q);  // q < 1

    // The Phi_q exponent this criterion corresponds to.
    double exponent() const;
    std::string name() const;
    static Criterion parse(const std::string& text);  // "D", "A", "phi:q=-2"
};

Eigen::MatrixXd info_matrix(const ModelSpec& model, const Design& design);

bool is_estimable(const Eigen::MatrixXd& info);
bool is_estimable(const ModelSpec& model, const Design& design);

// phi(M) >= 0, exactly 0 on singular M.
double criterion_value(const Criterion& crit, const Eigen::MatrixXd& info);
double criterion_value(const Criterion& crit, const ModelSpec& model, const Design& design);

// phi(design) / phi(reference); throws if the reference is singular.
double efficiency(const Criterion& crit, const ModelSpec& model, const Design& design,
                  const Design& reference);

// Convex combination; coincident points are merged.
Design mix(std::span<const Design> designs, std::span<const double> alphas,
           double xtol = kDefaultXtol);

/// Equal-weight design with m points: equispaced with endpoints on an
/// interval (m = 1 gives the left endpoint), the 2^k vertices or an L^k
/// lattice on a box, evenly spaced picks from a finite space. Axes not in
/// `axes` are left uncontrolled (noise axes) or fixed at their midpoint.
Design uniform_design(const DesignSpace& space, std::size_t m, std::vector<bool> axes = {});

struct RoundedRun {
    Point point;
    int runs = 0;
};

/// Largest-remainder apportionment of n runs. With require_all every support
/// point gets at least one run (n must be >= support size). Remainder ties go
/// to the lower point.
std::vector<RoundedRun> round_design(const Design& design, int n, bool require_all = true);

// Drops weights below wtol, merges points within xtol, renormalizes.
Design prune(const Design& design, double wtol = kPruneWtol, double xtol = kDefaultXtol);

/// Stage gain phi_true(design) * gamma, where gamma = 1 iff the pruned
/// support size does not exceed minimal_support.
double reward(const Design& design, const ModelSpec& true_model, const Criterion& crit,
              std::size_t minimal_support);

// Tabular text: '#' header, one row per support point, coordinates then
// weight, 15 significant digits; '*' marks an uncontrolled coordinate.
std::string design_to_text(const Design& design, const std::vector<std::string>& axis_names = {});
Design design_from_text(std::string_view text);

}  // namespace seqdesign
