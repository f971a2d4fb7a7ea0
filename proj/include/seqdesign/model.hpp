#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqdesign {

// A design point. Coordinates of uncontrolled noise factors are stored as NaN
// until an observation completes them.
using Point = Eigen::VectorXd;

/// Raised when a mean function or its gradient is evaluated where the model is
/// undefined (singular denominator, overflow, missing coordinate).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

bool is_uncontrolled(double coordinate);
bool has_uncontrolled(const Point& x);

/// Compact design space: a box [lower, upper] or a finite list of points.
///
/// Box spaces may declare noise axes. A noise axis k carries a partner
/// control axis j; when k is left uncontrolled by a design, its value is drawn
/// from U[min(x_j, 0), max(x_j, 0)].
class DesignSpace {
public:
    static DesignSpace interval(double lower, double upper, std::string axis_name = "d");
    static DesignSpace box(Eigen::VectorXd lower, Eigen::VectorXd upper,
                           std::vector<std::string> axis_names,
                           std::vector<int> noise_partner = {});
    static DesignSpace finite(std::vector<Point> points, std::vector<std::string> axis_names);

    int dim() const { return static_cast<int>(axis_names_.size()); }
    bool is_finite() const { return !finite_points_.empty(); }
    const Eigen::VectorXd& lower() const { return lower_; }
    const Eigen::VectorXd& upper() const { return upper_; }
    const std::vector<std::string>& axis_names() const { return axis_names_; }
    const std::vector<Point>& finite_points() const { return finite_points_; }

    // -1 for ordinary control axes.
    int noise_partner(int axis) const { return noise_partner_[static_cast<std::size_t>(axis)]; }
    bool is_noise_axis(int axis) const { return noise_partner(axis) >= 0; }
    int axis_index(const std::string& name) const;

    double diameter() const;
    // Uncontrolled coordinates are accepted on noise axes only.
    bool contains(const Point& x, double slack = 1e-12) const;

    // Equispaced lattice over the selected axes (others left uncontrolled).
    // levels[k] is the number of levels on axis k; ignored for unselected axes.
    std::vector<Point> lattice(const std::vector<int>& levels,
                               const std::vector<bool>& selected) const;

private:
    Eigen::VectorXd lower_;
    Eigen::VectorXd upper_;
    std::vector<std::string> axis_names_;
    std::vector<int> noise_partner_;
    std::vector<Point> finite_points_;
};

enum class Family {
    emax,
    linear_dose,
    exponential_dose,
    robust_parameter,
    multivariate_linear,
    trigonometric,
    custom_linear,
};

std::string family_name(Family family);
bool is_linear_family(Family family);

/// One factor of a regression term: axis^order, cos(order*axis) or sin(order*axis).
struct BasisFactor {
    enum class Kind { power, cosine, sine };
    int axis = 0;
    Kind kind = Kind::power;
    int order = 1;
};

/// Product of factors; no factors means the intercept.
struct BasisTerm {
    std::vector<BasisFactor> factors;
    std::string label;

    double evaluate(const Point& x) const;
    bool is_monomial() const;
};

// Parses "1", "x1", "x1*x2", "x3^2", "cos2(t)", "sin1(t)" against the axis
// names of a space.
BasisTerm parse_basis_term(const std::string& text, const DesignSpace& space);

/// A candidate regression model with its nominal (local) parameter vector.
///
/// Responses are Gaussian with standard deviation noise_sd. Information is
/// reported per unit error variance.
class ModelSpec {
public:
    static ModelSpec emax(std::string id, Eigen::VectorXd beta, DesignSpace space, double noise_sd);
    static ModelSpec linear_dose(std::string id, Eigen::VectorXd beta, DesignSpace space,
                                 double noise_sd);
    static ModelSpec exponential_dose(std::string id, Eigen::VectorXd beta, DesignSpace space,
                                      double noise_sd);
    static ModelSpec linear_basis(std::string id, Family family, std::vector<BasisTerm> basis,
                                  Eigen::VectorXd beta, DesignSpace space, double noise_sd);

    const std::string& id() const { return id_; }
    Family family() const { return family_; }
    const Eigen::VectorXd& beta() const { return beta_; }
    const DesignSpace& space() const { return space_; }
    double noise_sd() const { return noise_sd_; }
    const std::vector<BasisTerm>& basis() const { return basis_; }
    int num_params() const { return static_cast<int>(beta_.size()); }
    bool is_linear() const { return is_linear_family(family_); }

    // Axes the model's mean depends on. Axes outside this set are never
    // controlled by designs for this model.
    const std::vector<bool>& used_axes() const { return used_axes_; }

    double mean(const Point& x) const { return mean(x, beta_); }
    double mean(const Point& x, const Eigen::VectorXd& beta) const;
    Eigen::VectorXd grad(const Point& x) const { return grad(x, beta_); }
    Eigen::VectorXd grad(const Point& x, const Eigen::VectorXd& beta) const;

    // grad grad^T at the nominal beta. A point with uncontrolled noise
    // coordinates yields the expectation over the completion distribution.
    Eigen::MatrixXd fisher_point(const Point& x) const;

    // Candidate grid used by the solver: 201 points on an interval; on boxes
    // the 2^k vertices plus a 5-level lattice on axes where the basis is
    // nonlinear (multilinear axes only need their endpoints).
    std::vector<Point> candidate_grid() const;

    // The same model with another parameter vector.
    ModelSpec with_beta(Eigen::VectorXd beta) const;

private:
    ModelSpec(std::string id, Family family, Eigen::VectorXd beta, DesignSpace space,
              double noise_sd, std::vector<BasisTerm> basis);

    void check_point(const Point& x) const;
    void check_beta(const Eigen::VectorXd& beta) const;

    std::string id_;
    Family family_;
    Eigen::VectorXd beta_;
    DesignSpace space_;
    double noise_sd_;
    std::vector<BasisTerm> basis_;
    std::vector<bool> used_axes_;
};

struct Observation {
    Point x;
    double y = 0.0;
};

/// Responses gathered at one stage; replicated x values are allowed.
struct ObservationSet {
    std::vector<Observation> rows;
    int stage = 0;

    std::size_t size() const { return rows.size(); }
    void append(const ObservationSet& other);
};

}  // namespace seqdesign
