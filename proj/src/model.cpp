#include "seqdesign/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

namespace seqdesign {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_finite(double value, const char* what) {
    if (!std::isfinite(value)) {
        throw DomainError(std::string(what) + " is not finite");
    }
}

// E[Z^e] for Z ~ U[lo, hi]; a degenerate interval gives lo^e.
double uniform_moment(double lo, double hi, int e) {
    if (e == 0) return 1.0;
    if (hi - lo <= 0.0) return std::pow(lo, e);
    return (std::pow(hi, e + 1) - std::pow(lo, e + 1)) / ((e + 1) * (hi - lo));
}

std::vector<int> monomial_exponents(const BasisTerm& term, int dim) {
    std::vector<int> exps(static_cast<std::size_t>(dim), 0);
    for (const auto& f : term.factors) exps[static_cast<std::size_t>(f.axis)] += f.order;
    return exps;
}

}  // namespace

bool is_uncontrolled(double coordinate) { return std::isnan(coordinate); }

bool has_uncontrolled(const Point& x) {
    return std::any_of(x.begin(), x.end(), [](double v) { return std::isnan(v); });
}

// ---------------------------------------------------------------------------
// DesignSpace

DesignSpace DesignSpace::interval(double lower, double upper, std::string axis_name) {
    Eigen::VectorXd lo(1), hi(1);
    lo << lower;
    hi << upper;
    return box(lo, hi, {std::move(axis_name)});
}

DesignSpace DesignSpace::box(Eigen::VectorXd lower, Eigen::VectorXd upper,
                             std::vector<std::string> axis_names,
                             std::vector<int> noise_partner) {
    if (lower.size() == 0 || lower.size() != upper.size() ||
        static_cast<std::size_t>(lower.size()) != axis_names.size()) {
        throw std::invalid_argument("box space: bounds and axis names must agree in size");
    }
    for (Eigen::Index k = 0; k < lower.size(); ++k) {
        if (!std::isfinite(lower[k]) || !std::isfinite(upper[k]) || lower[k] > upper[k]) {
            throw std::invalid_argument("box space: bounds must be finite with lower <= upper");
        }
    }
    if (noise_partner.empty()) noise_partner.assign(axis_names.size(), -1);
    if (noise_partner.size() != axis_names.size()) {
        throw std::invalid_argument("box space: noise partner list has wrong size");
    }
    for (std::size_t k = 0; k < noise_partner.size(); ++k) {
        const int j = noise_partner[k];
        if (j >= static_cast<int>(axis_names.size()) || j == static_cast<int>(k) ||
            (j >= 0 && noise_partner[static_cast<std::size_t>(j)] >= 0)) {
            throw std::invalid_argument("box space: invalid noise partner for axis " +
                                        axis_names[k]);
        }
    }
    DesignSpace s;
    s.lower_ = std::move(lower);
    s.upper_ = std::move(upper);
    s.axis_names_ = std::move(axis_names);
    s.noise_partner_ = std::move(noise_partner);
    return s;
}

DesignSpace DesignSpace::finite(std::vector<Point> points, std::vector<std::string> axis_names) {
    if (points.empty()) throw std::invalid_argument("finite space: no points");
    const auto dim = static_cast<Eigen::Index>(axis_names.size());
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim, std::numeric_limits<double>::infinity());
    Eigen::VectorXd hi = -lo;
    for (const auto& p : points) {
        if (p.size() != dim) throw std::invalid_argument("finite space: point dimension mismatch");
        if (!p.allFinite()) throw std::invalid_argument("finite space: non-finite point");
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    DesignSpace s;
    s.lower_ = lo;
    s.upper_ = hi;
    s.axis_names_ = std::move(axis_names);
    s.noise_partner_.assign(s.axis_names_.size(), -1);
    s.finite_points_ = std::move(points);
    return s;
}

int DesignSpace::axis_index(const std::string& name) const {
    const auto it = std::find(axis_names_.begin(), axis_names_.end(), name);
    return it == axis_names_.end() ? -1 : static_cast<int>(it - axis_names_.begin());
}

double DesignSpace::diameter() const { return (upper_ - lower_).norm(); }

bool DesignSpace::contains(const Point& x, double slack) const {
    if (x.size() != dim()) return false;
    for (int k = 0; k < dim(); ++k) {
        if (is_uncontrolled(x[k])) {
            if (!is_noise_axis(k)) return false;
            continue;
        }
        if (x[k] < lower_[k] - slack || x[k] > upper_[k] + slack) return false;
    }
    if (is_finite()) {
        const double tol = std::max(slack, 1e-9 * (1.0 + diameter()));
        return std::any_of(finite_points_.begin(), finite_points_.end(),
                           [&](const Point& p) { return (p - x).cwiseAbs().maxCoeff() <= tol; });
    }
    return true;
}

std::vector<Point> DesignSpace::lattice(const std::vector<int>& levels,
                                        const std::vector<bool>& selected) const {
    const int d = dim();
    std::vector<int> count(static_cast<std::size_t>(d), 1);
    std::size_t total = 1;
    for (int k = 0; k < d; ++k) {
        if (selected[static_cast<std::size_t>(k)]) {
            count[static_cast<std::size_t>(k)] = std::max(1, levels[static_cast<std::size_t>(k)]);
            total *= static_cast<std::size_t>(count[static_cast<std::size_t>(k)]);
        }
    }
    std::vector<Point> out;
    out.reserve(total);
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (std::size_t n = 0; n < total; ++n) {
        Point p(d);
        for (int k = 0; k < d; ++k) {
            const auto uk = static_cast<std::size_t>(k);
            if (!selected[uk]) {
                p[k] = is_noise_axis(k) ? kNaN : 0.5 * (lower_[k] + upper_[k]);
            } else if (count[uk] == 1) {
                p[k] = lower_[k];
            } else {
                p[k] = lower_[k] + (upper_[k] - lower_[k]) * idx[uk] / (count[uk] - 1);
            }
        }
        out.push_back(std::move(p));
        // odometer with the last axis fastest
        for (int k = d - 1; k >= 0; --k) {
            const auto uk = static_cast<std::size_t>(k);
            if (++idx[uk] < count[uk]) break;
            idx[uk] = 0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Basis terms

double BasisTerm::evaluate(const Point& x) const {
    double v = 1.0;
    for (const auto& f : factors) {
        const double c = x[f.axis];
        if (is_uncontrolled(c)) throw DomainError("basis term " + label + " needs an uncontrolled coordinate");
        switch (f.kind) {
            case BasisFactor::Kind::power: v *= std::pow(c, f.order); break;
            case BasisFactor::Kind::cosine: v *= std::cos(f.order * c); break;
            case BasisFactor::Kind::sine: v *= std::sin(f.order * c); break;
        }
    }
    return v;
}

bool BasisTerm::is_monomial() const {
    return std::all_of(factors.begin(), factors.end(),
                       [](const BasisFactor& f) { return f.kind == BasisFactor::Kind::power; });
}

BasisTerm parse_basis_term(const std::string& text, const DesignSpace& space) {
    BasisTerm term;
    term.label = text;
    if (text == "1") return term;
    std::stringstream ss(text);
    std::string piece;
    while (std::getline(ss, piece, '*')) {
        BasisFactor f;
        auto fail = [&] { throw std::invalid_argument("cannot parse basis factor '" + piece + "'"); };
        if (piece.rfind("cos", 0) == 0 || piece.rfind("sin", 0) == 0) {
            f.kind = piece[0] == 'c' ? BasisFactor::Kind::cosine : BasisFactor::Kind::sine;
            const auto open = piece.find('(');
            const auto close = piece.find(')');
            if (open == std::string::npos || close == std::string::npos || close < open) fail();
            const std::string order = piece.substr(3, open - 3);
            f.order = order.empty() ? 1 : std::stoi(order);
            f.axis = space.axis_index(piece.substr(open + 1, close - open - 1));
        } else {
            const auto caret = piece.find('^');
            f.axis = space.axis_index(piece.substr(0, caret));
            if (caret != std::string::npos) f.order = std::stoi(piece.substr(caret + 1));
            if (f.order < 1) fail();
        }
        if (f.axis < 0) fail();
        term.factors.push_back(f);
    }
    return term;
}

// ---------------------------------------------------------------------------
// ModelSpec

std::string family_name(Family family) {
    switch (family) {
        case Family::emax: return "emax";
        case Family::linear_dose: return "linear-dose";
        case Family::exponential_dose: return "exponential-dose";
        case Family::robust_parameter: return "robust-parameter";
        case Family::multivariate_linear: return "multivariate-linear";
        case Family::trigonometric: return "trigonometric";
        case Family::custom_linear: return "custom-linear";
    }
    return "unknown";
}

bool is_linear_family(Family family) {
    return family != Family::emax && family != Family::exponential_dose;
}

ModelSpec::ModelSpec(std::string id, Family family, Eigen::VectorXd beta, DesignSpace space,
                     double noise_sd, std::vector<BasisTerm> basis)
    : id_(std::move(id)),
      family_(family),
      beta_(std::move(beta)),
      space_(std::move(space)),
      noise_sd_(noise_sd),
      basis_(std::move(basis)),
      used_axes_(static_cast<std::size_t>(space_.dim()), false) {
    if (!(noise_sd_ >= 0.0) || !std::isfinite(noise_sd_)) {
        throw std::invalid_argument(id_ + ": noise_sd must be finite and nonnegative");
    }
    if (is_linear()) {
        if (basis_.empty()) throw std::invalid_argument(id_ + ": empty basis");
        if (beta_.size() != static_cast<Eigen::Index>(basis_.size())) {
            throw std::invalid_argument(id_ + ": beta length does not match the basis");
        }
        for (const auto& term : basis_) {
            for (const auto& f : term.factors) {
                if (f.axis < 0 || f.axis >= space_.dim()) {
                    throw std::invalid_argument(id_ + ": basis refers to a missing axis");
                }
                used_axes_[static_cast<std::size_t>(f.axis)] = true;
            }
        }
    } else {
        if (space_.dim() != 1) throw std::invalid_argument(id_ + ": dose models need a 1-d space");
        if (beta_.size() != 3) throw std::invalid_argument(id_ + ": dose model needs 3 parameters");
        used_axes_[0] = true;
    }
    if (!beta_.allFinite()) throw std::invalid_argument(id_ + ": beta must be finite");
}

ModelSpec ModelSpec::emax(std::string id, Eigen::VectorXd beta, DesignSpace space, double noise_sd) {
    return ModelSpec(std::move(id), Family::emax, std::move(beta), std::move(space), noise_sd, {});
}

ModelSpec ModelSpec::exponential_dose(std::string id, Eigen::VectorXd beta, DesignSpace space,
                                      double noise_sd) {
    return ModelSpec(std::move(id), Family::exponential_dose, std::move(beta), std::move(space),
                     noise_sd, {});
}

ModelSpec ModelSpec::linear_dose(std::string id, Eigen::VectorXd beta, DesignSpace space,
                                 double noise_sd) {
    std::vector<BasisTerm> basis{parse_basis_term("1", space),
                                 parse_basis_term(space.axis_names().at(0), space)};
    return ModelSpec(std::move(id), Family::linear_dose, std::move(beta), std::move(space),
                     noise_sd, std::move(basis));
}

ModelSpec ModelSpec::linear_basis(std::string id, Family family, std::vector<BasisTerm> basis,
                                  Eigen::VectorXd beta, DesignSpace space, double noise_sd) {
    if (!is_linear_family(family)) throw std::invalid_argument("linear_basis: nonlinear family");
    return ModelSpec(std::move(id), family, std::move(beta), std::move(space), noise_sd,
                     std::move(basis));
}

ModelSpec ModelSpec::with_beta(Eigen::VectorXd beta) const {
    ModelSpec copy = *this;
    if (beta.size() != beta_.size()) throw std::invalid_argument(id_ + ": beta length mismatch");
    copy.beta_ = std::move(beta);
    return copy;
}

void ModelSpec::check_point(const Point& x) const {
    if (x.size() != space_.dim()) {
        throw std::invalid_argument(id_ + ": point dimension does not match the design space");
    }
}

void ModelSpec::check_beta(const Eigen::VectorXd& beta) const {
    if (beta.size() != beta_.size()) {
        throw std::invalid_argument(id_ + ": parameter vector has wrong length");
    }
}

double ModelSpec::mean(const Point& x, const Eigen::VectorXd& beta) const {
    check_point(x);
    check_beta(beta);
    double value = 0.0;
    switch (family_) {
        case Family::emax: {
            const double d = x[0];
            if (is_uncontrolled(d)) throw DomainError(id_ + ": dose is uncontrolled");
            const double denom = d + beta[2];
            if (denom == 0.0) throw DomainError(id_ + ": Emax denominator d + beta2 is zero");
            value = beta[0] + beta[1] * d / denom;
            break;
        }
        case Family::exponential_dose: {
            const double d = x[0];
            if (is_uncontrolled(d)) throw DomainError(id_ + ": dose is uncontrolled");
            if (beta[2] == 0.0) throw DomainError(id_ + ": exponential scale beta2 is zero");
            value = beta[0] + beta[1] * std::exp(d / beta[2]);
            break;
        }
        default:
            for (std::size_t i = 0; i < basis_.size(); ++i) {
                value += beta[static_cast<Eigen::Index>(i)] * basis_[i].evaluate(x);
            }
    }
    require_finite(value, "mean");
    return value;
}

Eigen::VectorXd ModelSpec::grad(const Point& x, const Eigen::VectorXd& beta) const {
    check_point(x);
    check_beta(beta);
    Eigen::VectorXd g(beta.size());
    switch (family_) {
        case Family::emax: {
            const double d = x[0];
            if (is_uncontrolled(d)) throw DomainError(id_ + ": dose is uncontrolled");
            const double denom = d + beta[2];
            if (denom == 0.0) throw DomainError(id_ + ": Emax denominator d + beta2 is zero");
            g << 1.0, d / denom, -beta[1] * d / (denom * denom);
            break;
        }
        case Family::exponential_dose: {
            const double d = x[0];
            if (is_uncontrolled(d)) throw DomainError(id_ + ": dose is uncontrolled");
            if (beta[2] == 0.0) throw DomainError(id_ + ": exponential scale beta2 is zero");
            const double e = std::exp(d / beta[2]);
            g << 1.0, e, -beta[1] * e * d / (beta[2] * beta[2]);
            break;
        }
        default:
            for (std::size_t i = 0; i < basis_.size(); ++i) {
                g[static_cast<Eigen::Index>(i)] = basis_[i].evaluate(x);
            }
    }
    if (!g.allFinite()) throw DomainError(id_ + ": gradient is not finite");
    return g;
}

Eigen::MatrixXd ModelSpec::fisher_point(const Point& x) const {
    check_point(x);
    bool needs_expectation = false;
    for (int k = 0; k < space_.dim(); ++k) {
        if (used_axes_[static_cast<std::size_t>(k)] && is_uncontrolled(x[k])) needs_expectation = true;
    }
    if (!needs_expectation) {
        const Eigen::VectorXd g = grad(x);
        return g * g.transpose();
    }

    // Expected information over the uniform completion of the noise axes.
    // Coordinates are independent, so E[t_a t_b] factorizes into moments.
    const int p = num_params();
    const int d = space_.dim();
    std::vector<std::vector<int>> exps;
    exps.reserve(basis_.size());
    for (const auto& term : basis_) {
        if (!term.is_monomial()) {
            throw DomainError(id_ + ": expected information needs a monomial basis");
        }
        exps.push_back(monomial_exponents(term, d));
    }
    Eigen::MatrixXd info(p, p);
    for (int a = 0; a < p; ++a) {
        for (int b = a; b < p; ++b) {
            double v = 1.0;
            for (int k = 0; k < d; ++k) {
                const int e = exps[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)] +
                              exps[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)];
                if (e == 0) continue;
                if (!is_uncontrolled(x[k])) {
                    v *= std::pow(x[k], e);
                    continue;
                }
                const int partner = space_.noise_partner(k);
                if (partner < 0 || is_uncontrolled(x[partner])) {
                    throw DomainError(id_ + ": axis " + space_.axis_names()[static_cast<std::size_t>(k)] +
                                      " is uncontrolled without a controlled partner");
                }
                const double xp = x[partner];
                v *= uniform_moment(std::min(xp, 0.0), std::max(xp, 0.0), e);
            }
            info(a, b) = v;
            info(b, a) = v;
        }
    }
    return info;
}

std::vector<Point> ModelSpec::candidate_grid() const {
    if (space_.is_finite()) return space_.finite_points();
    const int d = space_.dim();
    if (d == 1) {
        std::vector<int> levels{201};
        return space_.lattice(levels, {true});
    }
    std::vector<int> levels(static_cast<std::size_t>(d), 2);
    for (const auto& term : basis_) {
        for (const auto& f : term.factors) {
            if (f.kind != BasisFactor::Kind::power || f.order > 1) {
                levels[static_cast<std::size_t>(f.axis)] = 5;
            }
        }
    }
    // an axis appearing twice in one term (x1*x1) is nonlinear as well
    for (const auto& term : basis_) {
        std::vector<int> e = monomial_exponents(term, d);
        for (int k = 0; k < d; ++k) {
            if (e[static_cast<std::size_t>(k)] > 1) levels[static_cast<std::size_t>(k)] = 5;
        }
    }
    return space_.lattice(levels, used_axes_);
}

void ObservationSet::append(const ObservationSet& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

}  // namespace seqdesign
