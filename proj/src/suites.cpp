#include "seqdesign/suites.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace seqdesign {

namespace {

struct ParsedId {
    std::string head;
    std::map<std::string, std::string> params;
    std::string tail;  // bare token after ':' such as "M2"
};

ParsedId parse_id(const std::string& id) {
    ParsedId out;
    const auto colon = id.find(':');
    out.head = id.substr(0, colon);
    if (colon == std::string::npos) return out;
    std::stringstream ss(id.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            if (!out.tail.empty()) throw std::invalid_argument("malformed model id '" + id + "'");
            out.tail = item;
        } else {
            out.params[item.substr(0, eq)] = item.substr(eq + 1);
        }
    }
    return out;
}

double param_or(const ParsedId& p, const std::string& key, double fallback) {
    const auto it = p.params.find(key);
    if (it == p.params.end()) return fallback;
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("bad value for " + key);
    return v;
}

void reject_unknown_keys(const ParsedId& p, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : p.params) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw std::invalid_argument("unknown parameter '" + key + "' for " + p.head);
    }
}

Eigen::VectorXd vec(std::initializer_list<double> values) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v[i++] = x;
    return v;
}

std::string delta_tag(double delta) {
    std::ostringstream os;
    os << delta;
    return os.str();
}

constexpr double kDoseSigma = 0.65;

ModelSpec dose_model(const std::string& which, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("dose-response delta must be positive");
    const DesignSpace space = DesignSpace::interval(0.0, 1.0, "d");
    const std::string tag = ":delta=" + delta_tag(delta);
    if (which == "emax") {
        return ModelSpec::emax("emax" + tag, vec({0.2, 0.7 * delta, 0.2}), space, kDoseSigma);
    }
    if (which == "linear-dose") {
        return ModelSpec::linear_dose("linear-dose" + tag, vec({0.2, 0.6 * delta}), space,
                                      kDoseSigma);
    }
    return ModelSpec::exponential_dose("exponential" + tag,
                                       vec({0.0, 0.2, 1.0 / std::log(1.0 + 3.0 * delta)}), space,
                                       kDoseSigma);
}

DesignSpace robust_space() {
    return DesignSpace::box(Eigen::VectorXd::Constant(6, -1.0), Eigen::VectorXd::Constant(6, 1.0),
                            {"x1", "x2", "x3", "z1", "z2", "z3"}, {-1, -1, -1, 0, 1, 2});
}

ModelSpec linear_from_terms(const std::string& id, Family family,
                            const std::vector<std::string>& terms, const DesignSpace& space,
                            double sd) {
    std::vector<BasisTerm> basis;
    basis.reserve(terms.size());
    for (const auto& t : terms) basis.push_back(parse_basis_term(t, space));
    return ModelSpec::linear_basis(id, family, std::move(basis),
                                   Eigen::VectorXd::Ones(static_cast<Eigen::Index>(terms.size())),
                                   space, sd);
}

// Noise factor z with its control-by-noise interactions.
std::vector<std::string> noise_block(const std::string& z, const std::vector<std::string>& xs) {
    std::vector<std::string> out{z};
    for (const auto& x : xs) out.push_back(x + "*" + z);
    return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

ModelSpec robust_model(const std::string& name) {
    const std::vector<std::string> base{"1", "x1", "x2", "x3"};
    const std::vector<std::string> all_x{"x1", "x2", "x3"};
    std::vector<std::string> terms;
    if (name == "M1") terms = base;
    else if (name == "M2") terms = concat(base, noise_block("z1", all_x));
    else if (name == "M3") terms = concat(base, noise_block("z2", all_x));
    else if (name == "M4") terms = concat(base, noise_block("z3", all_x));
    else if (name == "M5")
        terms = concat(concat(base, noise_block("z1", {"x1", "x2"})), noise_block("z3", {"x1", "x3"}));
    else if (name == "M6")
        terms = concat(concat(base, noise_block("z1", {"x1", "x2"})), noise_block("z3", {"x2", "x3"}));
    else if (name == "M7")
        terms = concat(concat(base, noise_block("z1", {"x1", "x3"})), noise_block("z2", {"x2", "x3"}));
    else if (name == "Mfull")
        terms = concat(concat(concat(base, noise_block("z1", all_x)), noise_block("z2", all_x)),
                       noise_block("z3", all_x));
    else
        throw std::invalid_argument("unknown robust-parameter model '" + name + "'");
    return linear_from_terms("robust-parameter:" + name, Family::robust_parameter, terms,
                             robust_space(), 1.0);
}

ModelSpec multivariate_model(const std::string& name) {
    const DesignSpace space = DesignSpace::box(Eigen::VectorXd::Constant(3, -1.0),
                                               Eigen::VectorXd::Constant(3, 1.0),
                                               {"x1", "x2", "x3"});
    const std::vector<std::string> base{"1", "x1", "x2", "x3"};
    std::vector<std::string> extra;
    if (name == "M1") extra = {};
    else if (name == "M2") extra = {"x1*x2", "x3^2"};
    else if (name == "M3") extra = {"x2*x3", "x1^2"};
    else if (name == "M4") extra = {"x1*x2", "x1*x3"};
    else if (name == "M5") extra = {"x1*x2", "x2*x3"};
    else if (name == "M6") extra = {"x1*x2", "x2*x3", "x1*x3", "x1^2", "x2^2", "x3^2"};
    else throw std::invalid_argument("unknown multivariate-linear model '" + name + "'");
    return linear_from_terms("multivariate-linear:" + name, Family::multivariate_linear,
                             concat(base, extra), space, 1.0);
}

ModelSpec trigonometric_model(int degree) {
    if (degree < 1) throw std::invalid_argument("trigonometric degree must be >= 1");
    const DesignSpace space = DesignSpace::interval(0.0, 2.0 * std::numbers::pi, "t");
    std::vector<std::string> terms{"1"};
    for (int l = 1; l <= degree; ++l) {
        terms.push_back("cos" + std::to_string(l) + "(t)");
        terms.push_back("sin" + std::to_string(l) + "(t)");
    }
    return linear_from_terms("trigonometric:degree=" + std::to_string(degree), Family::trigonometric,
                             terms, space, 1.0);
}

ModelSpec custom_model(const ParsedId& p, const std::string& id) {
    reject_unknown_keys(p, {"dim", "lower", "upper", "sd", "terms"});
    const auto dim = static_cast<int>(param_or(p, "dim", 1));
    if (dim < 1) throw std::invalid_argument("custom-linear: dim must be >= 1");
    const double lo = param_or(p, "lower", -1.0);
    const double hi = param_or(p, "upper", 1.0);
    std::vector<std::string> names;
    for (int k = 1; k <= dim; ++k) names.push_back("x" + std::to_string(k));
    const DesignSpace space = DesignSpace::box(Eigen::VectorXd::Constant(dim, lo),
                                               Eigen::VectorXd::Constant(dim, hi), names);
    const auto it = p.params.find("terms");
    if (it == p.params.end()) throw std::invalid_argument("custom-linear: terms= is required");
    std::vector<std::string> terms;
    std::stringstream ss(it->second);
    std::string t;
    while (std::getline(ss, t, '+')) terms.push_back(t);
    return linear_from_terms(id, Family::custom_linear, terms, space, param_or(p, "sd", 1.0));
}

}  // namespace

Suite builtin_suite(const std::string& id) {
    const ParsedId p = parse_id(id);
    Suite suite;
    suite.id = id;
    if (p.head == "dose-response") {
        reject_unknown_keys(p, {"delta"});
        const double delta = param_or(p, "delta", 3.0);
        for (const char* which : {"emax", "linear-dose", "exponential"}) {
            suite.candidates.push_back(dose_model(which, delta));
        }
    } else if (p.head == "robust-parameter") {
        reject_unknown_keys(p, {});
        for (const char* m : {"M1", "M2", "M3", "M4", "M5", "M6", "M7"}) {
            suite.candidates.push_back(robust_model(m));
        }
        suite.full_model = robust_model("Mfull");
    } else if (p.head == "multivariate-linear") {
        reject_unknown_keys(p, {});
        for (const char* m : {"M1", "M2", "M3", "M4", "M5", "M6"}) {
            suite.candidates.push_back(multivariate_model(m));
        }
    } else if (p.head == "trigonometric") {
        reject_unknown_keys(p, {"degree"});
        const auto degree = static_cast<int>(param_or(p, "degree", 3.0));
        for (int j = 1; j <= degree; ++j) suite.candidates.push_back(trigonometric_model(j));
    } else {
        throw std::invalid_argument("unknown suite '" + id + "'");
    }
    return suite;
}

ModelSpec builtin_model(const std::string& id) {
    const ParsedId p = parse_id(id);
    if (p.head == "emax" || p.head == "linear-dose" || p.head == "exponential" ||
        p.head == "exponential-dose") {
        reject_unknown_keys(p, {"delta"});
        if (!p.tail.empty()) throw std::invalid_argument("unexpected token in '" + id + "'");
        const std::string which = p.head == "exponential-dose" ? "exponential" : p.head;
        return dose_model(which, param_or(p, "delta", 3.0));
    }
    if (p.head == "robust-parameter") return robust_model(p.tail);
    if (p.head == "multivariate-linear") return multivariate_model(p.tail);
    if (p.head == "trigonometric") {
        reject_unknown_keys(p, {"degree"});
        return trigonometric_model(static_cast<int>(param_or(p, "degree", 1.0)));
    }
    if (p.head == "custom-linear") return custom_model(p, id);
    throw std::invalid_argument("unknown model id '" + id + "'");
}

double signal_to_noise(const ModelSpec& model) {
    if (model.space().dim() != 1) throw std::invalid_argument("signal_to_noise: 1-d models only");
    const double lo = model.space().lower()[0];
    const double hi = model.space().upper()[0];
    constexpr int cells = 10000;
    double sum = 0.0, sum_sq = 0.0;
    Point x(1);
    for (int i = 0; i < cells; ++i) {
        x[0] = lo + (hi - lo) * (i + 0.5) / cells;
        const double f = model.mean(x);
        sum += f;
        sum_sq += f * f;
    }
    const double mean = sum / cells;
    const double var = sum_sq / cells - mean * mean;
    return var / (model.noise_sd() * model.noise_sd());
}

double min_pairwise_sup_distance(const std::vector<ModelSpec>& models, int grid_points) {
    if (models.size() < 2) throw std::invalid_argument("need at least two models");
    if (grid_points < 2) throw std::invalid_argument("need at least two grid points");
    const DesignSpace& space = models.front().space();
    if (space.dim() != 1) throw std::invalid_argument("min_pairwise_sup_distance: 1-d models only");
    const double lo = space.lower()[0];
    const double hi = space.upper()[0];
    double best = std::numeric_limits<double>::infinity();
    Point x(1);
    for (std::size_t i = 0; i < models.size(); ++i) {
        for (std::size_t j = i + 1; j < models.size(); ++j) {
            double sup = 0.0;
            for (int g = 0; g < grid_points; ++g) {
                x[0] = lo + (hi - lo) * g / (grid_points - 1);
                sup = std::max(sup, std::abs(models[i].mean(x) - models[j].mean(x)));
            }
            best = std::min(best, sup);
        }
    }
    return best;
}

}  // namespace seqdesign
