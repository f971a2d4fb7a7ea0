#pragma once

#include "seqdesign/model.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

namespace seqdesign {

struct FitResult {
    Eigen::VectorXd beta_hat;
    double rss = 0.0;
    int n = 0;
    int p = 0;
    bool converged = false;
};

/// One-hot evaluation outcome of a stage.
struct ScoreVector {
    std::vector<int> zeta;
    std::optional<int> selected;
    std::vector<bool> checked;
    // Diagnostics; NaN where a model was not fitted or not tested.
    std::vector<double> bic;
    std::vector<double> gof_p_value;
    std::vector<bool> rejected;

    std::size_t size() const { return zeta.size(); }
    // zeta one-hot, consistent with selected, zeta[j] = 1 only if checked[j].
    bool valid() const;
};

/// Least squares fit. Linear families use a QR solve; Emax and exponential use
/// Levenberg-Marquardt from five deterministic starts.
/// Throws std::invalid_argument when n < p or the data cannot estimate the model.
FitResult fit(const ModelSpec& model, const ObservationSet& data);

// Information matrix of the observed points at the nominal parameters.
bool data_estimable(const ModelSpec& model, const ObservationSet& data);

/// n log(rss/n) + p log n. An exact fit gives -infinity.
double bic(const FitResult& fit);
double bic(const ModelSpec& model, const ObservationSet& data);

ScoreVector select_bic(std::span<const ModelSpec> models, const ObservationSet& data);

enum class GofReference {
    // Exact lack-of-fit F test: ((stat - (n-m))/(m-p)) against F(m-p, n-m).
    lack_of_fit_f,
    // stat against chi-square with n - p degrees of freedom.
    chi_square_residual,
};

struct GofResult {
    double statistic = 0.0;
    int df = 0;             // n - p
    int lof_df = 0;         // m - p
    int pure_error_df = 0;  // n - m
    double p_value = 1.0;
    bool reject = false;
};

/// Pearson statistic sum (y - mu_hat)^2 / s^2 with s^2 the pure-error
/// variance from replicated points. Throws when no point is replicated.
GofResult pearson_gof(const ModelSpec& model, const ObservationSet& data, double level,
                      GofReference reference = GofReference::lack_of_fit_f);

enum class EvalMode { plain_bic, gof_filtered };

ScoreVector evaluate_stage(std::span<const ModelSpec> models, const ObservationSet& data,
                           EvalMode mode, double level = 0.05,
                           GofReference reference = GofReference::lack_of_fit_f);

}  // namespace seqdesign
