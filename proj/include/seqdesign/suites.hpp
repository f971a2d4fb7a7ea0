#pragma once

#include "seqdesign/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace seqdesign {

/// Candidate list for one of the built-in studies.
struct Suite {
    std::string id;
    std::vector<ModelSpec> candidates;
    // Robust-parameter only: the full interaction model behind the robust
    // product design. Never a bandit arm.
    std::optional<ModelSpec> full_model;
};

// Suite ids: "dose-response:delta=<d>", "robust-parameter", "multivariate-linear",
// "trigonometric:degree=<J>". Throws std::invalid_argument for unknown ids.
Suite builtin_suite(const std::string& id);

// Single-model ids, e.g. "emax:delta=3", "linear-dose", "exponential:delta=5",
// "robust-parameter:M2", "robust-parameter:Mfull", "multivariate-linear:M6",
// "trigonometric:degree=2",
// "custom-linear:lower=-1,upper=1,dim=2,sd=1,terms=1+x1+x2+x1*x2".
ModelSpec builtin_model(const std::string& id);

/// var(E[Y|x]) / sigma^2 with x uniform on a 1-d dose interval
/// (dense midpoint rule with 10^4 cells).
double signal_to_noise(const ModelSpec& model);

/// min over model pairs of sup_x |f_i - f_j| on an equispaced grid.
double min_pairwise_sup_distance(const std::vector<ModelSpec>& models, int grid_points = 1001);

}  // namespace seqdesign
