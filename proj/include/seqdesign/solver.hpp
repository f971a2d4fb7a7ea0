#pragma once

#include "seqdesign/design.hpp"
#include "seqdesign/model.hpp"

#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace seqdesign {

struct SolveOptions {
    double tol = 1e-7;       // on the equivalence gap
    int max_iter = 50000;    // multiplicative iterations
    // After the grid phase, re-optimize weights on the support and, on 1-d
    // spaces, move support points off the grid to local maxima of the
    // sensitivity function.
    bool refine_support = true;
    bool record_trace = false;
};

struct SolveReport {
    Design design;
    double criterion_value = 0.0;
    double equivalence_gap = 0.0;
    int iterations = 0;
    bool converged = false;
    // Objective value per multiplicative iteration on the full grid
    // (record_trace only).
    std::vector<double> trace;
};

/// Locally optimal approximate design for one model on a candidate grid.
/// Throws if the grid cannot estimate the model.
SolveReport solve_locally_optimal(const ModelSpec& model, const Criterion& crit,
                                  std::span<const Point> grid, const SolveOptions& options = {});

/// Kiefer-Wolfowitz certificate over the grid. For D this is
/// max_x g(x)^T I(xi)^{-1} g(x) - p; Phi_q uses the same scale
/// p * (max_x tr(M^{q-1} I(x)) / tr(M^q) - 1). Nonpositive means optimal on
/// the grid. Throws on a singular information matrix.
double equivalence_gap(const ModelSpec& model, const Criterion& crit, const Design& design,
                       std::span<const Point> grid);

/// Maximizes the geometric mean of the models' efficiencies, i.e. the average
/// of log phi_k. The reported gap is max_x sum_k K^{-1} s_k(x) - 1 with s_k the
/// normalized sensitivity of model k.
SolveReport robust_geometric_mean_design(std::span<const ModelSpec> models, const Criterion& crit,
                                         std::span<const Point> grid,
                                         const SolveOptions& options = {});

double compound_equivalence_gap(std::span<const ModelSpec> models, const Criterion& crit,
                                const Design& design, std::span<const Point> grid);

// Union of the models' candidate grids: per axis the finest level any model
// needs, over every axis some model uses.
std::vector<Point> common_grid(std::span<const ModelSpec> models);

/// Thread-safe cache of optimal designs keyed by (model id, criterion, grid).
class DesignCache {
public:
    const SolveReport& get(const ModelSpec& model, const Criterion& crit);
    const SolveReport& get(const ModelSpec& model, const Criterion& crit,
                           std::span<const Point> grid);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, SolveReport> reports_;
};

// Process-wide cache used by the simulation harness and the CLI.
DesignCache& global_design_cache();

}  // namespace seqdesign
