#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ergodiff/expr.hpp"

namespace ergodiff {

// Compact axis-aligned cube strictly inside the open positive orthant.
struct CompactCube {
    std::vector<double> lower;
    std::vector<double> upper;

    int dim() const noexcept { return static_cast<int>(lower.size()); }
    bool contains_interior(std::span<const double> x) const;
    std::vector<double> center() const;
};

CompactCube make_cube(std::vector<double> lower, std::vector<double> upper);

// Parameters of a decoupled square-root component; kept around so the
// simulator can offer an exact-moment sampling scheme for pure CIR models.
struct AffineParams {
    std::vector<double> mu0;
    std::vector<std::vector<double>> mu_offdiag;
    std::vector<double> mu_diag;
    std::vector<double> sigma_diag;

    bool decoupled() const;
};

// Diffusion on G = R_+^n with symbolic coefficients. The diffusion matrix
// a = (1/2) sigma sigma^T is precomputed and simplified at construction so
// the operator machinery can differentiate it exactly.
struct DiffusionModel {
    int n = 0;
    std::vector<Expression> mu;                 // n drift entries
    std::vector<std::vector<Expression>> sigma; // n x n volatility
    std::vector<std::vector<Expression>> a;     // n x n diffusion
    std::string id;
    std::optional<AffineParams> affine; // set by build_affine

    const Expression& diffusion(int i, int j) const { return a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }
};

// Generic constructor: derives a from sigma. Entries may be arbitrary
// expressions; positive definiteness is only sample-checked.
DiffusionModel make_model(int n, std::vector<Expression> mu,
                          std::vector<std::vector<Expression>> sigma, std::string id = {});

// Affine family: drift mu_i = mu0_i + sum_{j != i} offdiag_ij x_j - diag_i x_i,
// volatility sigma_i sqrt(x_i) on the diagonal.
DiffusionModel build_affine(int n, std::span<const double> mu0,
                            const std::vector<std::vector<double>>& mu_offdiag,
                            std::span<const double> mu_diag,
                            std::span<const double> sigma_diag);

// Stochastic-volatility cascade: component 1 is CIR, component i >= 2 has
// volatility sigma_i sqrt(x_{i-1} x_i). Drift as in the affine family.
DiffusionModel build_stochvol_cascade(int n, std::span<const double> mu0,
                                      const std::vector<std::vector<double>>& mu_couplings,
                                      std::span<const double> mu_diag,
                                      std::span<const double> sigma_diag);

struct PdCheckResult {
    bool positive_definite = false;
    std::vector<double> witness;  // first sample where a leading minor <= 0
    double worst_minor = 0.0;     // smallest leading-minor value seen
    int minor_order = 0;          // order of the failing minor at the witness
};

// Evaluates a(x) at low-discrepancy points of the cube (Halton in log
// coordinates) and checks all leading principal minors. Heuristic sampling,
// not a proof.
PdCheckResult check_positive_definite(const DiffusionModel& m, const CompactCube& region,
                                      int samples);

} // namespace ergodiff
