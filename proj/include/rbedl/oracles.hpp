#pragma once

// Independent verification machinery: Dirichlet sampling, Monte Carlo Bayes
// risk, central finite differences and the loss-property harness. Nothing here
// calls into the analytic gradients, so it can serve as ground truth for them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rbedl/evidence.hpp"
#include "rbedl/rng.hpp"

namespace rbedl::oracles {

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
};

// Gamma(shape, 1) by Marsaglia-Tsang; shape < 1 uses the
// Gamma(shape + 1) * U^(1/shape) boost.
double sample_gamma(double shape, Rng& rng);

std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng);
std::vector<double> sample_dirichlet(std::span<const double> alpha, std::uint64_t seed);

enum class BayesRiskIntegrand { CE, MSE };

// Sample mean and standard error of -sum_j y_j log p_j (CE) or ||y - p||^2
// (MSE) over p ~ Dir(alpha). Requires n >= 1000.
McEstimate mc_bayes_risk(std::span<const double> alpha, std::span<const double> y,
                         BayesRiskIntegrand integrand, std::size_t n, std::uint64_t seed);

// Central differences (f(x + h e_k) - f(x - h e_k)) / 2h for every k.
// Throws std::domain_error if f returns a non-finite value.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h);

// Largest relative deviation |a - b| / max(|a|, |b|, floor) over two gradients.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double absolute_floor = 1e-7);

// alpha = e + 1, the linear evidence mapping, kept here only for comparisons
// against the squared mapping used by the model.
DirichletField linear_evidence_to_alpha(const EvidenceField& evidence);

// Shape of the random instances drawn by the property harness.
struct InstanceOptions {
    std::vector<std::size_t> class_counts{2, 4};
    std::size_t max_side = 8;
    double alpha_max = 50.0;
};

// Random Dirichlet field with K drawn from class_counts, H, W in
// [1, max_side] and alpha uniform in [1, alpha_max], plus uniform labels.
struct RandomInstance {
    Field alpha;
    LabelField labels;
};
RandomInstance random_instance(Rng& rng, const InstanceOptions& options = {});

// Pluggable pieces of the loss under test. Empty members fall back to the
// library implementations; a test can substitute a corrupted version to check
// that the harness notices.
struct TheoremHooks {
    std::function<Field(const DirichletField&, const LabelField&)> dice_denominator;
    std::function<double(const DirichletField&, const LabelField&)> dice_loss;
    std::function<double(std::span<const double>)> kl_to_uniform;
};

struct TheoremReport {
    std::size_t violations = 0;
    std::size_t checks = 0;
    double worst_margin = 0.0;  // smallest observed slack; > 0 means strict everywhere
};

// Perturbation step and strictness threshold of the theorem checks.
inline constexpr double kTheoremStep = 0.5;
inline constexpr double kTheoremSlack = 1e-12;

// Runs one of the four Dice/KL loss properties on `trials` random instances:
//   1  every Dice denominator entry exceeds twice the closed-form variance
//      alpha (S - alpha) / (S^2 (S + 1)), i.e. data-fit term > variance term
//   2  adding evidence to the correct class of a voxel lowers loss_dice,
//      removing it raises loss_dice
//   3  removing evidence from all incorrect classes of a voxel lowers loss_dice
//   4  per-voxel KL on alpha~ strictly increases in every incorrect alpha
// A check is a violation when its margin is <= kTheoremSlack.
//
// Properties 3 and 4 only hold for K = 2. With K >= 3 an incorrect class that
// already carries large evidence can make either check fail, e.g. the KL of
// alpha~ = [1, 1, 50] exceeds that of [1, 1.5, 50].
TheoremReport theorem_check(int theorem_id, std::size_t trials, std::uint64_t seed,
                            const TheoremHooks& hooks = {}, const InstanceOptions& options = {});

}  // namespace rbedl::oracles
