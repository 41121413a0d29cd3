#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rbedl/evidence.hpp"

namespace rbedl {

enum class LossKind { ML, CE, MSE, DICE, WDICE };

std::string_view to_string(LossKind kind);
// Accepts "ml", "ce", "mse", "dice", "wdice" (case-insensitive).
std::optional<LossKind> parse_loss_kind(std::string_view name);

struct LossConfig {
    LossKind kind = LossKind::DICE;
    double kl_max = 0.1;
    int anneal_epochs = 100;
    // Used by WDICE; when absent the weights are derived from each label field.
    std::optional<std::vector<double>> class_weights;

    // Throws std::invalid_argument on kl_max < 0, anneal_epochs < 1 or
    // non-positive weights.
    void validate() const;
};

struct LossValue {
    double total = 0.0;
    double data_term = 0.0;
    double kl_term = 0.0;
    double lambda = 0.0;
};

// Voxel-mean of sum_j y_ij (log S_i - log alpha_ij).
double loss_ml(const DirichletField& d, const LabelField& y);
// Voxel-mean of sum_j y_ij (psi(S_i) - psi(alpha_ij)).
double loss_ce(const DirichletField& d, const LabelField& y);
// Voxel-mean of sum_j (y_ij - p_ij)^2 + p_ij (1 - p_ij) / (S_i + 1).
double loss_mse(const DirichletField& d, const LabelField& y);

// Dirichlet Bayes risk of the soft Dice loss, closed form:
//
//   1 - (2 / W) sum_j w_j  sum_i y_ij p_ij / sum_i (y_ij^2 + p_ij^2 + var_ij)
//
// with w_j = 1, W = K when no weights are given, otherwise W = sum_j w_j.
double loss_dice(const DirichletField& d, const LabelField& y,
                 std::optional<std::span<const double>> weights = std::nullopt);

// Per-entry Dice denominator contribution y_ij^2 + p_ij^2 + var_ij, the
// quantity loss_dice sums over voxels.
Field dice_denominator(const DirichletField& d, const LabelField& y);

// w_j = 1 - n_j / (N - n_j), floored at kClassWeightFloor. Throws
// std::invalid_argument when one class covers every voxel.
inline constexpr double kClassWeightFloor = 1e-3;
std::vector<double> class_weights(const LabelField& y);

// Voxel-mean KL(Dir(alpha~) || Dir(1, ..., 1)) with the correct-class
// parameter replaced by 1: alpha~ = y + (1 - y) * alpha.
double loss_kl(const DirichletField& d, const LabelField& y);

// KL(Dir(alpha) || Dir(1, ..., 1)) for a single parameter vector.
double dirichlet_kl_to_uniform(std::span<const double> alpha);

// kl_max * min(1, epoch / anneal_epochs)^2
double anneal_lambda(int epoch, const LossConfig& cfg = {});

// Data term selected by cfg.kind.
double data_loss(const DirichletField& d, const LabelField& y, const LossConfig& cfg);

LossValue loss_edl(const DirichletField& d, const LabelField& y, const LossConfig& cfg, int epoch);

struct EdlEvaluation {
    LossValue value;
    Field grad;  // d total / d e, shape (K, H, W)
};

// Loss and its analytic gradient with respect to the raw evidence.
EdlEvaluation evaluate_edl(const EvidenceField& e, const LabelField& y, const LossConfig& cfg,
                           int epoch);

Field grad_loss_edl(const EvidenceField& e, const LabelField& y, const LossConfig& cfg, int epoch);

}  // namespace rbedl
