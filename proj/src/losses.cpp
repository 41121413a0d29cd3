#include "rbedl/losses.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rbedl/special.hpp"

namespace rbedl {
namespace {

using special::digamma;
using special::log_gamma;
using special::trigamma;

// Per-class dice sums: numerator N_j = sum_i y_ij p_ij and denominator
// D_j = sum_i y_ij^2 + p_ij^2 + var_ij.
struct DiceSums {
    std::vector<double> numerator;
    std::vector<double> denominator;
};

DiceSums dice_sums(const DirichletField& d, const LabelField& y) {
    const std::size_t k = d.classes();
    const std::size_t n = d.voxels();
    DiceSums sums{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0)};
    for (std::size_t c = 0; c < k; ++c) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double yi = y.onehot(c, i);
            const double p = d.p_hat().at(c, i);
            num += yi * p;
            den += yi * yi + p * p + d.var_term().at(c, i);
        }
        sums.numerator[c] = num;
        sums.denominator[c] = den;
    }
    return sums;
}

// Resolves the per-class Dice weights and their sum W.
std::pair<std::vector<double>, double> resolve_weights(std::size_t k,
                                                       std::optional<std::span<const double>> weights) {
    std::vector<double> w(k, 1.0);
    if (weights) {
        if (weights->size() != k)
            throw ShapeError("loss_dice: expected " + std::to_string(k) + " class weights, got " +
                             std::to_string(weights->size()));
        for (std::size_t c = 0; c < k; ++c) {
            if (!((*weights)[c] > 0.0) || !std::isfinite((*weights)[c]))
                throw std::invalid_argument("loss_dice: class weights must be finite and > 0");
            w[c] = (*weights)[c];
        }
    }
    double total = 0.0;
    for (double v : w) total += v;
    return {std::move(w), total};
}

std::optional<std::vector<double>> dice_weights_for(const LossConfig& cfg, const LabelField& y) {
    if (cfg.kind != LossKind::WDICE) return std::nullopt;
    if (cfg.class_weights) return *cfg.class_weights;
    return class_weights(y);
}

// Chain rule through p_k = alpha_k / S: given explicit partials g_k = dL/dp_k
// and g_s = dL/dS at one voxel, writes dL/dalpha_j into out[j].
void chain_through_probabilities(const DirichletField& d, std::size_t voxel, const double* g, double g_s,
                                 double* out) {
    const std::size_t k = d.classes();
    const double s = d.strength()[voxel];
    double mean_g = 0.0;
    for (std::size_t c = 0; c < k; ++c) mean_g += g[c] * d.p_hat().at(c, voxel);
    for (std::size_t c = 0; c < k; ++c) out[c] = (g[c] - mean_g) / s + g_s;
}

// d data_term / d alpha, shape (K, H, W).
Field data_grad_alpha(const DirichletField& d, const LabelField& y, const LossConfig& cfg) {
    const std::size_t k = d.classes();
    const std::size_t n = d.voxels();
    const double inv_n = 1.0 / static_cast<double>(n);
    Field grad(k, d.height(), d.width(), 0.0);
    std::vector<double> g(k), out(k);

    switch (cfg.kind) {
        case LossKind::ML:
            for (std::size_t i = 0; i < n; ++i) {
                const double s = d.strength()[i];
                for (std::size_t c = 0; c < k; ++c)
                    grad.at(c, i) = inv_n * (1.0 / s - y.onehot(c, i) / d.alpha().at(c, i));
            }
            break;
        case LossKind::CE:
            for (std::size_t i = 0; i < n; ++i) {
                const double ts = trigamma(d.strength()[i]);
                const std::size_t label = y.label(i);
                for (std::size_t c = 0; c < k; ++c) grad.at(c, i) = inv_n * ts;
                grad.at(label, i) -= inv_n * trigamma(d.alpha().at(label, i));
            }
            break;
        case LossKind::MSE:
            for (std::size_t i = 0; i < n; ++i) {
                const double s1 = d.strength()[i] + 1.0;
                double g_s = 0.0;
                for (std::size_t c = 0; c < k; ++c) {
                    const double p = d.p_hat().at(c, i);
                    g[c] = -2.0 * (y.onehot(c, i) - p) + (1.0 - 2.0 * p) / s1;
                    g_s -= p * (1.0 - p) / (s1 * s1);
                }
                chain_through_probabilities(d, i, g.data(), g_s, out.data());
                for (std::size_t c = 0; c < k; ++c) grad.at(c, i) = inv_n * out[c];
            }
            break;
        case LossKind::DICE:
        case LossKind::WDICE: {
            const auto weights = dice_weights_for(cfg, y);
            const auto [w, w_total] =
                resolve_weights(k, weights ? std::optional<std::span<const double>>(*weights) : std::nullopt);
            const DiceSums sums = dice_sums(d, y);
            std::vector<double> ratio_over_den(k), scale(k);
            for (std::size_t c = 0; c < k; ++c) {
                scale[c] = -2.0 * w[c] / w_total;
                ratio_over_den[c] = sums.numerator[c] / (sums.denominator[c] * sums.denominator[c]);
            }
            for (std::size_t i = 0; i < n; ++i) {
                const double s1 = d.strength()[i] + 1.0;
                double g_s = 0.0;
                for (std::size_t c = 0; c < k; ++c) {
                    const double p = d.p_hat().at(c, i);
                    const double dden_dp = 2.0 * p + (1.0 - 2.0 * p) / s1;
                    g[c] = scale[c] *
                           (y.onehot(c, i) / sums.denominator[c] - ratio_over_den[c] * dden_dp);
                    g_s += scale[c] * ratio_over_den[c] * p * (1.0 - p) / (s1 * s1);
                }
                chain_through_probabilities(d, i, g.data(), g_s, out.data());
                for (std::size_t c = 0; c < k; ++c) grad.at(c, i) = out[c];
            }
            break;
        }
    }
    return grad;
}

// d loss_kl / d alpha, shape (K, H, W).
Field kl_grad_alpha(const DirichletField& d, const LabelField& y) {
    const std::size_t k = d.classes();
    const std::size_t n = d.voxels();
    const double inv_n = 1.0 / static_cast<double>(n);
    Field grad(k, d.height(), d.width(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = y.label(i);
        double s_tilde = 0.0;
        for (std::size_t c = 0; c < k; ++c) s_tilde += c == label ? 1.0 : d.alpha().at(c, i);
        const double common = (s_tilde - static_cast<double>(k)) * trigamma(s_tilde);
        for (std::size_t c = 0; c < k; ++c) {
            if (c == label) continue;
            const double a = d.alpha().at(c, i);
            grad.at(c, i) = inv_n * ((a - 1.0) * trigamma(a) - common);
        }
    }
    return grad;
}

}  // namespace

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::ML: return "ml";
        case LossKind::CE: return "ce";
        case LossKind::MSE: return "mse";
        case LossKind::DICE: return "dice";
        case LossKind::WDICE: return "wdice";
    }
    return "?";
}

std::optional<LossKind> parse_loss_kind(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    for (LossKind kind : {LossKind::ML, LossKind::CE, LossKind::MSE, LossKind::DICE, LossKind::WDICE})
        if (to_string(kind) == lower) return kind;
    return std::nullopt;
}

void LossConfig::validate() const {
    if (!(kl_max >= 0.0) || !std::isfinite(kl_max))
        throw std::invalid_argument("LossConfig: kl_max must be finite and >= 0");
    if (anneal_epochs < 1) throw std::invalid_argument("LossConfig: anneal_epochs must be >= 1");
    if (class_weights) {
        for (double w : *class_weights)
            if (!(w > 0.0) || !std::isfinite(w))
                throw std::invalid_argument("LossConfig: class weights must be finite and > 0");
    }
}

double loss_ml(const DirichletField& d, const LabelField& y) {
    require_compatible(d, y);
    double sum = 0.0;
    for (std::size_t i = 0; i < d.voxels(); ++i)
        sum += std::log(d.strength()[i]) - std::log(d.alpha().at(y.label(i), i));
    return sum / static_cast<double>(d.voxels());
}

double loss_ce(const DirichletField& d, const LabelField& y) {
    require_compatible(d, y);
    double sum = 0.0;
    for (std::size_t i = 0; i < d.voxels(); ++i)
        sum += digamma(d.strength()[i]) - digamma(d.alpha().at(y.label(i), i));
    return sum / static_cast<double>(d.voxels());
}

double loss_mse(const DirichletField& d, const LabelField& y) {
    require_compatible(d, y);
    double sum = 0.0;
    for (std::size_t i = 0; i < d.voxels(); ++i) {
        for (std::size_t c = 0; c < d.classes(); ++c) {
            const double diff = y.onehot(c, i) - d.p_hat().at(c, i);
            sum += diff * diff + d.var_term().at(c, i);
        }
    }
    return sum / static_cast<double>(d.voxels());
}

double loss_dice(const DirichletField& d, const LabelField& y, std::optional<std::span<const double>> weights) {
    require_compatible(d, y);
    const auto [w, w_total] = resolve_weights(d.classes(), weights);
    const DiceSums sums = dice_sums(d, y);
    double acc = 0.0;
    for (std::size_t c = 0; c < d.classes(); ++c) acc += w[c] * sums.numerator[c] / sums.denominator[c];
    return 1.0 - 2.0 * acc / w_total;
}

Field dice_denominator(const DirichletField& d, const LabelField& y) {
    require_compatible(d, y);
    Field den(d.classes(), d.height(), d.width());
    for (std::size_t c = 0; c < d.classes(); ++c) {
        for (std::size_t i = 0; i < d.voxels(); ++i) {
            const double yi = y.onehot(c, i);
            const double p = d.p_hat().at(c, i);
            den.at(c, i) = yi * yi + p * p + d.var_term().at(c, i);
        }
    }
    return den;
}

std::vector<double> class_weights(const LabelField& y) {
    const std::size_t k = y.classes();
    const std::size_t n = y.voxels();
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[y.label(i)];
    std::vector<double> w(k);
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t others = n - counts[c];
        if (others == 0)
            throw std::invalid_argument("class_weights: class " + std::to_string(c) +
                                        " covers every voxel, ratio undefined");
        const double raw = 1.0 - static_cast<double>(counts[c]) / static_cast<double>(others);
        w[c] = std::max(raw, kClassWeightFloor);
    }
    return w;
}

double dirichlet_kl_to_uniform(std::span<const double> alpha) {
    const double k = static_cast<double>(alpha.size());
    double s = 0.0;
    for (double a : alpha) s += a;
    const double psi_s = digamma(s);
    double value = log_gamma(s) - log_gamma(k);
    for (double a : alpha) value += -log_gamma(a) + (a - 1.0) * (digamma(a) - psi_s);
    return value;
}

double loss_kl(const DirichletField& d, const LabelField& y) {
    require_compatible(d, y);
    const std::size_t k = d.classes();
    std::vector<double> tilde(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < d.voxels(); ++i) {
        const std::size_t label = y.label(i);
        for (std::size_t c = 0; c < k; ++c) tilde[c] = c == label ? 1.0 : d.alpha().at(c, i);
        sum += dirichlet_kl_to_uniform(tilde);
    }
    return sum / static_cast<double>(d.voxels());
}

double anneal_lambda(int epoch, const LossConfig& cfg) {
    const double progress =
        std::min(1.0, static_cast<double>(std::max(epoch, 0)) / static_cast<double>(cfg.anneal_epochs));
    return cfg.kl_max * progress * progress;
}

double data_loss(const DirichletField& d, const LabelField& y, const LossConfig& cfg) {
    switch (cfg.kind) {
        case LossKind::ML: return loss_ml(d, y);
        case LossKind::CE: return loss_ce(d, y);
        case LossKind::MSE: return loss_mse(d, y);
        case LossKind::DICE: return loss_dice(d, y);
        case LossKind::WDICE: {
            const auto w = dice_weights_for(cfg, y);
            return loss_dice(d, y, std::span<const double>(*w));
        }
    }
    throw std::logic_error("data_loss: unknown loss kind");
}

LossValue loss_edl(const DirichletField& d, const LabelField& y, const LossConfig& cfg, int epoch) {
    cfg.validate();
    LossValue v;
    v.data_term = data_loss(d, y, cfg);
    v.kl_term = loss_kl(d, y);
    v.lambda = anneal_lambda(epoch, cfg);
    v.total = v.data_term + v.lambda * v.kl_term;
    return v;
}

EdlEvaluation evaluate_edl(const EvidenceField& e, const LabelField& y, const LossConfig& cfg, int epoch) {
    const DirichletField d = evidence_to_alpha(e);
    EdlEvaluation out{loss_edl(d, y, cfg, epoch), data_grad_alpha(d, y, cfg)};
    if (out.value.lambda > 0.0) {
        const Field kl = kl_grad_alpha(d, y);
        for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += out.value.lambda * kl[i];
    }
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] *= alpha_derivative(e.data[i]);
    return out;
}

Field grad_loss_edl(const EvidenceField& e, const LabelField& y, const LossConfig& cfg, int epoch) {
    return evaluate_edl(e, y, cfg, epoch).grad;
}

}  // namespace rbedl
