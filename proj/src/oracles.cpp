#include "rbedl/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "rbedl/losses.hpp"

namespace rbedl::oracles {

double sample_gamma(double shape, Rng& rng) {
    if (!(shape > 0.0) || !std::isfinite(shape))
        throw std::invalid_argument("sample_gamma: shape must be finite and > 0");
    if (shape < 1.0) {
        const double boosted = sample_gamma(shape + 1.0, rng);
        return boosted * std::pow(rng.uniform_open(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform_open();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
    if (alpha.empty()) throw std::invalid_argument("sample_dirichlet: empty alpha");
    for (double a : alpha)
        if (!(a > 0.0)) throw std::invalid_argument("sample_dirichlet: alpha must be > 0");
    std::vector<double> p(alpha.size());
    double total = 0.0;
    for (std::size_t j = 0; j < alpha.size(); ++j) {
        p[j] = sample_gamma(alpha[j], rng);
        total += p[j];
    }
    for (double& v : p) v /= total;
    return p;
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, std::uint64_t seed) {
    Rng rng(seed);
    return sample_dirichlet(alpha, rng);
}

McEstimate mc_bayes_risk(std::span<const double> alpha, std::span<const double> y,
                         BayesRiskIntegrand integrand, std::size_t n, std::uint64_t seed) {
    if (n < 1000) throw std::invalid_argument("mc_bayes_risk: need at least 1000 samples");
    if (y.size() != alpha.size()) throw std::invalid_argument("mc_bayes_risk: alpha/y size mismatch");
    Rng rng(seed);
    // Welford accumulation keeps the variance stable at 1e6 samples.
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const auto p = sample_dirichlet(alpha, rng);
        double value = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (integrand == BayesRiskIntegrand::CE) {
                if (y[j] != 0.0) value -= y[j] * std::log(p[j]);
            } else {
                const double diff = y[j] - p[j];
                value += diff * diff;
            }
        }
        if (!std::isfinite(value)) throw std::domain_error("mc_bayes_risk: non-finite integrand");
        const double delta = value - mean;
        mean += delta / static_cast<double>(s + 1);
        m2 += delta * (value - mean);
    }
    const double variance = m2 / static_cast<double>(n - 1);
    return {mean, std::sqrt(variance / static_cast<double>(n)), n};
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be > 0");
    std::vector<double> point(x.begin(), x.end());
    std::vector<double> grad(point.size());
    for (std::size_t k = 0; k < point.size(); ++k) {
        const double saved = point[k];
        point[k] = saved + h;
        const double up = f(point);
        point[k] = saved - h;
        const double down = f(point);
        point[k] = saved;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw std::domain_error("finite_diff_grad: non-finite evaluation at coordinate " +
                                    std::to_string(k));
        grad[k] = (up - down) / (2.0 * h);
    }
    return grad;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double absolute_floor) {
    if (analytic.size() != numeric.size()) throw std::invalid_argument("max_relative_error: size mismatch");
    double worst = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
        const double scale = std::max({std::abs(analytic[k]), std::abs(numeric[k]), absolute_floor});
        worst = std::max(worst, std::abs(analytic[k] - numeric[k]) / scale);
    }
    return worst;
}

DirichletField linear_evidence_to_alpha(const EvidenceField& evidence) {
    Field alpha = evidence.data;
    for (double& a : alpha.values()) {
        if (!std::isfinite(a) || a < 0.0)
            throw ContractViolation("linear_evidence_to_alpha: evidence must be finite and >= 0");
        a += 1.0;
    }
    return DirichletField::from_alpha(std::move(alpha));
}

RandomInstance random_instance(Rng& rng, const InstanceOptions& options) {
    if (options.class_counts.empty() || options.max_side < 1 || !(options.alpha_max > 1.0))
        throw std::invalid_argument("random_instance: invalid options");
    const std::size_t k = options.class_counts[rng.below(options.class_counts.size())];
    if (k < 2) throw std::invalid_argument("random_instance: need at least 2 classes");
    const std::size_t h = 1 + rng.below(options.max_side);
    const std::size_t w = 1 + rng.below(options.max_side);
    Field alpha(k, h, w);
    for (double& a : alpha.values()) a = rng.uniform(1.0, options.alpha_max);
    Grid<std::uint8_t> labels(h, w);
    for (auto& l : labels.values()) l = static_cast<std::uint8_t>(rng.below(k));
    return {std::move(alpha), LabelField(std::move(labels), k)};
}

namespace {

struct Tally {
    TheoremReport report{0, 0, std::numeric_limits<double>::infinity()};

    void record(double margin) {
        ++report.checks;
        report.worst_margin = std::min(report.worst_margin, margin);
        if (!(margin > kTheoremSlack)) ++report.violations;
    }
};

double closed_form_variance(double alpha, double strength) {
    return alpha * (strength - alpha) / (strength * strength * (strength + 1.0));
}

double kl_at(const Field& alpha, const LabelField& y, std::size_t voxel,
             const std::function<double(std::span<const double>)>& kl) {
    std::vector<double> tilde(alpha.channels());
    for (std::size_t c = 0; c < alpha.channels(); ++c)
        tilde[c] = c == y.label(voxel) ? 1.0 : alpha.at(c, voxel);
    return kl(tilde);
}

}  // namespace

TheoremReport theorem_check(int theorem_id, std::size_t trials, std::uint64_t seed, const TheoremHooks& hooks,
                            const InstanceOptions& options) {
    if (theorem_id < 1 || theorem_id > 4) throw std::invalid_argument("theorem_check: id must be 1..4");
    if (trials < 1) throw std::invalid_argument("theorem_check: trials must be >= 1");

    const auto denominator = hooks.dice_denominator ? hooks.dice_denominator
                                                    : std::function<Field(const DirichletField&, const LabelField&)>(
                                                          [](const DirichletField& d, const LabelField& y) {
                                                              return rbedl::dice_denominator(d, y);
                                                          });
    const auto dice = hooks.dice_loss ? hooks.dice_loss
                                      : std::function<double(const DirichletField&, const LabelField&)>(
                                            [](const DirichletField& d, const LabelField& y) {
                                                return rbedl::loss_dice(d, y);
                                            });
    const auto kl = hooks.kl_to_uniform ? hooks.kl_to_uniform
                                        : std::function<double(std::span<const double>)>(
                                              [](std::span<const double> a) { return dirichlet_kl_to_uniform(a); });

    Tally tally;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        Rng rng(derive_seed(seed, trial));
        RandomInstance inst = random_instance(rng, options);
        const std::size_t k = inst.alpha.channels();
        const std::size_t n = inst.alpha.plane_size();
        const LabelField& y = inst.labels;

        switch (theorem_id) {
            case 1: {
                const DirichletField d = DirichletField::from_alpha(inst.alpha);
                const Field den = denominator(d, y);
                for (std::size_t c = 0; c < k; ++c)
                    for (std::size_t i = 0; i < n; ++i)
                        tally.record(den.at(c, i) -
                                     2.0 * closed_form_variance(inst.alpha.at(c, i), d.strength()[i]));
                break;
            }
            case 2: {
                const std::size_t p = rng.below(n);
                const std::size_t c = y.label(p);
                const double base = dice(DirichletField::from_alpha(inst.alpha), y);
                Field more = inst.alpha;
                more.at(c, p) += kTheoremStep;
                tally.record(base - dice(DirichletField::from_alpha(more), y));
                if (inst.alpha.at(c, p) - kTheoremStep >= 1.0) {
                    Field less = inst.alpha;
                    less.at(c, p) -= kTheoremStep;
                    tally.record(dice(DirichletField::from_alpha(less), y) - base);
                }
                break;
            }
            case 3: {
                const std::size_t p = rng.below(n);
                const std::size_t c = y.label(p);
                const double base = dice(DirichletField::from_alpha(inst.alpha), y);
                Field less = inst.alpha;
                for (std::size_t w = 0; w < k; ++w)
                    if (w != c) less.at(w, p) -= std::min(kTheoremStep, less.at(w, p) - 1.0);
                tally.record(base - dice(DirichletField::from_alpha(less), y));
                break;
            }
            case 4: {
                const std::size_t p = rng.below(n);
                const std::size_t c = y.label(p);
                const double base = kl_at(inst.alpha, y, p, kl);
                for (std::size_t w = 0; w < k; ++w) {
                    if (w == c) continue;
                    Field more = inst.alpha;
                    more.at(w, p) += kTheoremStep;
                    tally.record(kl_at(more, y, p, kl) - base);
                }
                break;
            }
        }
    }
    return tally.report;
}

}  // namespace rbedl::oracles
