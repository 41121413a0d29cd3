#include "rbedl/evidence.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace rbedl {

DirichletField::DirichletField(Field alpha)
    : alpha_(std::move(alpha)),
      strength_(alpha_.height(), alpha_.width(), 0.0),
      p_hat_(alpha_.channels(), alpha_.height(), alpha_.width()),
      var_term_(alpha_.channels(), alpha_.height(), alpha_.width()) {
    const std::size_t k = alpha_.channels();
    const std::size_t n = alpha_.plane_size();
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < n; ++i) strength_[i] += alpha_.at(c, i);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            const double s = strength_[i];
            const double p = alpha_.at(c, i) / s;
            p_hat_.at(c, i) = p;
            // alpha (S - alpha) / (S^2 (S + 1)) is p (1 - p) / (S + 1) without
            // the cancellation in 1 - p when p is close to 1.
            const double a = alpha_.at(c, i);
            var_term_.at(c, i) = a * (s - a) / (s * s * (s + 1.0));
        }
    }
}

DirichletField DirichletField::from_alpha(Field alpha) {
    if (alpha.channels() < 2) throw ShapeError("DirichletField: need at least 2 classes");
    for (double a : alpha.values()) {
        if (!std::isfinite(a) || a < 1.0)
            throw ContractViolation("DirichletField: alpha must be finite and >= 1, got " +
                                    std::to_string(a));
    }
    return DirichletField(std::move(alpha));
}

DirichletField DirichletField::from_positive_alpha(Field alpha) {
    if (alpha.channels() < 2) throw ShapeError("DirichletField: need at least 2 classes");
    for (double a : alpha.values()) {
        if (!std::isfinite(a) || !(a > 0.0))
            throw ContractViolation("DirichletField: alpha must be finite and > 0, got " +
                                    std::to_string(a));
    }
    return DirichletField(std::move(alpha));
}

LabelField::LabelField(Grid<std::uint8_t> labels, Mask domain_mask, std::size_t classes)
    : labels_(std::move(labels)), domain_mask_(std::move(domain_mask)), classes_(classes) {
    if (classes_ < 2) throw ShapeError("LabelField: need at least 2 classes");
    if (!labels_.same_shape(domain_mask_)) throw ShapeError("LabelField: mask/label shape mismatch");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] >= classes_)
            throw ContractViolation("LabelField: label " + std::to_string(labels_[i]) +
                                    " out of range for " + std::to_string(classes_) + " classes");
        if (!domain_mask_[i] && labels_[i] != 0)
            throw ContractViolation("LabelField: foreground label outside the domain mask");
    }
}

LabelField::LabelField(Grid<std::uint8_t> labels, std::size_t classes)
    : LabelField(labels, Mask(labels.height(), labels.width(), 1), classes) {}

DirichletField evidence_to_alpha(const EvidenceField& evidence) {
    Field alpha(evidence.data.channels(), evidence.data.height(), evidence.data.width());
    const auto& e = evidence.data.values();
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (!std::isfinite(e[i]) || e[i] < 0.0)
            throw ContractViolation("evidence_to_alpha: evidence must be finite and >= 0, got " +
                                    std::to_string(e[i]));
        const double a = e[i] + 1.0;
        alpha[i] = a * a;
    }
    return DirichletField::from_alpha(std::move(alpha));
}

void require_compatible(const DirichletField& d, const LabelField& y) {
    if (d.classes() != y.classes() || d.height() != y.height() || d.width() != y.width())
        throw ShapeError("Dirichlet field (" + std::to_string(d.classes()) + "x" +
                         std::to_string(d.height()) + "x" + std::to_string(d.width()) +
                         ") does not match labels (" + std::to_string(y.classes()) + "x" +
                         std::to_string(y.height()) + "x" + std::to_string(y.width()) + ")");
}

}  // namespace rbedl
