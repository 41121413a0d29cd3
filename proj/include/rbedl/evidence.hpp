#pragma once

#include <cstddef>
#include <cstdint>

#include "rbedl/tensor.hpp"

namespace rbedl {

// Raw per-voxel, per-class evidence from the network head, shape (K, H, W).
// Values are expected to be finite and >= 0; evidence_to_alpha enforces it.
struct EvidenceField {
    Field data;

    std::size_t classes() const { return data.channels(); }
};

// Dirichlet parameters with the derived quantities every loss reads:
// strength S_i = sum_j alpha_ij, expected probability p_ij = alpha_ij / S_i and
// the variance term p_ij (1 - p_ij) / (S_i + 1). Immutable once built.
class DirichletField {
public:
    // Builds from explicit parameters; every alpha must be finite and >= 1.
    static DirichletField from_alpha(Field alpha);

    // Builds from arbitrary positive parameters (alpha > 0). Only the oracles
    // use this, for the linear alpha = e + 1 comparison and sampling checks.
    static DirichletField from_positive_alpha(Field alpha);

    std::size_t classes() const { return alpha_.channels(); }
    std::size_t height() const { return alpha_.height(); }
    std::size_t width() const { return alpha_.width(); }
    std::size_t voxels() const { return alpha_.plane_size(); }

    const Field& alpha() const { return alpha_; }
    const Grid<double>& strength() const { return strength_; }
    const Field& p_hat() const { return p_hat_; }
    const Field& var_term() const { return var_term_; }

private:
    explicit DirichletField(Field alpha);

    Field alpha_;
    Grid<double> strength_;
    Field p_hat_;
    Field var_term_;
};

// Per-voxel class labels plus the domain ("brain") mask.
class LabelField {
public:
    LabelField() = default;
    // Throws ContractViolation when a label is >= classes or a voxel outside
    // the domain carries a non-background label.
    LabelField(Grid<std::uint8_t> labels, Mask domain_mask, std::size_t classes);
    // Domain mask covering every voxel.
    LabelField(Grid<std::uint8_t> labels, std::size_t classes);

    std::size_t classes() const { return classes_; }
    std::size_t height() const { return labels_.height(); }
    std::size_t width() const { return labels_.width(); }
    std::size_t voxels() const { return labels_.size(); }

    const Grid<std::uint8_t>& labels() const { return labels_; }
    const Mask& domain_mask() const { return domain_mask_; }

    std::uint8_t label(std::size_t voxel) const { return labels_[voxel]; }
    // One-hot view y_ij.
    double onehot(std::size_t cls, std::size_t voxel) const {
        return labels_[voxel] == cls ? 1.0 : 0.0;
    }

private:
    Grid<std::uint8_t> labels_;
    Mask domain_mask_;
    std::size_t classes_ = 0;
};

// alpha_ij = (e_ij + 1)^2. Negative or non-finite evidence is a broken
// activation upstream and raises ContractViolation rather than being clamped.
DirichletField evidence_to_alpha(const EvidenceField& evidence);

// d alpha / d e for the mapping above.
inline double alpha_derivative(double evidence) { return 2.0 * (evidence + 1.0); }

// Throws ShapeError unless the Dirichlet field and labels describe the same grid
// and class count.
void require_compatible(const DirichletField& d, const LabelField& y);

}  // namespace rbedl
