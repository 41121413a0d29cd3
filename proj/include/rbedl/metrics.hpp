#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rbedl/evidence.hpp"

namespace rbedl {

// Per-voxel normalized predictive entropy, values in [0, 1].
struct UncertaintyMap {
    Grid<double> values;
};

// -(1 / log K) sum_j p_ij log p_ij, with 0 log 0 = 0.
UncertaintyMap npe_map(const DirichletField& d);

// 1 - u, the confidence used by ECE and BraS.
Grid<double> confidence_map(const UncertaintyMap& u);

// 2 |X & Y| / (|X| + |Y|); two empty masks score 1.
double dice_score(const Mask& pred, const Mask& gt);

// Expected calibration error over voxels inside gt.domain_mask(). Bins split
// [0, 1] into m_bins equal right-closed intervals, the first also closed on
// the left so that confidence 0 is counted. Throws std::invalid_argument on an
// empty domain or confidence outside [0, 1].
double ece(const Grid<double>& confidence, const Grid<std::uint8_t>& pred_labels, const LabelField& gt,
           std::size_t m_bins = 10);

// Soft uncertainty-error overlap 2 sum y u / sum (y^2 + u^2) inside the domain,
// y being the segmentation-error indicator. Returns 1 when both the error mask
// and the uncertainty vanish on the domain.
double sueo(const UncertaintyMap& u, const Mask& error_mask, const Mask& domain_mask);

// {0.00, 0.05, ..., 1.00}
std::vector<double> default_thresholds();

struct BrasCurves {
    std::vector<double> thresholds;
    std::vector<double> dice;
    std::vector<double> ftp;  // filtered true positives / unfiltered true positives
    std::vector<double> ftn;  // filtered true negatives / unfiltered true negatives
};

struct BrasResult {
    double score = 0.0;
    double auc_dice = 0.0;
    double auc_ftp = 0.0;
    double auc_ftn = 0.0;
    BrasCurves curves;
};

// Trapezoid area under y(x) divided by the x span, so a constant curve
// integrates to its value.
double normalized_auc(const std::vector<double>& x, const std::vector<double>& y);

// Confidence-filtered segmentation score. At each threshold only domain voxels
// with confidence >= threshold are kept; Dice is taken over the kept voxels
// (carrying the previous value forward when none are kept) and FTP / FTN count
// the true positives / negatives that were filtered out.
//   score = (AUC_dice + (1 - AUC_ftp) + (1 - AUC_ftn)) / 3
// Thresholds must be strictly increasing inside [0, 1], at least two of them.
BrasResult bras(const Grid<double>& confidence, const Mask& pred_mask, const Mask& gt_mask,
                const Mask& domain_mask, const std::vector<double>& thresholds = default_thresholds());

struct MetricsOptions {
    std::size_t m_bins = 10;
    std::vector<double> thresholds = default_thresholds();
};

struct MetricsReport {
    double dice = 0.0;
    double ece = 0.0;
    double sueo = 0.0;
    double bras = 0.0;
    BrasCurves curves;
};

// All four metrics for one binary region (e.g. a tumour subregion) sharing the
// voxel uncertainty map of the model.
MetricsReport evaluate_region(const UncertaintyMap& u, const Mask& pred_mask, const Mask& gt_mask,
                              const Mask& domain_mask, const MetricsOptions& options = {});

}  // namespace rbedl
