#include "rbedl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rbedl {
namespace {

void require_same(std::size_t h0, std::size_t w0, std::size_t h1, std::size_t w1, const char* what) {
    if (h0 != h1 || w0 != w1) throw ShapeError(std::string(what) + ": shape mismatch");
}

std::size_t count_domain(const Mask& domain) {
    std::size_t n = 0;
    for (auto v : domain.values()) n += v ? 1 : 0;
    return n;
}

}  // namespace

UncertaintyMap npe_map(const DirichletField& d) {
    const std::size_t k = d.classes();
    const double norm = 1.0 / std::log(static_cast<double>(k));
    UncertaintyMap u{Grid<double>(d.height(), d.width(), 0.0)};
    for (std::size_t i = 0; i < d.voxels(); ++i) {
        double h = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double p = d.p_hat().at(c, i);
            if (p > 0.0) h -= p * std::log(p);
        }
        u.values[i] = std::clamp(h * norm, 0.0, 1.0);
    }
    return u;
}

Grid<double> confidence_map(const UncertaintyMap& u) {
    Grid<double> conf = u.values;
    for (double& v : conf.values()) v = 1.0 - v;
    return conf;
}

double dice_score(const Mask& pred, const Mask& gt) {
    require_same(pred.height(), pred.width(), gt.height(), gt.width(), "dice_score");
    std::size_t both = 0, total = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0;
        const bool g = gt[i] != 0;
        both += (p && g) ? 1 : 0;
        total += (p ? 1 : 0) + (g ? 1 : 0);
    }
    if (total == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(total);
}

double ece(const Grid<double>& confidence, const Grid<std::uint8_t>& pred_labels, const LabelField& gt,
           std::size_t m_bins) {
    require_same(confidence.height(), confidence.width(), gt.height(), gt.width(), "ece");
    require_same(pred_labels.height(), pred_labels.width(), gt.height(), gt.width(), "ece");
    if (m_bins < 1) throw std::invalid_argument("ece: need at least one bin");
    const double bins = static_cast<double>(m_bins);

    std::vector<double> conf_sum(m_bins, 0.0);
    std::vector<std::size_t> correct(m_bins, 0), count(m_bins, 0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < confidence.size(); ++i) {
        if (!gt.domain_mask()[i]) continue;
        const double c = confidence[i];
        if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("ece: confidence outside [0, 1]");
        // Bin m holds (m / M, (m + 1) / M]; bin 0 also takes c = 0.
        auto m = static_cast<std::ptrdiff_t>(std::ceil(c * bins)) - 1;
        m = std::clamp<std::ptrdiff_t>(m, 0, static_cast<std::ptrdiff_t>(m_bins) - 1);
        if (m > 0 && c <= static_cast<double>(m) / bins) --m;
        if (m + 1 < static_cast<std::ptrdiff_t>(m_bins) && c > static_cast<double>(m + 1) / bins) ++m;
        const auto bin = static_cast<std::size_t>(m);
        conf_sum[bin] += c;
        correct[bin] += pred_labels[i] == gt.label(i) ? 1 : 0;
        ++count[bin];
        ++total;
    }
    if (total == 0) throw std::invalid_argument("ece: empty domain mask");

    double value = 0.0;
    for (std::size_t m = 0; m < m_bins; ++m) {
        if (count[m] == 0) continue;
        const double n = static_cast<double>(count[m]);
        const double gap = std::abs(conf_sum[m] / n - static_cast<double>(correct[m]) / n);
        value += n / static_cast<double>(total) * gap;
    }
    return value;
}

double sueo(const UncertaintyMap& u, const Mask& error_mask, const Mask& domain_mask) {
    require_same(u.values.height(), u.values.width(), error_mask.height(), error_mask.width(), "sueo");
    require_same(u.values.height(), u.values.width(), domain_mask.height(), domain_mask.width(), "sueo");
    double overlap = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < error_mask.size(); ++i) {
        if (!domain_mask[i]) continue;
        const double y = error_mask[i] ? 1.0 : 0.0;
        const double v = u.values[i];
        overlap += y * v;
        mass += y * y + v * v;
    }
    if (mass == 0.0) return 1.0;
    return 2.0 * overlap / mass;
}

std::vector<double> default_thresholds() {
    std::vector<double> t(21);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i) / 20.0;
    return t;
}

double normalized_auc(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("normalized_auc: need >= 2 matching points");
    double area = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
    return area / (x.back() - x.front());
}

BrasResult bras(const Grid<double>& confidence, const Mask& pred_mask, const Mask& gt_mask, const Mask& domain_mask,
                const std::vector<double>& thresholds) {
    require_same(confidence.height(), confidence.width(), pred_mask.height(), pred_mask.width(), "bras");
    require_same(confidence.height(), confidence.width(), gt_mask.height(), gt_mask.width(), "bras");
    require_same(confidence.height(), confidence.width(), domain_mask.height(), domain_mask.width(), "bras");
    if (thresholds.size() < 2) throw std::invalid_argument("bras: need at least two thresholds");
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        if (!(thresholds[t] >= 0.0 && thresholds[t] <= 1.0))
            throw std::invalid_argument("bras: thresholds must lie in [0, 1]");
        if (t > 0 && !(thresholds[t] > thresholds[t - 1]))
            throw std::invalid_argument("bras: thresholds must be strictly increasing");
    }

    // Domain voxels sorted by confidence; raising the threshold removes a
    // prefix of this order, so the confusion counts update incrementally.
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < domain_mask.size(); ++i)
        if (domain_mask[i]) order.push_back(i);
    if (order.empty()) throw std::invalid_argument("bras: empty domain mask");
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return confidence[a] < confidence[b]; });

    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i : order) {
        const bool p = pred_mask[i] != 0;
        const bool g = gt_mask[i] != 0;
        if (p && g) ++tp;
        else if (p) ++fp;
        else if (g) ++fn;
        else ++tn;
    }
    const std::size_t tp0 = tp, tn0 = tn;

    BrasResult result;
    result.curves.thresholds = thresholds;
    std::size_t removed = 0;
    double last_dice = 1.0;
    for (double tau : thresholds) {
        while (removed < order.size() && confidence[order[removed]] < tau) {
            const std::size_t i = order[removed++];
            const bool p = pred_mask[i] != 0;
            const bool g = gt_mask[i] != 0;
            if (p && g) --tp;
            else if (p) --fp;
            else if (g) --fn;
            else --tn;
        }
        if (removed < order.size()) {
            const std::size_t denom = 2 * tp + fp + fn;
            last_dice = denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
        }
        result.curves.dice.push_back(last_dice);
        result.curves.ftp.push_back(tp0 == 0 ? 0.0 : static_cast<double>(tp0 - tp) / static_cast<double>(tp0));
        result.curves.ftn.push_back(tn0 == 0 ? 0.0 : static_cast<double>(tn0 - tn) / static_cast<double>(tn0));
    }

    result.auc_dice = normalized_auc(thresholds, result.curves.dice);
    result.auc_ftp = normalized_auc(thresholds, result.curves.ftp);
    result.auc_ftn = normalized_auc(thresholds, result.curves.ftn);
    result.score = (result.auc_dice + (1.0 - result.auc_ftp) + (1.0 - result.auc_ftn)) / 3.0;
    return result;
}

MetricsReport evaluate_region(const UncertaintyMap& u, const Mask& pred_mask, const Mask& gt_mask,
                              const Mask& domain_mask, const MetricsOptions& options) {
    const std::size_t h = gt_mask.height(), w = gt_mask.width();
    Grid<std::uint8_t> pred_labels(h, w), gt_labels(h, w);
    Mask errors(h, w, 0);
    for (std::size_t i = 0; i < gt_mask.size(); ++i) {
        const bool inside = domain_mask[i] != 0;
        pred_labels[i] = pred_mask[i] ? 1 : 0;
        gt_labels[i] = inside && gt_mask[i] ? 1 : 0;
        errors[i] = pred_labels[i] != gt_labels[i] ? 1 : 0;
    }
    const Grid<double> conf = confidence_map(u);
    MetricsReport report;
    report.dice = dice_score(pred_mask, gt_mask);
    report.ece = ece(conf, pred_labels, LabelField(gt_labels, domain_mask, 2), options.m_bins);
    report.sueo = sueo(u, errors, domain_mask);
    BrasResult b = bras(conf, pred_mask, gt_mask, domain_mask, options.thresholds);
    report.bras = b.score;
    report.curves = std::move(b.curves);
    return report;
}

}  // namespace rbedl
