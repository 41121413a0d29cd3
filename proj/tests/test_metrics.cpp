#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "rbedl/metrics.hpp"
#include "rbedl/rng.hpp"

using namespace rbedl;

namespace {

Mask mask_from(std::size_t h, std::size_t w, const std::vector<std::size_t>& on) {
    Mask m(h, w, 0);
    for (std::size_t i : on) m[i] = 1;
    return m;
}

Mask random_mask(Rng& rng, std::size_t h, std::size_t w, double p) {
    Mask m(h, w);
    for (auto& v : m.values()) v = rng.uniform() < p ? 1 : 0;
    return m;
}

// Exhaustive recount of the BraS curves: every threshold rescans every voxel.
BrasCurves brute_force_curves(const Grid<double>& conf, const Mask& pred, const Mask& gt, const Mask& domain,
                              const std::vector<double>& thresholds) {
    BrasCurves curves;
    curves.thresholds = thresholds;
    std::size_t tp0 = 0, tn0 = 0;
    for (std::size_t i = 0; i < conf.size(); ++i) {
        if (!domain[i]) continue;
        tp0 += (pred[i] && gt[i]) ? 1 : 0;
        tn0 += (!pred[i] && !gt[i]) ? 1 : 0;
    }
    double last = 1.0;
    for (double tau : thresholds) {
        std::size_t tp = 0, fp = 0, fn = 0, tn = 0, kept = 0;
        for (std::size_t i = 0; i < conf.size(); ++i) {
            if (!domain[i] || conf[i] < tau) continue;
            ++kept;
            if (pred[i] && gt[i]) ++tp;
            else if (pred[i]) ++fp;
            else if (gt[i]) ++fn;
            else ++tn;
        }
        if (kept > 0) last = (2 * tp + fp + fn) == 0 ? 1.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
        curves.dice.push_back(last);
        curves.ftp.push_back(tp0 == 0 ? 0.0 : static_cast<double>(tp0 - tp) / static_cast<double>(tp0));
        curves.ftn.push_back(tn0 == 0 ? 0.0 : static_cast<double>(tn0 - tn) / static_cast<double>(tn0));
    }
    return curves;
}

DirichletField single_voxel(std::vector<double> alpha) {
    Field f(alpha.size(), 1, 1);
    for (std::size_t c = 0; c < alpha.size(); ++c) f.at(c, 0) = alpha[c];
    return DirichletField::from_alpha(std::move(f));
}

}  // namespace

TEST_CASE("normalized predictive entropy") {
    CHECK(npe_map(single_voxel({3, 3, 3, 3})).values[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(npe_map(single_voxel({1e15, 1})).values[0] < 1e-12);
    const double hand = -(0.7 * std::log(0.7) + 3 * 0.1 * std::log(0.1)) / std::log(4.0);
    const double value = npe_map(single_voxel({7, 1, 1, 1})).values[0];
    CHECK(std::abs(value - hand) < 1e-9);
    CHECK(std::abs(value - 0.6784) < 5e-5);
    // Class permutation leaves the entropy unchanged.
    CHECK(npe_map(single_voxel({1, 7, 1, 1})).values[0] == doctest::Approx(value).epsilon(1e-15));
}

TEST_CASE("npe stays in [0, 1]") {
    Rng rng(3);
    Field alpha(4, 6, 6);
    for (double& a : alpha.values()) a = rng.uniform() < 0.3 ? 1.0 : rng.uniform(1.0, 1e6);
    const auto u = npe_map(DirichletField::from_alpha(alpha));
    for (double v : u.values.values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("dice score") {
    const Mask a = mask_from(4, 5, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(dice_score(a, a) == 1.0);
    CHECK(dice_score(a, mask_from(4, 5, {10, 11})) == 0.0);
    const Mask b = mask_from(4, 5, {5, 6, 7, 8, 9, 10, 11, 12, 13, 14});
    CHECK(std::abs(dice_score(a, b) - 0.5) < 1e-9);
    CHECK(dice_score(Mask(3, 3, 0), Mask(3, 3, 0)) == 1.0);
    CHECK_THROWS_AS(dice_score(a, Mask(5, 4, 0)), ShapeError);

    Rng rng(12);
    for (int t = 0; t < 50; ++t) {
        const Mask x = random_mask(rng, 6, 7, 0.4);
        const Mask y = random_mask(rng, 6, 7, 0.4);
        CHECK(dice_score(x, y) == dice_score(y, x));
    }
}

TEST_CASE("ECE hand cases") {
    // Ten voxels at confidence 0.8, six of them correct.
    Grid<std::uint8_t> gt(2, 5, 1), pred(2, 5, 1);
    for (std::size_t i = 6; i < 10; ++i) pred[i] = 0;
    const LabelField y(gt, 2);
    CHECK(std::abs(ece(Grid<double>(2, 5, 0.8), pred, y) - 0.2) < 1e-9);

    // Calibrated bins: conf 0.25 with accuracy 1/4 and conf 0.8 with 4/5.
    Grid<double> conf(1, 9);
    Grid<std::uint8_t> truth(1, 9, 0), guess(1, 9, 0);
    for (std::size_t i = 0; i < 4; ++i) conf[i] = 0.25;
    for (std::size_t i = 4; i < 9; ++i) conf[i] = 0.8;
    guess[1] = guess[2] = guess[3] = 1;  // three of the four 0.25 voxels wrong
    guess[8] = 1;                        // one of the five 0.8 voxels wrong
    CHECK(ece(conf, guess, LabelField(truth, 2)) < 1e-15);
}

TEST_CASE("ECE binning edges and domain") {
    // 0.3 belongs to (0.2, 0.3] and shares its bin with 0.25; 0 lands in bin 0.
    Grid<double> conf(1, 3);
    conf[0] = 0.3;
    conf[1] = 0.25;
    conf[2] = 0.0;
    Grid<std::uint8_t> truth(1, 3, 0), guess(1, 3, 0);
    guess[1] = 1;
    const double mixed = ece(conf, guess, LabelField(truth, 2));
    // Bin (0.2, 0.3]: mean conf 0.275, accuracy 0.5; bin [0, 0.1]: conf 0, accuracy 1.
    CHECK(std::abs(mixed - (2.0 / 3.0 * 0.225 + 1.0 / 3.0 * 1.0)) < 1e-12);

    // Voxels outside the domain are ignored.
    Mask domain(1, 3, 1);
    domain[2] = 0;
    const double inside = ece(conf, guess, LabelField(truth, domain, 2));
    CHECK(std::abs(inside - 0.225) < 1e-12);

    CHECK_THROWS_AS(ece(conf, guess, LabelField(truth, Mask(1, 3, 0), 2)), std::invalid_argument);
    conf[0] = 1.5;
    CHECK_THROWS_AS(ece(conf, guess, LabelField(truth, 2)), std::invalid_argument);
}

TEST_CASE("ECE is bounded and ignores voxel order") {
    Rng rng(21);
    for (int t = 0; t < 30; ++t) {
        Grid<double> conf(5, 5);
        Grid<std::uint8_t> truth(5, 5), guess(5, 5);
        for (std::size_t i = 0; i < 25; ++i) {
            conf[i] = rng.uniform();
            truth[i] = static_cast<std::uint8_t>(rng.below(3));
            guess[i] = static_cast<std::uint8_t>(rng.below(3));
        }
        const double value = ece(conf, guess, LabelField(truth, 3));
        CHECK(value >= 0.0);
        CHECK(value <= 1.0);

        std::vector<std::size_t> order(25);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order.begin(), order.end());
        Grid<double> conf_s(5, 5);
        Grid<std::uint8_t> truth_s(5, 5), guess_s(5, 5);
        for (std::size_t i = 0; i < 25; ++i) {
            conf_s[i] = conf[order[i]];
            truth_s[i] = truth[order[i]];
            guess_s[i] = guess[order[i]];
        }
        CHECK(std::abs(ece(conf_s, guess_s, LabelField(truth_s, 3)) - value) < 1e-12);
    }
}

TEST_CASE("sUEO hand cases") {
    const Mask domain(3, 3, 1);
    const Mask errors = mask_from(3, 3, {0, 4, 5, 8});
    UncertaintyMap exact{Grid<double>(3, 3, 0.0)};
    for (std::size_t i : {0u, 4u, 5u, 8u}) exact.values[i] = 1.0;
    CHECK(sueo(exact, errors, domain) == 1.0);
    CHECK(sueo(UncertaintyMap{Grid<double>(3, 3, 0.0)}, errors, domain) == 0.0);
    UncertaintyMap half{Grid<double>(3, 3, 0.0)};
    for (std::size_t i : {0u, 4u, 5u, 8u}) half.values[i] = 0.5;
    CHECK(std::abs(sueo(half, errors, domain) - 0.8) < 1e-9);
    CHECK(sueo(UncertaintyMap{Grid<double>(3, 3, 0.0)}, Mask(3, 3, 0), domain) == 1.0);
}

TEST_CASE("sUEO equals Dice for binary uncertainty") {
    Rng rng(31);
    const Mask domain(6, 6, 1);
    for (int t = 0; t < 40; ++t) {
        const Mask errors = random_mask(rng, 6, 6, 0.3);
        const Mask unc = random_mask(rng, 6, 6, 0.3);
        UncertaintyMap u{Grid<double>(6, 6)};
        for (std::size_t i = 0; i < 36; ++i) u.values[i] = unc[i];
        const double value = sueo(u, errors, domain);
        CHECK(std::abs(value - dice_score(unc, errors)) < 1e-12);
        CHECK(value >= 0.0);
        CHECK(value <= 1.0);
    }
}

TEST_CASE("BraS limiting cases") {
    const Mask domain(4, 4, 1);
    const Mask gt = mask_from(4, 4, {1, 2, 5, 6});
    const auto perfect = bras(Grid<double>(4, 4, 1.0), gt, gt, domain);
    CHECK(perfect.score == 1.0);
    for (double v : perfect.curves.dice) CHECK(v == 1.0);
    for (double v : perfect.curves.ftp) CHECK(v == 0.0);
    for (double v : perfect.curves.ftn) CHECK(v == 0.0);

    const Mask pred = mask_from(4, 4, {1, 2, 9, 10});
    const double d = dice_score(pred, gt);
    const auto constant = bras(Grid<double>(4, 4, 1.0), pred, gt, domain);
    CHECK(std::abs(constant.score - (d + 2.0) / 3.0) < 1e-9);
    CHECK(std::abs(constant.auc_dice - d) < 1e-15);
}

TEST_CASE("BraS matches an exhaustive recount") {
    Rng rng(41);
    const double levels[] = {0.0, 0.05, 0.1, 0.33, 0.5, 0.55, 0.7, 0.95, 1.0};
    for (int t = 0; t < 300; ++t) {
        Grid<double> conf(4, 4);
        for (double& c : conf.values()) c = rng.uniform() < 0.5 ? levels[rng.below(9)] : rng.uniform();
        const Mask pred = random_mask(rng, 4, 4, 0.4);
        const Mask gt = random_mask(rng, 4, 4, 0.4);
        const Mask domain = t % 3 == 0 ? Mask(4, 4, 1) : random_mask(rng, 4, 4, 0.8);
        if (std::accumulate(domain.values().begin(), domain.values().end(), 0) == 0) continue;
        const auto thresholds = default_thresholds();
        const auto fast = bras(conf, pred, gt, domain, thresholds);
        const auto slow = brute_force_curves(conf, pred, gt, domain, thresholds);
        CHECK(fast.curves.dice == slow.dice);
        CHECK(fast.curves.ftp == slow.ftp);
        CHECK(fast.curves.ftn == slow.ftn);
        const double score = (normalized_auc(thresholds, slow.dice) + (1.0 - normalized_auc(thresholds, slow.ftp)) +
                              (1.0 - normalized_auc(thresholds, slow.ftn))) / 3.0;
        CHECK(fast.score == score);
        CHECK(fast.score >= 0.0);
        CHECK(fast.score <= 1.0);
    }
}

TEST_CASE("BraS carries Dice forward over empty retained sets") {
    const Mask domain(1, 4, 1);
    const Mask gt = mask_from(1, 4, {0, 1});
    const Mask pred = mask_from(1, 4, {0, 2});
    Grid<double> conf(1, 4, 0.5);
    const auto result = bras(conf, pred, gt, domain, {0.0, 0.5, 0.75, 1.0});
    CHECK(result.curves.dice[0] == 0.5);
    CHECK(result.curves.dice[1] == 0.5);
    CHECK(result.curves.dice[2] == 0.5);  // nothing kept, carried
    CHECK(result.curves.ftp[2] == 1.0);
    CHECK(result.curves.ftn[3] == 1.0);
}

TEST_CASE("BraS argument checks") {
    const Mask m(2, 2, 1);
    const Grid<double> conf(2, 2, 0.5);
    CHECK_THROWS_AS(bras(conf, m, m, Mask(2, 2, 0)), std::invalid_argument);
    CHECK_THROWS_AS(bras(conf, m, m, m, {0.0, 0.5, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(bras(conf, m, m, m, {0.5}), std::invalid_argument);
    CHECK_THROWS_AS(bras(conf, m, m, m, {0.0, 1.5}), std::invalid_argument);
}

TEST_CASE("AUC of a constant curve is the constant") {
    const auto x = default_thresholds();
    CHECK(normalized_auc(x, std::vector<double>(x.size(), 0.37)) == doctest::Approx(0.37).epsilon(1e-14));
    CHECK(normalized_auc({0.2, 0.6}, {0.4, 0.4}) == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("evaluate_region bundles the four metrics") {
    const Mask domain = mask_from(3, 3, {0, 1, 2, 3, 4, 5, 6, 7});
    const Mask gt = mask_from(3, 3, {4, 5});
    const Mask pred = mask_from(3, 3, {4, 7});
    UncertaintyMap u{Grid<double>(3, 3, 0.1)};
    u.values[5] = 0.9;
    u.values[7] = 0.9;
    const auto report = evaluate_region(u, pred, gt, domain);
    CHECK(report.dice == 0.5);
    CHECK(std::abs(report.sueo - 2.0 * 1.8 / (2.0 + 2 * 0.81 + 6 * 0.01)) < 1e-12);
    CHECK(report.curves.thresholds.size() == 21);
    CHECK(report.ece >= 0.0);
    CHECK(report.bras <= 1.0);
}
