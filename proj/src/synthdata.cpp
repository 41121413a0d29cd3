#include "rbedl/synthdata.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rbedl/rng.hpp"

namespace rbedl {
namespace {

struct Ellipse {
    double cx, cy, a, b, theta;

    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        const double c = std::cos(theta), s = std::sin(theta);
        const double u = (c * dx + s * dy) / a;
        const double v = (-s * dx + c * dy) / b;
        return u * u + v * v <= 1.0;
    }
    Ellipse scaled(double f) const { return {cx, cy, a * f, b * f, theta}; }
};

struct Range {
    double lo, hi;
};

// Mean-intensity ranges per tissue for each channel, indexed
// [channel][brain, outer, ring, core]. Easy ranges are pairwise disjoint
// within a channel; hard ranges overlap their neighbours.
using IntensityTable = std::array<std::array<Range, 4>, kImageChannels>;

constexpr IntensityTable kEasyIntensities{{
    {{{0.20, 0.30}, {0.80, 0.90}, {0.60, 0.70}, {0.42, 0.52}}},
    {{{0.35, 0.45}, {0.20, 0.30}, {0.85, 0.95}, {0.05, 0.15}}},
}};
constexpr IntensityTable kHardIntensities{{
    {{{0.20, 0.50}, {0.40, 0.75}, {0.35, 0.70}, {0.30, 0.60}}},
    {{{0.30, 0.55}, {0.20, 0.50}, {0.45, 0.80}, {0.10, 0.45}}},
}};
constexpr double kAcquisitionNoise = 0.05;

void zscore_channels(Field& f) {
    const std::size_t n = f.plane_size();
    for (std::size_t c = 0; c < f.channels(); ++c) {
        double* p = f.plane(c);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += p[i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (p[i] - mean) * (p[i] - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) p[i] = sd > 0.0 ? (p[i] - mean) / sd : 0.0;
    }
}

bool ellipse_inside(const Ellipse& inner, const Mask& region) {
    for (std::size_t y = 0; y < region.height(); ++y)
        for (std::size_t x = 0; x < region.width(); ++x)
            if (inner.contains(static_cast<double>(x), static_cast<double>(y)) && !region(y, x)) return false;
    return true;
}

}  // namespace

std::string_view to_string(Difficulty d) { return d == Difficulty::Easy ? "easy" : "hard"; }

std::string_view to_string(Task t) {
    switch (t) {
        case Task::WT: return "wt";
        case Task::TC: return "tc";
        case Task::ET: return "et";
        case Task::MULTI: return "multi";
    }
    return "?";
}

std::optional<Difficulty> parse_difficulty(std::string_view name) {
    if (name == "easy") return Difficulty::Easy;
    if (name == "hard") return Difficulty::Hard;
    return std::nullopt;
}

std::optional<Task> parse_task(std::string_view name) {
    for (Task t : {Task::WT, Task::TC, Task::ET, Task::MULTI})
        if (to_string(t) == name) return t;
    return std::nullopt;
}

std::size_t task_classes(Task task) { return task == Task::MULTI ? 4 : 2; }

SynthImage generate_image(std::uint64_t seed, Difficulty difficulty) {
    constexpr std::size_t side = kImageSide;
    constexpr double mid = static_cast<double>(side) / 2.0;
    Rng rng(seed);

    // Brain: 62-74% of the frame before clipping.
    const double coverage = rng.uniform(0.62, 0.74);
    const double aspect = rng.uniform(0.88, 1.0);
    const double major = std::sqrt(coverage * side * side / (std::numbers::pi * aspect));
    const Ellipse brain{mid + rng.uniform(-2.0, 2.0), mid + rng.uniform(-2.0, 2.0), major, major * aspect,
                        rng.uniform(0.0, std::numbers::pi)};

    Mask domain(side, side, 0);
    for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x)
            domain(y, x) = brain.contains(static_cast<double>(x), static_cast<double>(y)) ? 1 : 0;

    // Tumour: outer ellipse, ring and core scaled about the same centre.
    const double outer_major = rng.uniform(8.0, 14.0);
    const double outer_aspect = rng.uniform(0.7, 1.0);
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double ring_scale = rng.uniform(0.6, 0.8);
    const double core_scale = ring_scale * rng.uniform(0.4, 0.6);
    const double reach = std::max(0.0, std::min(brain.a, brain.b) - outer_major - 2.0);
    Ellipse outer{brain.cx, brain.cy, outer_major, outer_major * outer_aspect, theta};
    for (int attempt = 0; attempt < 64; ++attempt) {
        const double r = reach * std::sqrt(rng.uniform());
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const Ellipse candidate{brain.cx + r * std::cos(phi), brain.cy + r * std::sin(phi), outer.a, outer.b, theta};
        if (ellipse_inside(candidate, domain)) {
            outer = candidate;
            break;
        }
    }
    const Ellipse ring = outer.scaled(ring_scale);
    const Ellipse core = outer.scaled(core_scale);

    Grid<std::uint8_t> labels(side, side, kBackground);
    Grid<std::uint8_t> tissue(side, side, 0);  // 0 outside, 1 brain, 2 outer, 3 ring, 4 core
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            if (!domain(y, x)) continue;
            const double fx = static_cast<double>(x), fy = static_cast<double>(y);
            std::uint8_t label = kBackground;
            if (outer.contains(fx, fy)) {
                label = kOuter;
                if (ring.contains(fx, fy)) {
                    label = kRing;
                    if (core.contains(fx, fy)) label = kCore;
                }
            }
            labels(y, x) = label;
            tissue(y, x) = static_cast<std::uint8_t>(label + 1);
        }
    }

    const IntensityTable& table = difficulty == Difficulty::Easy ? kEasyIntensities : kHardIntensities;
    std::array<std::array<double, 5>, kImageChannels> means{};
    for (std::size_t c = 0; c < kImageChannels; ++c)
        for (std::size_t t = 0; t < 4; ++t) means[c][t + 1] = rng.uniform(table[c][t].lo, table[c][t].hi);

    Field channels(kImageChannels, side, side);
    for (std::size_t c = 0; c < kImageChannels; ++c)
        for (std::size_t i = 0; i < side * side; ++i)
            channels.at(c, i) = means[c][tissue[i]] + kAcquisitionNoise * rng.normal();
    zscore_channels(channels);
    // Stored as float32 on disk; round now so in-memory and reloaded data agree.
    for (double& v : channels.values()) v = static_cast<double>(static_cast<float>(v));

    return {std::move(channels), LabelField(std::move(labels), std::move(domain), 4)};
}

std::vector<SynthImage> generate_dataset(std::size_t n, std::uint64_t seed, Difficulty difficulty) {
    if (n < 1) throw std::invalid_argument("generate_dataset: need at least one image");
    std::vector<SynthImage> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(generate_image(derive_seed(seed, i), difficulty));
    return out;
}

Mask region_mask(const Grid<std::uint8_t>& labels, Task task) {
    Mask m(labels.height(), labels.width(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto l = labels[i];
        switch (task) {
            case Task::WT: m[i] = l != kBackground; break;
            case Task::TC: m[i] = l == kRing || l == kCore; break;
            case Task::ET: m[i] = l == kRing; break;
            case Task::MULTI: throw std::invalid_argument("region_mask: MULTI is not a binary region");
        }
    }
    return m;
}

LabelField subregion_labels(const SynthImage& image, Task task) {
    if (task == Task::MULTI) return image.labels;
    const Mask m = region_mask(image.labels.labels(), task);
    Grid<std::uint8_t> binary(m.height(), m.width());
    for (std::size_t i = 0; i < m.size(); ++i) binary[i] = m[i];
    return LabelField(std::move(binary), image.labels.domain_mask(), 2);
}

Field gaussian_blur(const Field& channels, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("gaussian_blur: sigma must be > 0");
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const double w = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
        kernel[static_cast<std::size_t>(k + radius)] = w;
        total += w;
    }
    for (double& w : kernel) w /= total;

    const auto h = static_cast<std::ptrdiff_t>(channels.height());
    const auto w = static_cast<std::ptrdiff_t>(channels.width());
    auto clamp = [](std::ptrdiff_t v, std::ptrdiff_t n) { return std::clamp<std::ptrdiff_t>(v, 0, n - 1); };
    Field tmp(channels.channels(), channels.height(), channels.width());
    Field out(channels.channels(), channels.height(), channels.width());
    for (std::size_t c = 0; c < channels.channels(); ++c) {
        for (std::ptrdiff_t y = 0; y < h; ++y)
            for (std::ptrdiff_t x = 0; x < w; ++x) {
                double acc = 0.0;
                for (std::ptrdiff_t k = -radius; k <= radius; ++k)
                    acc += kernel[static_cast<std::size_t>(k + radius)] * channels(c, y, clamp(x + k, w));
                tmp(c, y, x) = acc;
            }
        for (std::ptrdiff_t y = 0; y < h; ++y)
            for (std::ptrdiff_t x = 0; x < w; ++x) {
                double acc = 0.0;
                for (std::ptrdiff_t k = -radius; k <= radius; ++k)
                    acc += kernel[static_cast<std::size_t>(k + radius)] * tmp(c, clamp(y + k, h), x);
                out(c, y, x) = acc;
            }
    }
    return out;
}

Field add_gaussian_noise(const Field& channels, double variance, std::uint64_t seed) {
    if (!(variance >= 0.0) || !std::isfinite(variance))
        throw std::invalid_argument("add_gaussian_noise: variance must be finite and >= 0");
    Field out = channels;
    if (variance == 0.0) return out;
    const double sd = std::sqrt(variance);
    Rng rng(seed);
    for (double& v : out.values()) v += sd * rng.normal();
    return out;
}

Field gamma_correct(const Field& channels, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma_correct: gamma must be > 0");
    Field out = channels;
    const std::size_t n = out.plane_size();
    for (std::size_t c = 0; c < out.channels(); ++c) {
        double* p = out.plane(c);
        const auto [lo, hi] = std::minmax_element(p, p + n);
        const double min = *lo, range = *hi - *lo;
        if (!(range > 0.0)) continue;
        for (std::size_t i = 0; i < n; ++i) p[i] = std::pow((p[i] - min) / range, gamma);
    }
    return out;
}

Perturbation Perturbation::parse(std::string_view spec) {
    if (spec == "none") return {};
    const auto colon = spec.find(':');
    if (colon == std::string_view::npos)
        throw std::invalid_argument("perturbation: expected none, blur:S, noise:V or gamma:G, got '" +
                                    std::string(spec) + "'");
    const auto name = spec.substr(0, colon);
    const auto number = spec.substr(colon + 1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), value);
    if (ec != std::errc{} || ptr != number.data() + number.size() || !std::isfinite(value))
        throw std::invalid_argument("perturbation: bad number in '" + std::string(spec) + "'");
    Perturbation p;
    p.value = value;
    if (name == "blur") {
        p.kind = Kind::Blur;
        if (!(value > 0.0)) throw std::invalid_argument("perturbation: blur sigma must be > 0");
    } else if (name == "noise") {
        p.kind = Kind::Noise;
        if (!(value >= 0.0)) throw std::invalid_argument("perturbation: noise variance must be >= 0");
    } else if (name == "gamma") {
        p.kind = Kind::Gamma;
        if (!(value > 0.0)) throw std::invalid_argument("perturbation: gamma must be > 0");
    } else {
        throw std::invalid_argument("perturbation: unknown kind '" + std::string(name) + "'");
    }
    return p;
}

std::string Perturbation::to_string() const {
    if (kind == Kind::None) return "none";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    const std::string number(buf, res.ptr);
    switch (kind) {
        case Kind::Blur: return "blur:" + number;
        case Kind::Noise: return "noise:" + number;
        case Kind::Gamma: return "gamma:" + number;
        case Kind::None: break;
    }
    return "none";
}

Field Perturbation::apply(const Field& channels, std::uint64_t seed) const {
    switch (kind) {
        case Kind::None: return channels;
        case Kind::Blur: return gaussian_blur(channels, value);
        case Kind::Noise: return add_gaussian_noise(channels, value, seed);
        case Kind::Gamma: return gamma_correct(channels, value);
    }
    return channels;
}

}  // namespace rbedl
