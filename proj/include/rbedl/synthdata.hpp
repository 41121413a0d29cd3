#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rbedl/evidence.hpp"

namespace rbedl {

// Label codes of the four-class field.
enum RegionLabel : std::uint8_t { kBackground = 0, kOuter = 1, kRing = 2, kCore = 3 };

enum class Difficulty { Easy, Hard };
enum class Task { WT, TC, ET, MULTI };

std::string_view to_string(Difficulty d);
std::string_view to_string(Task t);
std::optional<Difficulty> parse_difficulty(std::string_view name);
std::optional<Task> parse_task(std::string_view name);
// 2 for the binary subregion tasks, 4 for MULTI.
std::size_t task_classes(Task task);

inline constexpr std::size_t kImageSide = 64;
inline constexpr std::size_t kImageChannels = 2;

// Two-channel image with a nested four-class label field:
// core (3) inside ring (2) inside outer (1) inside the domain mask.
struct SynthImage {
    Field channels;
    LabelField labels;
};

SynthImage generate_image(std::uint64_t seed, Difficulty difficulty);
// Image i uses derive_seed(seed, i). Throws std::invalid_argument for n < 1.
std::vector<SynthImage> generate_dataset(std::size_t n, std::uint64_t seed, Difficulty difficulty);

// Foreground mask of a subregion over a four-class label grid:
// WT = {1, 2, 3}, TC = {2, 3}, ET = {2}. MULTI is not a binary region.
Mask region_mask(const Grid<std::uint8_t>& labels, Task task);

// Binary label field for WT / TC / ET; MULTI returns the four-class field.
LabelField subregion_labels(const SynthImage& image, Task task);

// Separable Gaussian, radius ceil(3 sigma), clamp-to-border, per channel.
Field gaussian_blur(const Field& channels, double sigma);
// Adds i.i.d. N(0, variance) per voxel from Rng(seed).
Field add_gaussian_noise(const Field& channels, double variance, std::uint64_t seed);
// Per channel: min-max to [0, 1] then x^gamma. Constant channels pass through.
Field gamma_correct(const Field& channels, double gamma);

// Evaluation-time input perturbation, written "none", "blur:S", "noise:V" or
// "gamma:G".
struct Perturbation {
    enum class Kind { None, Blur, Noise, Gamma };
    Kind kind = Kind::None;
    double value = 0.0;

    // Throws std::invalid_argument on malformed or out-of-range specs.
    static Perturbation parse(std::string_view spec);
    std::string to_string() const;
    // seed is only used by Noise.
    Field apply(const Field& channels, std::uint64_t seed) const;
};

}  // namespace rbedl
