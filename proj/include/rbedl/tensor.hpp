#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rbedl {

// Row-major (H, W) grid.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(std::size_t height, std::size_t width, T fill = T{})
        : height_(height), width_(width), data_(height * width, fill) {}

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return data_.size(); }

    T& operator()(std::size_t y, std::size_t x) { return data_[y * width_ + x]; }
    const T& operator()(std::size_t y, std::size_t x) const { return data_[y * width_ + x]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    bool same_shape(const Grid& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }
    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<T> data_;
};

// Row-major (C, H, W) volume of planes.
template <typename T>
class Volume {
public:
    Volume() = default;
    Volume(std::size_t channels, std::size_t height, std::size_t width, T fill = T{})
        : channels_(channels), height_(height), width_(width),
          data_(channels * height * width, fill) {}

    std::size_t channels() const { return channels_; }
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t plane_size() const { return height_ * width_; }
    std::size_t size() const { return data_.size(); }

    T& operator()(std::size_t c, std::size_t y, std::size_t x) {
        return data_[(c * height_ + y) * width_ + x];
    }
    const T& operator()(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * height_ + y) * width_ + x];
    }
    // Flat (channel, voxel) access where voxel = y * W + x.
    T& at(std::size_t c, std::size_t voxel) { return data_[c * plane_size() + voxel]; }
    const T& at(std::size_t c, std::size_t voxel) const { return data_[c * plane_size() + voxel]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T* plane(std::size_t c) { return data_.data() + c * plane_size(); }
    const T* plane(std::size_t c) const { return data_.data() + c * plane_size(); }

    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    bool same_shape(const Volume& other) const {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }
    template <typename U>
    bool same_plane(const Grid<U>& grid) const {
        return height_ == grid.height() && width_ == grid.width();
    }
    friend bool operator==(const Volume&, const Volume&) = default;

private:
    std::size_t channels_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<T> data_;
};

using Field = Volume<double>;
using Mask = Grid<unsigned char>;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Thrown when a value violates a documented contract (negative evidence,
// labels out of range, ...). Distinct from argument errors so callers can
// report it separately.
class ContractViolation : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace rbedl
