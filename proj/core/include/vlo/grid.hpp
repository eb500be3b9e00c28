#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vlo {

// Dense row-major H x W x C array of doubles. Channel is the fastest index.
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, int channels = 1, double fill = 0.0);

  static Grid scalar(double value) { return Grid(1, 1, 1, value); }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(int row, int col, int channel = 0) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + channel;
  }

  double& operator()(int row, int col, int channel = 0) { return data_[index(row, col, channel)]; }
  double operator()(int row, int col, int channel = 0) const { return data_[index(row, col, channel)]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const Grid& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  void fill(double value);

  bool operator==(const Grid&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Per-pixel boolean grid.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, bool fill = false);

  int height() const { return height_; }
  int width() const { return width_; }

  bool operator()(int row, int col) const { return bits_[static_cast<std::size_t>(row) * width_ + col] != 0; }
  void set(int row, int col, bool value) { bits_[static_cast<std::size_t>(row) * width_ + col] = value ? 1 : 0; }

  std::size_t count() const;
  bool all() const { return count() == bits_.size(); }
  std::span<const std::uint8_t> bits() const { return bits_; }

  bool operator==(const Mask&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace vlo
