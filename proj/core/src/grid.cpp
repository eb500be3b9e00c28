#include "vlo/grid.hpp"

#include <algorithm>
#include <numeric>

#include "vlo/error.hpp"

namespace vlo {

Grid::Grid(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) fail(ErrorCode::kInvalidArgument, "negative grid dimension");
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

void Grid::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Mask::Mask(int height, int width, bool fill) : height_(height), width_(width) {
  if (height < 0 || width < 0) fail(ErrorCode::kInvalidArgument, "negative mask dimension");
  bits_.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

}  // namespace vlo
