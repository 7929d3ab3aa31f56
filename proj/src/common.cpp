#include "tddm/common.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tddm {

Plane::Plane(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) {
    throw ContractViolation("plane dimensions must be non-negative");
  }
  values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

Plane::Plane(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width < 0 || height < 0 ||
      values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ContractViolation("plane value count does not match dimensions");
  }
}

double Plane::clamped(int x, int y) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return values_[index(x, y)];
}

Frame::Frame(Plane pixels) : pixels_(std::move(pixels)) {
  if (pixels_.width() < kMinSide || pixels_.height() < kMinSide) {
    std::ostringstream msg;
    msg << "frame must be at least " << kMinSide << "x" << kMinSide << ", got "
        << pixels_.width() << "x" << pixels_.height();
    throw ContractViolation(msg.str());
  }
  for (double v : pixels_.values()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ContractViolation("frame intensities must be finite and within [0,1]");
    }
  }
}

Frame::Frame(int width, int height, double fill) : Frame(Plane(width, height, fill)) {}

void require_same_shape(const Plane& a, const Plane& b, const char* what) {
  if (!a.same_shape(b)) {
    std::ostringstream msg;
    msg << what << ": dimension mismatch " << a.width() << "x" << a.height() << " vs "
        << b.width() << "x" << b.height();
    throw ContractViolation(msg.str());
  }
}

}  // namespace tddm
