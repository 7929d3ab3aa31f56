#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tddm {

/// Broad failure classes. The CLI maps each one to its own exit code.
enum class ErrorCategory {
  config = 2,
  io = 3,
  contract = 4,
  numeric = 5,
  model = 6,
  data = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// Caller broke a precondition (shape mismatch, step after terminal, ...).
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& what)
      : Error(ErrorCategory::contract, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::config, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// Dense row-major 2-D array of doubles; used for frames, flow planes and
/// magnitude fields alike.
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, double fill = 0.0);
  Plane(int width, int height, std::vector<double> values);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& at(int x, int y) { return values_[index(x, y)]; }
  double at(int x, int y) const { return values_[index(x, y)]; }

  /// Replicate-edge read: coordinates are clamped into the plane.
  double clamped(int x, int y) const;

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  bool same_shape(const Plane& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

/// A grayscale observation. Values are finite and in [0,1]; both sides are
/// at least 8 pixels.
class Frame {
 public:
  static constexpr int kMinSide = 8;

  Frame() = default;
  /// Validates the invariants; throws ContractViolation on failure.
  explicit Frame(Plane pixels);
  Frame(int width, int height, double fill = 0.0);

  int width() const noexcept { return pixels_.width(); }
  int height() const noexcept { return pixels_.height(); }
  double at(int x, int y) const { return pixels_.at(x, y); }
  const Plane& plane() const noexcept { return pixels_; }
  std::span<const double> values() const noexcept { return pixels_.values(); }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  Plane pixels_;
};

/// Throws ContractViolation naming `what` when the shapes differ.
void require_same_shape(const Plane& a, const Plane& b, const char* what);

}  // namespace tddm
