#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <stdexcept>
#include <string>

namespace stanav {

// ─── Errors ────────────────────────────────────────────────────────────────

/// Invalid argument or configuration value.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A query touched cells outside the known map region.
class OutOfBoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Model architecture and parameter vector disagree.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged or was given unusable data.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file or log.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Statistical fit impossible on the given data (e.g. one class only).
class DegenerateDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unknown entry in a `key = value` configuration file.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Consumes whitespace and any following lines that start with '#'.
inline void skip_comment_lines(std::istream& is) {
  std::string discard;
  while ((is >> std::ws) && is.peek() == '#') std::getline(is, discard);
}

// ─── Geometry ──────────────────────────────────────────────────────────────

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(b - a); }

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Vec2 position() const { return {x, y}; }
};

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

// ─── Seeding ───────────────────────────────────────────────────────────────

/// SplitMix64 finalizer; derives independent stream seeds from (seed, stream).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream = 0) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace stanav
