#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace ergo {

/// Standard gravity [m/s^2]. Gravity acts along -z of the world frame.
inline constexpr double kGravity = 9.80665;

/// Number of joints reported by the ergonomic indexes.
inline constexpr int kNumJoints = 7;

/// Number of recorded sEMG channels.
inline constexpr int kNumMuscles = 10;

using Vec2 = Eigen::Vector2d;
using JointVector = Eigen::Matrix<double, kNumJoints, 1>;
using MuscleVector = Eigen::Matrix<double, kNumMuscles, 1>;

enum class Joint : int { Ankle = 0, Knee, Hip, Back, Shoulder, Elbow, Wrist };

inline constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "ankle", "knee", "hip", "back", "shoulder", "elbow", "wrist"};

inline constexpr std::array<std::string_view, kNumMuscles> kMuscleNames = {
    "AD", "PD", "BC", "TC", "TR", "ES", "GM", "RF", "BF", "TA"};

inline constexpr int index_of(Joint j) { return static_cast<int>(j); }

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or schema (CLI exit code 1).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Failure while processing otherwise valid input (CLI exit code 2).
class RuntimeError : public Error {
 public:
  using Error::Error;
};

}  // namespace ergo
