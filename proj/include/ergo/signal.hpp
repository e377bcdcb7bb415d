#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ergo/types.hpp"

namespace ergo::signal {

// ---------------------------------------------------------------------------
// Polynomial-fit differentiator

struct DifferentiatorSpec {
  int window = 11;  // samples, odd
  int order = 3;    // polynomial order, < window

  void validate() const;
  /// Samples between an input and the output that reports its derivatives.
  int lag() const { return (window - 1) / 2; }
};

/// Savitzky-Golay weights: row d gives the d-th derivative (per sample^d) at
/// position `eval` of a window of `window` samples fitted with `order`.
Eigen::MatrixXd savgol_weights(int window, int order, int eval, int max_derivative = 2);

/// One multichannel sample with its smoothed derivatives.
struct DerivativeSample {
  std::size_t index = 0;
  Eigen::VectorXd value;
  Eigen::VectorXd rate;
  Eigen::VectorXd accel;
};

/// Causal fixed-lag differentiator. Each input sample is emitted once the
/// `lag()` following samples are known; the first and last `lag()` samples
/// use the asymmetric fits of the same window.
class StreamingDifferentiator {
 public:
  StreamingDifferentiator(DifferentiatorSpec spec, double sample_rate, int channels);

  /// Feeds one sample; returns the samples that became complete.
  std::vector<DerivativeSample> push(const Eigen::VectorXd& x);
  /// Emits the trailing samples. Throws when fewer than `window` samples arrived.
  std::vector<DerivativeSample> flush();

  const DifferentiatorSpec& spec() const { return spec_; }
  double latency_seconds() const { return spec_.lag() / fs_; }
  std::size_t pushed() const { return count_; }

 private:
  DerivativeSample evaluate(std::size_t window_start, int eval) const;

  DifferentiatorSpec spec_;
  double fs_;
  int channels_;
  std::vector<Eigen::MatrixXd> weights_;  // per eval position
  std::deque<Eigen::VectorXd> buffer_;
  std::size_t count_ = 0;
};

struct Derivatives {
  std::vector<double> rate;
  std::vector<double> accel;
};

/// Batch form for a single channel; identical to the streaming output.
Derivatives differentiate(std::span<const double> x, double sample_rate, const DifferentiatorSpec& spec = {});

// ---------------------------------------------------------------------------
// IIR filtering

struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

/// Cascade of second-order sections in transposed direct form II.
class SosFilter {
 public:
  SosFilter() = default;
  explicit SosFilter(std::vector<Biquad> sections);

  double step(double x);
  /// Sets the state to the steady-state response of a constant input.
  void reset_steady(double x);
  void reset();
  /// Magnitude of the frequency response at f [Hz].
  double gain(double f, double fs) const;
  const std::vector<Biquad>& sections() const { return sections_; }
  SosFilter then(const SosFilter& next) const;

 private:
  std::vector<Biquad> sections_;
  std::vector<std::array<double, 2>> state_;
};

SosFilter butterworth_lowpass(int order, double cutoff, double fs);
SosFilter butterworth_highpass(int order, double cutoff, double fs);

struct FilterSpec {
  enum class Kind { LowPass, BandPass };
  Kind kind = Kind::BandPass;
  double low = 2.0;      // [Hz], band-pass only
  double high = 500.0;   // [Hz]
  int order = 4;         // per band edge
  double sample_rate = 2000.0;

  void validate() const;
  SosFilter design() const;
};

// ---------------------------------------------------------------------------
// sEMG conditioning

struct EmgSpec {
  FilterSpec band{FilterSpec::Kind::BandPass, 2.0, 500.0, 4, 2000.0};
  double envelope_window = 0.250;  // moving-RMS window [s]
};

/// Band-pass, full-wave rectification, moving-RMS envelope and MVC
/// normalisation of one sEMG channel, sample by sample.
class EmgChannel {
 public:
  EmgChannel(const EmgSpec& spec, double mvc);
  double step(double raw);

 private:
  SosFilter filter_;
  double mvc_;
  std::vector<double> squares_;
  std::size_t head_ = 0, filled_ = 0;
  double sum_ = 0.0;
  bool primed_ = false;
};

/// Processes one channel of raw samples into normalised activation.
std::vector<double> process_emg(std::span<const double> raw, double mvc, const EmgSpec& spec);

/// Ten-channel stream; columns follow kMuscleNames.
std::vector<MuscleVector> process_emg(std::span<const MuscleVector> raw, const MuscleVector& mvc,
                                      const EmgSpec& spec);

}  // namespace ergo::signal
