#include "ergo/signal.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include <Eigen/QR>

namespace ergo::signal {

void DifferentiatorSpec::validate() const {
  if (window < 3 || window % 2 == 0) throw ValidationError("differentiator window must be odd and >= 3");
  if (order < 2 || order >= window)
    throw ValidationError("differentiator order must be >= 2 and smaller than the window");
}

Eigen::MatrixXd savgol_weights(int window, int order, int eval, int max_derivative) {
  Eigen::MatrixXd A(window, order + 1);
  for (int j = 0; j < window; ++j) {
    const double t = j - eval;
    double p = 1.0;
    for (int k = 0; k <= order; ++k) {
      A(j, k) = p;
      p *= t;
    }
  }
  // Least-squares coefficients c = pinv(A) y; derivative d at t = 0 is d! c_d.
  const Eigen::MatrixXd pinv = A.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(window, window));
  Eigen::MatrixXd w(max_derivative + 1, window);
  double fact = 1.0;
  for (int d = 0; d <= max_derivative; ++d) {
    if (d > 0) fact *= d;
    w.row(d) = fact * pinv.row(d);
  }
  return w;
}

StreamingDifferentiator::StreamingDifferentiator(DifferentiatorSpec spec, double sample_rate, int channels)
    : spec_(spec), fs_(sample_rate), channels_(channels) {
  spec_.validate();
  if (!(sample_rate > 0.0)) throw ValidationError("sample rate must be positive");
  for (int e = 0; e < spec_.window; ++e) weights_.push_back(savgol_weights(spec_.window, spec_.order, e));
}

DerivativeSample StreamingDifferentiator::evaluate(std::size_t window_start, int eval) const {
  const Eigen::MatrixXd& w = weights_[static_cast<std::size_t>(eval)];
  DerivativeSample s;
  s.index = window_start + static_cast<std::size_t>(eval);
  s.value = buffer_[static_cast<std::size_t>(eval)];
  s.rate = Eigen::VectorXd::Zero(channels_);
  s.accel = Eigen::VectorXd::Zero(channels_);
  for (int j = 0; j < spec_.window; ++j) {
    const auto& x = buffer_[static_cast<std::size_t>(j)];
    s.rate += w(1, j) * x;
    s.accel += w(2, j) * x;
  }
  s.rate *= fs_;
  s.accel *= fs_ * fs_;
  return s;
}

std::vector<DerivativeSample> StreamingDifferentiator::push(const Eigen::VectorXd& x) {
  if (x.size() != channels_) throw ValidationError("differentiator channel count mismatch");
  buffer_.push_back(x);
  ++count_;
  const auto N = static_cast<std::size_t>(spec_.window);
  if (buffer_.size() > N) buffer_.pop_front();
  std::vector<DerivativeSample> out;
  if (count_ < N) return out;
  const std::size_t start = count_ - N;
  if (count_ == N) {
    for (int e = 0; e <= spec_.lag(); ++e) out.push_back(evaluate(start, e));
  } else {
    out.push_back(evaluate(start, spec_.lag()));
  }
  return out;
}

std::vector<DerivativeSample> StreamingDifferentiator::flush() {
  const auto N = static_cast<std::size_t>(spec_.window);
  if (count_ < N) {
    std::ostringstream os;
    os << "differentiator window of " << N << " samples is longer than the stream (" << count_ << ")";
    throw ValidationError(os.str());
  }
  std::vector<DerivativeSample> out;
  for (int e = spec_.lag() + 1; e < spec_.window; ++e) out.push_back(evaluate(count_ - N, e));
  return out;
}

Derivatives differentiate(std::span<const double> x, double sample_rate, const DifferentiatorSpec& spec) {
  StreamingDifferentiator diff(spec, sample_rate, 1);
  Derivatives d;
  d.rate.resize(x.size());
  d.accel.resize(x.size());
  auto store = [&](const std::vector<DerivativeSample>& samples) {
    for (const auto& s : samples) {
      d.rate[s.index] = s.rate[0];
      d.accel[s.index] = s.accel[0];
    }
  };
  Eigen::VectorXd v(1);
  for (double xi : x) {
    v[0] = xi;
    store(diff.push(v));
  }
  store(diff.flush());
  return d;
}

// ---------------------------------------------------------------------------

SosFilter::SosFilter(std::vector<Biquad> sections)
    : sections_(std::move(sections)), state_(sections_.size(), {0.0, 0.0}) {}

double SosFilter::step(double x) {
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    const Biquad& s = sections_[i];
    auto& z = state_[i];
    const double y = s.b0 * x + z[0];
    z[0] = s.b1 * x - s.a1 * y + z[1];
    z[1] = s.b2 * x - s.a2 * y;
    x = y;
  }
  return x;
}

void SosFilter::reset_steady(double x) {
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    const Biquad& s = sections_[i];
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double y = dc * x;
    state_[i] = {y - s.b0 * x, s.b2 * x - s.a2 * y};
    x = y;
  }
}

void SosFilter::reset() {
  for (auto& z : state_) z = {0.0, 0.0};
}

double SosFilter::gain(double f, double fs) const {
  const std::complex<double> zi = std::polar(1.0, -2.0 * std::numbers::pi * f / fs);
  std::complex<double> h = 1.0;
  for (const auto& s : sections_) {
    h *= (s.b0 + s.b1 * zi + s.b2 * zi * zi) / (1.0 + s.a1 * zi + s.a2 * zi * zi);
  }
  return std::abs(h);
}

SosFilter SosFilter::then(const SosFilter& next) const {
  auto all = sections_;
  all.insert(all.end(), next.sections_.begin(), next.sections_.end());
  return SosFilter(std::move(all));
}

namespace {

enum class Band { Low, High };

SosFilter butterworth(int order, double cutoff, double fs, Band band) {
  if (order < 1) throw ValidationError("filter order must be positive");
  if (!(cutoff > 0.0) || !(cutoff < fs / 2.0))
    throw ValidationError("cutoff frequency must lie strictly between 0 and the Nyquist frequency");
  const double K = 2.0 * fs;
  const double W = K * std::tan(std::numbers::pi * cutoff / fs);  // prewarped
  std::vector<Biquad> sections;
  for (int k = 0; k < order / 2; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    const double alpha = -2.0 * std::cos(theta) * W * K;  // -2 Re(p) W K > 0
    const double a0 = K * K + alpha + W * W;
    Biquad s;
    s.a1 = (2.0 * W * W - 2.0 * K * K) / a0;
    s.a2 = (K * K - alpha + W * W) / a0;
    if (band == Band::Low) {
      s.b0 = W * W / a0;
      s.b1 = 2.0 * W * W / a0;
      s.b2 = W * W / a0;
    } else {
      s.b0 = K * K / a0;
      s.b1 = -2.0 * K * K / a0;
      s.b2 = K * K / a0;
    }
    sections.push_back(s);
  }
  if (order % 2 == 1) {
    const double a0 = K + W;
    Biquad s;
    s.a1 = (W - K) / a0;
    if (band == Band::Low) {
      s.b0 = W / a0;
      s.b1 = W / a0;
    } else {
      s.b0 = K / a0;
      s.b1 = -K / a0;
    }
    sections.push_back(s);
  }
  return SosFilter(std::move(sections));
}

}  // namespace

SosFilter butterworth_lowpass(int order, double cutoff, double fs) {
  return butterworth(order, cutoff, fs, Band::Low);
}

SosFilter butterworth_highpass(int order, double cutoff, double fs) {
  return butterworth(order, cutoff, fs, Band::High);
}

void FilterSpec::validate() const {
  if (!(sample_rate > 0.0)) throw ValidationError("sample rate must be positive");
  if (order < 1) throw ValidationError("filter order must be positive");
  const double nyquist = sample_rate / 2.0;
  if (!(high < nyquist)) {
    std::ostringstream os;
    os << "sample rate " << sample_rate << " Hz is too low for a " << high << " Hz band edge";
    throw ValidationError(os.str());
  }
  if (kind == Kind::BandPass && !(low > 0.0 && low < high))
    throw ValidationError("band-pass needs 0 < low < high");
  if (kind == Kind::LowPass && !(high > 0.0)) throw ValidationError("low-pass cutoff must be positive");
}

SosFilter FilterSpec::design() const {
  validate();
  SosFilter lp = butterworth_lowpass(order, high, sample_rate);
  if (kind == Kind::LowPass) return lp;
  return butterworth_highpass(order, low, sample_rate).then(lp);
}

// ---------------------------------------------------------------------------

EmgChannel::EmgChannel(const EmgSpec& spec, double mvc) : filter_(spec.band.design()), mvc_(mvc) {
  if (!(mvc > 0.0) || !std::isfinite(mvc)) throw ValidationError("MVC must be positive");
  const auto n = static_cast<std::size_t>(std::lround(spec.envelope_window * spec.band.sample_rate));
  if (n < 1) throw ValidationError("envelope window shorter than one sample");
  squares_.assign(n, 0.0);
}

double EmgChannel::step(double raw) {
  if (!primed_) {
    filter_.reset_steady(raw);
    primed_ = true;
  }
  const double rectified = std::abs(filter_.step(raw));
  const double sq = rectified * rectified;
  sum_ += sq - squares_[head_];
  squares_[head_] = sq;
  head_ = (head_ + 1) % squares_.size();
  if (filled_ < squares_.size()) ++filled_;
  // Rebuild the running sum once per window to keep rounding from drifting.
  if (head_ == 0) {
    sum_ = 0.0;
    for (double v : squares_) sum_ += v;
  }
  return std::sqrt(std::max(sum_, 0.0) / static_cast<double>(filled_)) / mvc_;
}

std::vector<double> process_emg(std::span<const double> raw, double mvc, const EmgSpec& spec) {
  EmgChannel ch(spec, mvc);
  std::vector<double> out;
  out.reserve(raw.size());
  for (double x : raw) {
    if (!std::isfinite(x)) throw ValidationError("sEMG sample is not finite");
    out.push_back(ch.step(x));
  }
  return out;
}

std::vector<MuscleVector> process_emg(std::span<const MuscleVector> raw, const MuscleVector& mvc,
                                      const EmgSpec& spec) {
  std::vector<EmgChannel> channels;
  for (int c = 0; c < kNumMuscles; ++c) channels.emplace_back(spec, mvc[c]);
  std::vector<MuscleVector> out;
  out.reserve(raw.size());
  for (const auto& x : raw) {
    if (!x.allFinite()) throw ValidationError("sEMG sample is not finite");
    MuscleVector y;
    for (int c = 0; c < kNumMuscles; ++c) y[c] = channels[static_cast<std::size_t>(c)].step(x[c]);
    out.push_back(y);
  }
  return out;
}

}  // namespace ergo::signal
