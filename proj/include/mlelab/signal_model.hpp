#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "common.hpp"
#include "fft.hpp"

namespace mlelab {

/// Gaussian pulse exp(-2*pi*t^2/tw^2), optionally modulated by cos(2*pi*fc*t).
struct PulseSpec {
  double tw = 0.0;  // s
  double fc = 0.0;  // Hz
  double es = 1.0;
  int oversample = 32;

  void validate() const {
    require(std::isfinite(tw) && tw > 0.0, ErrorKind::argument, "pulse width tw must be > 0");
    require(std::isfinite(fc) && fc >= 0.0, ErrorKind::argument, "carrier fc must be >= 0");
    require(std::isfinite(es) && es > 0.0, ErrorKind::argument, "pulse energy es must be > 0");
    require(oversample >= 16, ErrorKind::argument, "oversample must be >= 16");
  }

  double sample_interval() const {
    double scale = tw;
    if (fc > 0.0) scale = std::min(scale, 1.0 / fc);
    return scale / oversample;
  }

  /// Half-width beyond which the envelope is below 1e-8 of its peak.
  double support_halfwidth() const { return tw * std::sqrt(std::log(1e8) / two_pi); }
};

struct SampledPulse {
  PulseSpec spec;
  double dt = 0.0;
  std::ptrdiff_t center = 0;  // index of t = 0
  std::vector<double> samples;

  double time(std::size_t i) const { return (static_cast<double>(i) - static_cast<double>(center)) * dt; }

  double energy() const {
    double e = 0.0;
    for (double v : samples) e += v * v;
    return e * dt;
  }
};

inline constexpr std::size_t default_max_pulse_samples = std::size_t{1} << 22;

inline SampledPulse build_pulse(const PulseSpec& spec, std::size_t max_samples = default_max_pulse_samples) {
  spec.validate();
  SampledPulse p;
  p.spec = spec;
  p.dt = spec.sample_interval();
  const double half = spec.support_halfwidth();
  const auto n_half = static_cast<std::size_t>(std::ceil(half / p.dt));
  const std::size_t n = 2 * n_half + 1;
  if (n > max_samples)
    fail(ErrorKind::resource, "pulse needs " + std::to_string(n) + " samples, limit is " +
                                  std::to_string(max_samples));
  p.center = static_cast<std::ptrdiff_t>(n_half);
  p.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = p.time(i);
    const double env = std::exp(-two_pi * t * t / (spec.tw * spec.tw));
    p.samples[i] = env * std::cos(two_pi * spec.fc * t);
  }
  const double scale = std::sqrt(spec.es / p.energy());
  for (auto& v : p.samples) v *= scale;
  return p;
}

/// Normalized stationary autocorrelation R(theta) = sum_m w_m cos(2*pi*f_m*theta)
/// held as a one-sided line spectrum (weights sum to one). The representation
/// is exact for the periodized correlation of a sampled pulse and gives
/// band-limited interpolation and spectral derivatives for free.
class AcrModel {
 public:
  AcrModel() = default;

  AcrModel(std::vector<double> freqs, std::vector<double> weights, double energy,
           std::optional<PulseSpec> spec = std::nullopt)
      : freqs_(std::move(freqs)), weights_(std::move(weights)), energy_(energy), spec_(spec) {
    require(freqs_.size() == weights_.size() && !freqs_.empty(), ErrorKind::argument,
            "spectrum needs matching, non-empty frequency and weight vectors");
    require(energy_ > 0.0, ErrorKind::argument, "signal energy must be > 0");
    double total = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      require(freqs_[i] >= 0.0 && weights_[i] >= 0.0, ErrorKind::argument,
              "spectral lines need nonnegative frequency and weight");
      total += weights_[i];
    }
    if (!(total > 0.0)) fail(ErrorKind::degenerate, "signal spectrum is identically zero");
    for (auto& w : weights_) w /= total;
    double m2 = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) m2 += weights_[i] * freqs_[i] * freqs_[i];
    beta_s2_ = 4.0 * pi * pi * m2;
    fmax_ = *std::max_element(freqs_.begin(), freqs_.end());
  }

  /// Normalized ACR, R(0) = 1.
  double r(double theta) const {
    double s = 0.0;
    for (std::size_t i = 0; i < freqs_.size(); ++i) s += weights_[i] * std::cos(two_pi * freqs_[i] * theta);
    return s;
  }

  /// d^k R / d theta^k of the normalized ACR.
  double derivative(double theta, int order) const {
    if (order == 0) return r(theta);
    const double shift = 0.5 * pi * order;
    double s = 0.0;
    for (std::size_t i = 0; i < freqs_.size(); ++i) {
      const double w = two_pi * freqs_[i];
      s += weights_[i] * std::pow(w, order) * std::cos(w * theta + shift);
    }
    return s;
  }

  double rdot(double theta) const { return derivative(theta, 1); }
  double rddot(double theta) const { return derivative(theta, 2); }

  /// Unnormalized ACR R_s(theta) and its derivatives, in energy units.
  double rs(double theta) const { return energy_ * r(theta); }
  double rs_dot(double theta) const { return energy_ * rdot(theta); }
  double rs_ddot(double theta) const { return energy_ * rddot(theta); }

  /// Normalized complex envelope, downshifted by the mean frequency.
  std::complex<double> envelope(double theta) const {
    std::complex<double> s{0.0, 0.0};
    for (std::size_t i = 0; i < freqs_.size(); ++i)
      s += weights_[i] * std::polar(1.0, two_pi * (freqs_[i] - fc_mean_) * theta);
    return s;
  }
  double envelope_magnitude(double theta) const { return std::abs(envelope(theta)); }

  double energy() const { return energy_; }
  double beta_s2() const { return beta_s2_; }
  double fc_mean() const { return fc_mean_; }
  double max_frequency() const { return fmax_; }

  /// Curvature of the envelope about the current mean frequency.
  double beta_e2() const {
    double m = 0.0;
    for (std::size_t i = 0; i < freqs_.size(); ++i) {
      const double d = freqs_[i] - fc_mean_;
      m += weights_[i] * d * d;
    }
    return 4.0 * pi * pi * m;
  }

  const std::vector<double>& freqs() const { return freqs_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::optional<PulseSpec>& spec() const { return spec_; }

  AcrModel with_mean_frequency(double fc) const {
    AcrModel m = *this;
    m.fc_mean_ = fc;
    return m;
  }

 private:
  std::vector<double> freqs_;
  std::vector<double> weights_;
  double energy_ = 1.0;
  double beta_s2_ = 0.0;
  double fmax_ = 0.0;
  double fc_mean_ = 0.0;
  std::optional<PulseSpec> spec_;
};

/// Correlation of the sampled pulse by FFT. `max_lag` is the largest |theta|
/// at which R will be queried; the zero padding keeps the periodized
/// correlation exact there.
inline AcrModel build_acr(const SampledPulse& pulse, double max_lag) {
  require(max_lag >= 0.0 && std::isfinite(max_lag), ErrorKind::argument, "max_lag must be finite and >= 0");
  const double support = 2.0 * pulse.spec.support_halfwidth();
  const double period = 2.0 * (max_lag + 2.0 * support);
  std::size_t len = detail::next_pow2(static_cast<std::size_t>(std::ceil(period / pulse.dt)));
  len = std::max(len, detail::next_pow2(2 * pulse.samples.size()));

  std::vector<double> buf(len, 0.0);
  // Circularly place the pulse so t = 0 sits at index 0; only |S|^2 is used.
  for (std::size_t i = 0; i < pulse.samples.size(); ++i) {
    const auto k = static_cast<std::ptrdiff_t>(i) - pulse.center;
    buf[static_cast<std::size_t>((k + static_cast<std::ptrdiff_t>(len)) % static_cast<std::ptrdiff_t>(len))] =
        pulse.samples[i];
  }
  const auto spec = detail::rfft(std::move(buf));
  const double df = 1.0 / (static_cast<double>(len) * pulse.dt);

  std::vector<double> raw(spec.size());
  double wmax = 0.0;
  for (std::size_t m = 0; m < spec.size(); ++m) {
    const bool single = (m == 0) || (m == len / 2);
    raw[m] = (single ? 1.0 : 2.0) * std::norm(spec[m]);
    wmax = std::max(wmax, raw[m]);
  }
  if (!(wmax > 0.0)) fail(ErrorKind::degenerate, "pulse spectrum is identically zero");

  std::vector<double> f, w;
  for (std::size_t m = 0; m < raw.size(); ++m) {
    if (raw[m] > 1e-18 * wmax) {
      f.push_back(static_cast<double>(m) * df);
      w.push_back(raw[m]);
    }
  }
  return AcrModel(std::move(f), std::move(w), pulse.energy(), pulse.spec);
}

/// Power-weighted mean of the one-sided spectrum (no window).
inline double spectral_mean_frequency(const AcrModel& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.freqs().size(); ++i) s += m.weights()[i] * m.freqs()[i];
  return s;
}

/// Signal whose spectrum is flat over [f_lo, f_hi]; useful as an analytic reference.
inline AcrModel flat_spectrum_model(double f_lo, double f_hi, std::size_t bins = 2048) {
  require(f_lo >= 0.0 && f_hi > f_lo && bins >= 2, ErrorKind::argument, "flat spectrum needs 0 <= f_lo < f_hi");
  const double df = (f_hi - f_lo) / static_cast<double>(bins);
  std::vector<double> f(bins), w(bins, 1.0);
  for (std::size_t i = 0; i < bins; ++i) f[i] = f_lo + (static_cast<double>(i) + 0.5) * df;
  const AcrModel m(std::move(f), std::move(w), 1.0);
  return m.with_mean_frequency(spectral_mean_frequency(m));
}

struct MeanFrequencyOptions {
  std::size_t theta_points = 4097;
  double freq_oversample = 16.0;  // frequency steps per 1/(window width)
};

/// Mean frequency of the ACR seen through the a priori window, from the
/// positive-frequency real part of the windowed Fourier transform.
inline double windowed_mean_frequency(const AcrModel& model, const DomainSpec& domain,
                                      MeanFrequencyOptions opt = {}) {
  domain.validate();
  require(opt.theta_points >= 4096, ErrorKind::argument, "mean frequency needs >= 4096 window points");
  const auto x = linspace(domain.theta1 - domain.theta0, domain.theta2 - domain.theta0, opt.theta_points);
  std::vector<double> rx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) rx[i] = model.r(x[i]);

  const double width = domain.width();
  const double f_top = 1.05 * model.max_frequency() + 8.0 / width;
  const double df = 1.0 / (opt.freq_oversample * width);
  const auto nf = static_cast<std::size_t>(std::ceil(f_top / df)) + 1;

  std::vector<double> fgrid(nf), re(nf);
  std::vector<double> integrand(x.size());
  for (std::size_t k = 0; k < nf; ++k) {
    const double f = static_cast<double>(k) * df;
    fgrid[k] = f;
    for (std::size_t i = 0; i < x.size(); ++i) integrand[i] = rx[i] * std::cos(two_pi * f * x[i]);
    re[k] = trapz(x, integrand);
  }
  std::vector<double> fre(nf);
  for (std::size_t k = 0; k < nf; ++k) fre[k] = fgrid[k] * re[k];
  const double m0 = trapz(fgrid, re);
  const double m1 = trapz(fgrid, fre);
  if (!(m0 > 0.0)) fail(ErrorKind::degenerate, "positive-frequency spectrum of the ACR vanishes on the window");
  return m1 / m0;
}

/// Attach the window-dependent mean frequency (and hence the envelope) to a model.
inline AcrModel envelope_and_mean_frequency(const AcrModel& model, const DomainSpec& domain,
                                            MeanFrequencyOptions opt = {}) {
  return model.with_mean_frequency(windowed_mean_frequency(model, domain, opt));
}

struct Curvatures {
  double beta_s2 = 0.0;
  double beta_e2 = 0.0;
};

inline Curvatures curvatures(const AcrModel& model) {
  const double r2 = model.rddot(0.0);
  if (!(r2 < 0.0)) fail(ErrorKind::model, "ACR curvature at zero lag is not negative (not a maximum)");
  Curvatures c{-r2, model.beta_e2()};
  if (!(c.beta_e2 > 0.0)) fail(ErrorKind::model, "envelope curvature is not positive");
  return c;
}

/// Relative residual of beta_s^2 = beta_e^2 + 4 pi^2 fc_mean^2.
inline double curvature_identity_residual(const AcrModel& model) {
  const double bs = model.beta_s2();
  return std::abs(bs - model.beta_e2() - 4.0 * pi * pi * model.fc_mean() * model.fc_mean()) / bs;
}

struct NoiseDerivStats {
  double e_s = 0.0;
  double e_sdot = 0.0;
  double e_sddot = 0.0;
  double nu0 = 0.0;
  double delta4 = 0.0;
};

/// Derivative energies of the sampled pulse via FFT differentiation.
inline NoiseDerivStats noise_deriv_stats(const SampledPulse& pulse) {
  const std::size_t n = pulse.samples.size();
  const std::size_t len = detail::next_pow2(2 * n);
  std::vector<double> buf(len, 0.0);
  std::copy(pulse.samples.begin(), pulse.samples.end(), buf.begin());
  const auto spec = detail::rfft(buf);
  const double df = 1.0 / (static_cast<double>(len) * pulse.dt);

  std::vector<std::complex<double>> d1(spec.size()), d2(spec.size());
  for (std::size_t m = 0; m < spec.size(); ++m) {
    const double w = two_pi * static_cast<double>(m) * df;
    const bool nyquist = (m == len / 2);
    d1[m] = nyquist ? 0.0 : std::complex<double>(0.0, w) * spec[m];
    d2[m] = nyquist ? 0.0 : -w * w * spec[m];
  }
  const auto s1 = detail::irfft(std::move(d1), len);
  const auto s2 = detail::irfft(std::move(d2), len);

  NoiseDerivStats st;
  double a = 0.0, b = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    a += s1[i] * s1[i];
    b += s2[i] * s2[i];
    ab += s1[i] * s2[i];
  }
  st.e_s = pulse.energy();
  st.e_sdot = a * pulse.dt;
  st.e_sddot = b * pulse.dt;
  st.nu0 = std::clamp(ab * pulse.dt / std::sqrt(st.e_sdot * st.e_sddot), -1.0, 1.0);
  st.delta4 = st.e_sddot / st.e_s;
  return st;
}

/// Pulse and its ACR with the mean frequency fixed for a given window; the
/// usual entry point for the higher-level modules.
struct SignalSetup {
  SampledPulse pulse;
  AcrModel model;
  NoiseDerivStats stats;
};

inline SignalSetup make_signal(const PulseSpec& spec, const DomainSpec& domain) {
  domain.validate();
  SignalSetup s;
  s.pulse = build_pulse(spec);
  s.model = envelope_and_mean_frequency(build_acr(s.pulse, domain.width()), domain);
  s.stats = noise_deriv_stats(s.pulse);
  return s;
}

}  // namespace mlelab
