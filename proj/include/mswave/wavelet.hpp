#ifndef MSWAVE_WAVELET_HPP
#define MSWAVE_WAVELET_HPP

#include <string>

namespace mswave {

// Band-limited source signature.  The delta impulse of the semi-discrete
// problem is realized by injecting w(t)*g, which by linearity equals
// convolving the impulse response with w.
struct Wavelet {
  enum class Kind { GaussianDerivative, Gaussian };

  Kind kind = Kind::GaussianDerivative;
  double omega_cut = 2.0 * 3.14159265358979323846;  // rad/s
  double width_factor = 3.5;  // tau = width_factor / omega_cut
  double delay_factor = 6.0;  // t0 = delay_factor * tau

  double tau() const { return width_factor / omega_cut; }
  double delay() const { return delay_factor * tau(); }
  double operator()(double t) const;

  static Kind kind_from_string(const std::string& s);
  static std::string to_string(Kind k);
};

}  // namespace mswave

#endif  // MSWAVE_WAVELET_HPP
