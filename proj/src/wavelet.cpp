#include "mswave/wavelet.hpp"

#include <cmath>

#include "mswave/types.hpp"

namespace mswave {

double Wavelet::operator()(double t) const {
  const double x = (t - delay()) / tau();
  switch (kind) {
    case Kind::GaussianDerivative:
      // peak amplitude 1 at x = -1/+1
      return -x * std::exp(0.5 - 0.5 * x * x);
    case Kind::Gaussian:
      return std::exp(-0.5 * x * x);
  }
  return 0.0;
}

Wavelet::Kind Wavelet::kind_from_string(const std::string& s) {
  if (s == "gaussian_derivative") return Kind::GaussianDerivative;
  if (s == "gaussian") return Kind::Gaussian;
  throw ConfigError("unknown wavelet kind: " + s);
}

std::string Wavelet::to_string(Kind k) {
  switch (k) {
    case Kind::GaussianDerivative: return "gaussian_derivative";
    case Kind::Gaussian: return "gaussian";
  }
  return "?";
}

}  // namespace mswave
