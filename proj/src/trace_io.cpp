#include "mswave/trace_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace mswave {

void write_trace_csv(const Trace& trace, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("cannot open trace file for writing: " + path);
  std::fputs("t,value\n", f);
  for (size_t i = 0; i < trace.times.size(); ++i)
    std::fprintf(f, "%.17g,%.17g\n", trace.times[i], trace.values[i]);
  std::fclose(f);
}

Trace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,value", 0) != 0)
    throw ConfigError("trace file missing 't,value' header: " + path);
  Trace t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("malformed trace row: " + line);
    t.times.push_back(std::stod(line.substr(0, comma)));
    t.values.push_back(std::stod(line.substr(comma + 1)));
  }
  if (t.times.size() >= 2) t.dt = t.times[1] - t.times[0];
  return t;
}

ComparisonReport compare_traces(const Trace& a, const Trace& b) {
  if (a.times.empty() || b.times.empty()) throw ConfigError("cannot compare empty traces");
  ComparisonReport rep;
  rep.steps_a = static_cast<long>(a.times.size()) - 1;
  rep.steps_b = static_cast<long>(b.times.size()) - 1;
  rep.dt_a = a.dt;
  rep.dt_b = b.dt;

  auto sample_b = [&](double t) {
    const auto& ts = b.times;
    if (t <= ts.front()) return b.values.front();
    if (t >= ts.back()) return b.values.back();
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const size_t hi = it - ts.begin();
    const size_t lo = hi - 1;
    const double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
    return (1.0 - w) * b.values[lo] + w * b.values[hi];
  };

  double num2 = 0.0, den2 = 0.0;
  const double t_end = std::min(a.times.back(), b.times.back());
  for (size_t i = 0; i < a.times.size(); ++i) {
    if (a.times[i] > t_end + 1e-12) break;
    const double bv = sample_b(a.times[i]);
    const double d = a.values[i] - bv;
    rep.max_abs_error = std::max(rep.max_abs_error, std::abs(d));
    num2 += d * d;
    den2 += bv * bv;
  }
  rep.rel_l2_error = den2 > 0.0 ? std::sqrt(num2 / den2) : std::sqrt(num2);
  return rep;
}

}  // namespace mswave
