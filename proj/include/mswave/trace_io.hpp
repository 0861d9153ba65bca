#ifndef MSWAVE_TRACE_IO_HPP
#define MSWAVE_TRACE_IO_HPP

#include <string>

#include "mswave/msolver.hpp"
#include "mswave/reference.hpp"

namespace mswave {

// CSV with header "t,value", full-precision decimals.
void write_trace_csv(const Trace& trace, const std::string& path);
Trace read_trace_csv(const std::string& path);

struct ComparisonReport {
  double max_abs_error = 0.0;
  double rel_l2_error = 0.0;
  long steps_a = 0, steps_b = 0;
  double dt_a = 0.0, dt_b = 0.0;
};

// Error metrics on a common time grid; b is linearly resampled onto a's grid
// when the steps differ.
ComparisonReport compare_traces(const Trace& a, const Trace& b);

}  // namespace mswave

#endif  // MSWAVE_TRACE_IO_HPP
