#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "grami/numeric/tape.hpp"

namespace grami {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::string worst_name;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Builds the scalar being checked on the given tape from the given parameters.
// Must be deterministic: any noise has to be drawn once, outside the function.
using ScalarFn = std::function<Var<double>(Tape<double>&, ParamStore<double>&)>;

// Compares the reverse-mode gradient of every flat-view coordinate with a
// central difference of step h. The relative error of a coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, floor); the floor keeps
// coordinates with vanishing gradient from dominating through round-off.
inline GradCheckResult grad_check(const ScalarFn& f, ParamStore<double>& params, double h = 1e-5,
                                  double floor = 1e-6) {
  params.zero_grad();
  {
    Tape<double> tape;
    tape.backward(f(tape, params));
  }
  const std::vector<double> analytic = params.flat_grads();
  auto eval = [&] {
    Tape<double> tape;
    return f(tape, params).item();
  };

  GradCheckResult result;
  result.coordinates = analytic.size();
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    double& x = params.flat_at(i);
    const double saved = x;
    x = saved + h;
    const double up = eval();
    x = saved - h;
    const double down = eval();
    x = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (i == 0 || rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_index = i;
      result.worst_name = params.name_at(i);
      result.analytic = analytic[i];
      result.numeric = numeric;
    }
  }
  return result;
}

}  // namespace grami
