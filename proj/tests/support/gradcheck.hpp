#pragma once

// Central finite differences against the tape's gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "crnmt/random.hpp"
#include "crnmt/tensor.hpp"

namespace crnmt::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;  // worst input, ||analytic - numeric|| / max(||analytic||, ||numeric||)
  std::size_t entries = 0;
};

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

/// Projects a tensor to a scalar with fixed random weights so every output
/// entry contributes a distinct amount to the loss.
class Projector {
 public:
  explicit Projector(std::uint64_t seed) : seed_(seed) {}
  Tensor operator()(const Tensor& out) const {
    Rng rng(seed_);
    return sum(mul(out, random_tensor(out.shape(), rng, -1.0, 1.0, false)));
  }

 private:
  std::uint64_t seed_;
};

/// `loss` rebuilds the scalar from `inputs` on each call.
inline GradCheckResult grad_check(std::vector<Tensor>& inputs, const std::function<Tensor()>& loss,
                                  double step = 1e-5) {
  Tape::current().clear();
  for (auto& t : inputs) t.zero_grad();
  backward(loss());
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) analytic.push_back(t.grad());

  GradCheckResult result;
  NoGradGuard guard;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto data = inputs[k].mutable_data();
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double up = loss().item();
      data[i] = saved - step;
      const double down = loss().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      diff2 += (analytic[k][i] - numeric) * (analytic[k][i] - numeric);
      a2 += analytic[k][i] * analytic[k][i];
      n2 += numeric * numeric;
      ++result.entries;
    }
    const double scale = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    result.max_rel_error = std::max(result.max_rel_error, std::sqrt(diff2) / scale);
  }
  return result;
}

}  // namespace crnmt::testing
