#include "iahash/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace iahash {

double finite_diff_check(const std::function<double(const std::vector<double>&)>& f,
                         const std::vector<double>& x, const std::vector<double>& analytic_grad,
                         double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_check: eps must be positive");
  if (analytic_grad.size() != x.size())
    throw std::invalid_argument("finite_diff_check: gradient length " +
                                std::to_string(analytic_grad.size()) + " != point length " +
                                std::to_string(x.size()));
  std::vector<double> probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    double hi = f(probe);
    probe[i] = x[i] - eps;
    double lo = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(hi) || !std::isfinite(lo))
      throw std::runtime_error("finite_diff_check: non-finite function value at index " +
                               std::to_string(i));
    double fd = (hi - lo) / (2.0 * eps);
    double err = std::abs(fd - analytic_grad[i]) / std::max(1e-8, std::abs(fd) + std::abs(analytic_grad[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace iahash
