#pragma once

#include <functional>
#include <vector>

namespace iahash {

// Central-difference check of an analytic gradient. Returns
//   max_i |g_fd(i) - analytic(i)| / max(1e-8, |g_fd(i)| + |analytic(i)|).
// Rejects non-finite values of f.
double finite_diff_check(const std::function<double(const std::vector<double>&)>& f,
                         const std::vector<double>& x, const std::vector<double>& analytic_grad,
                         double eps);

}  // namespace iahash
