// Copyright 2026 The qbreak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qbreak/distributions.hpp"

#include <cmath>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "qbreak/error.hpp"

namespace qbreak {

double normal_pdf(double x) {
  return boost::math::pdf(boost::math::normal_distribution<double>(), x);
}

double normal_cdf(double x) {
  return boost::math::cdf(boost::math::normal_distribution<double>(), x);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw_invalid("distributions", "normal quantile level must be in (0,1)");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double chisq_cdf(int df, double x) {
  if (df < 1) throw_invalid("distributions", "chi-square df must be >= 1");
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(0.5 * df, 0.5 * x);
}

double chisq_survival(int df, double x) {
  if (df < 1) throw_invalid("distributions", "chi-square df must be >= 1");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

double chisq_quantile(int df, double level) {
  if (df < 1) throw_invalid("distributions", "chi-square df must be >= 1");
  if (!(level > 0.0 && level < 1.0)) {
    throw_invalid("distributions",
                  "chi-square level must be in (0,1), got " +
                      std::to_string(level));
  }
  return 2.0 * boost::math::gamma_p_inv(0.5 * df, level);
}

}  // namespace qbreak
