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

#ifndef QBREAK_DISTRIBUTIONS_HPP_
#define QBREAK_DISTRIBUTIONS_HPP_

namespace qbreak {

double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);

// Chi-square distribution with df degrees of freedom.
double chisq_cdf(int df, double x);
double chisq_survival(int df, double x);
// Inverse CDF through regularized incomplete gamma inversion.
double chisq_quantile(int df, double level);

}  // namespace qbreak

#endif  // QBREAK_DISTRIBUTIONS_HPP_
