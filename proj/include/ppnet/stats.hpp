#pragma once

#include <span>
#include <vector>

namespace ppnet {

// Product-moment correlation. Throws ConfigError on length mismatch and
// NumericalError for n < 2 or when either input has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

// d pearson(x, y) / d x_i.
std::vector<double> pearson_gradient_x(std::span<const double> x, std::span<const double> y);

// Linear-interpolation quantile (q in [0, 1]) of an unsorted sample.
double quantile(std::vector<double> v, double q);

double mean(std::span<const double> v);

}  // namespace ppnet
