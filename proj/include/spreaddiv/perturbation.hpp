#pragma once

#include <functional>

#include "spreaddiv/matrix.hpp"
#include "spreaddiv/rng.hpp"

namespace spreaddiv {

using ScalarField = std::function<double(std::span<const double>)>;
using GradientField = std::function<Vec(std::span<const double>)>;

/// Second-order expansion of the smoothed value <f(x + xi)> for
/// xi ~ N(0, cov): returns f(x) + tr(cov H)/2 with the Hessian estimated by
/// central finite differences. Exact on quadratics up to roundoff. Intended
/// for small dimension; throws above 16.
double perturbation_expectation(const ScalarField& f, std::span<const double> x,
                                const DenseMatrix& cov);

/// Same expansion with tr(cov H)/2 estimated by Monte Carlo Hessian-vector
/// products: xi ~ N(0, cov), H xi from a central difference of the supplied
/// gradient (e.g. a tape backward pass), averaged over probes.
double perturbation_expectation_hvp(const ScalarField& f, const GradientField& grad,
                                    std::span<const double> x, const DenseMatrix& cov,
                                    std::size_t probes, Rng& rng);

}  // namespace spreaddiv
