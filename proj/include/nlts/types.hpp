#pragma once

#include <complex>
#include <vector>

namespace nlts {

using Complex = std::complex<double>;

/// State vector in the (finite-dimensional) operator realization.
using State = std::vector<Complex>;

/// Block vector: one State per collocation node.
using BlockVec = std::vector<State>;

inline constexpr Complex kImagUnit{0.0, 1.0};

} // namespace nlts
