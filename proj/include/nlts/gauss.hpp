#pragma once

namespace nlts {

namespace detail {
// 8-point Gauss-Legendre rule on [-1, 1].
inline constexpr double kGauss8X[8] = {
    -0.96028985649753623, -0.79666647741362674, -0.52553240991632899,
    -0.18343464249564980, 0.18343464249564980,  0.52553240991632899,
    0.79666647741362674,  0.96028985649753623};
inline constexpr double kGauss8W[8] = {
    0.10122853629037626, 0.22238103445337447, 0.31370664587788729,
    0.36268378337836198, 0.36268378337836198, 0.31370664587788729,
    0.22238103445337447, 0.10122853629037626};
} // namespace detail

/// Composite 8-point Gauss-Legendre over [a, b] split into `panels` panels.
/// Calls visit(t, w) for every node in ascending t order.
template <typename F>
void gauss8_panels(double a, double b, int panels, F&& visit) {
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * width;
    const double mid = lo + 0.5 * width;
    const double half = 0.5 * width;
    for (int i = 0; i < 8; ++i) {
      visit(mid + half * detail::kGauss8X[i], half * detail::kGauss8W[i]);
    }
  }
}

} // namespace nlts
