#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sbs/frame.hpp"
#include "sbs/rng.hpp"

namespace sbs::test {

inline Frame points(std::initializer_list<std::pair<double, double>> xy) {
  std::vector<double> c;
  for (auto [x, y] : xy) {
    c.push_back(x);
    c.push_back(y);
  }
  return Frame(2, std::move(c));
}

inline Frame random_frame(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> c(2 * n);
  for (double& v : c) v = uniform01(rng);
  return Frame(2, std::move(c));
}

/// Plain double loop, independent of the library's distance code.
inline double euclid(const Frame& f, std::size_t i, std::size_t j) {
  const double dx = f.coord(i)[0] - f.coord(j)[0];
  const double dy = f.coord(i)[1] - f.coord(j)[1];
  return std::sqrt(dx * dx + dy * dy);
}

inline double sample_mean(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_sd(std::span<const double> v) {
  const double m = sample_mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace sbs::test
