#include "pgdcd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace pgdcd {

Vec sign_vec(std::span<const double> v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = v[i] > 0.0 ? 1.0 : (v[i] < 0.0 ? -1.0 : 0.0);
  }
  return out;
}

void project_linf_inplace(std::span<double> v, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("project_linf: eps must be positive");
  for (double& x : v) x = std::clamp(x, -eps, eps);
}

Vec project_linf(std::span<const double> v, double eps) {
  Vec out(v.begin(), v.end());
  project_linf_inplace(out, eps);
  return out;
}

Vec clamp_domain(std::span<const double> x, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("clamp_domain: requires lo < hi");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i], lo, hi);
  return out;
}

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "cosine_similarity");
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateInput("cosine_similarity: zero-norm input");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

}  // namespace pgdcd
