#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace pgdcd {

/// Flat vector of 64-bit floats. Houses images, perturbations, gradients
/// and projection keys alike; shape information, if any, is metadata.
using Vec = std::vector<double>;

/// Raised when a cosine similarity is requested on a zero-norm vector.
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Elementwise sign with sign(0) = 0.
Vec sign_vec(std::span<const double> v);

/// Nearest point of the L-infinity ball of radius `eps`: a per-coordinate
/// clamp to [-eps, eps]. Throws std::invalid_argument unless eps > 0.
Vec project_linf(std::span<const double> v, double eps);
void project_linf_inplace(std::span<double> v, double eps);

/// Clamp every coordinate into [lo, hi]. Throws unless lo < hi.
Vec clamp_domain(std::span<const double> x, double lo, double hi);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double norm_inf(std::span<const double> v);

/// x^T y / (|x|_2 |y|_2). Throws DegenerateInput if either norm is zero.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> v);

/// Bitwise equality: distinguishes +0/-0 and compares NaN payloads.
bool bit_equal(std::span<const double> a, std::span<const double> b);

void require_same_dim(std::size_t a, std::size_t b, const char* what);

}  // namespace pgdcd
