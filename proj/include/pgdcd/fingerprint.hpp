#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "pgdcd/tensor.hpp"

namespace pgdcd {

enum class FingerprintMode { Exact, Projected };

std::string_view to_string(FingerprintMode mode);
FingerprintMode parse_fingerprint_mode(std::string_view name);

/// 256-bit BLAKE2b digest of the little-endian bytes of each value, in order.
struct ExactDigest {
  std::array<unsigned char, 32> bytes{};
  friend bool operator==(const ExactDigest&, const ExactDigest&) = default;
};

/// frexp decomposition of a projection s = h . delta: s = mantissa * 2^exponent
/// with |mantissa| in [0.5, 1), or (0, 0) for s == 0. The sign of s is kept
/// in the mantissa.
struct ProjectedPair {
  double mantissa = 0.0;
  int exponent = 0;
  friend bool operator==(const ProjectedPair& a, const ProjectedPair& b) {
    return bit_equal(std::span(&a.mantissa, 1), std::span(&b.mantissa, 1)) &&
           a.exponent == b.exponent;
  }
};

class Fingerprint {
 public:
  explicit Fingerprint(ExactDigest d) : value_(d) {}
  explicit Fingerprint(ProjectedPair p) : value_(p) {}

  FingerprintMode mode() const {
    return std::holds_alternative<ExactDigest>(value_) ? FingerprintMode::Exact
                                                       : FingerprintMode::Projected;
  }
  const ExactDigest& digest() const { return std::get<ExactDigest>(value_); }
  const ProjectedPair& pair() const { return std::get<ProjectedPair>(value_); }

  /// 64-bit bucket hash for hash tables.
  std::uint64_t bucket() const;

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;

 private:
  std::variant<ExactDigest, ProjectedPair> value_;
};

/// Random projection vector h with i.i.d. N(0, 1/sqrt(d)) entries (the second
/// parameter is the standard deviation). Regenerated bit-exactly from seed.
struct ProjectionKey {
  Vec h;
  std::uint64_t seed = 0;

  static ProjectionKey generate(std::size_t dim, std::uint64_t seed);
};

ExactDigest exact_digest(std::span<const double> delta);
Fingerprint fingerprint_exact(std::span<const double> delta);
/// Throws std::invalid_argument on a dimension mismatch.
Fingerprint fingerprint_projected(std::span<const double> delta, const ProjectionKey& key);

struct VisitedSetOptions {
  FingerprintMode mode = FingerprintMode::Projected;
  /// Projected mode only: a fingerprint match counts as a revisit only if
  /// the exact digests agree as well.
  bool confirm_on_match = true;
  /// Keep full copies of inserted vectors and compare them on every match.
  /// Memory grows as O(T d); intended for test oracles.
  bool store_full_vectors = false;
};

/// The set of perturbations observed during one attack run, keyed by
/// fingerprint, remembering the iteration each was first stored at.
class VisitedSet {
 public:
  explicit VisitedSet(VisitedSetOptions options = {});

  struct InsertResult {
    bool seen_before = false;
    /// Iteration at which the matching entry was stored (valid if seen_before).
    std::size_t first_visit = 0;
  };

  /// Reports whether `delta` was seen before; inserts it otherwise.
  /// Throws std::invalid_argument if fp.mode() differs from the set's mode.
  InsertResult insert(const Fingerprint& fp, std::span<const double> delta, std::size_t iteration);

  bool contains(const Fingerprint& fp, std::span<const double> delta) const;

  /// Number of distinct entries stored.
  std::size_t size() const { return count_; }
  /// Fingerprint matches that confirmation (digest or full vector) rejected.
  std::size_t rejected_matches() const { return rejected_; }
  const VisitedSetOptions& options() const { return options_; }

 private:
  struct Entry {
    std::optional<ExactDigest> digest;
    Vec full;
    std::size_t iteration = 0;
  };
  struct BucketHash {
    std::size_t operator()(const Fingerprint& fp) const { return static_cast<std::size_t>(fp.bucket()); }
  };

  const Entry* find(const Fingerprint& fp, std::span<const double> delta,
                    const std::optional<ExactDigest>& digest, bool& rejected) const;

  VisitedSetOptions options_;
  std::unordered_map<Fingerprint, std::vector<Entry>, BucketHash> table_;
  std::size_t count_ = 0;
  std::size_t rejected_ = 0;
};

}  // namespace pgdcd
