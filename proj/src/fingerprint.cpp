#include "pgdcd/fingerprint.hpp"

#include <sodium.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "pgdcd/rng.hpp"

namespace pgdcd {

std::string_view to_string(FingerprintMode mode) {
  return mode == FingerprintMode::Exact ? "exact" : "projected";
}

FingerprintMode parse_fingerprint_mode(std::string_view name) {
  if (name == "exact") return FingerprintMode::Exact;
  if (name == "projected") return FingerprintMode::Projected;
  throw std::invalid_argument("unknown fingerprint mode: " + std::string(name));
}

std::uint64_t Fingerprint::bucket() const {
  if (const auto* d = std::get_if<ExactDigest>(&value_)) {
    std::uint64_t h = 0;
    std::memcpy(&h, d->bytes.data(), sizeof(h));
    return h;
  }
  const auto& p = std::get<ProjectedPair>(value_);
  const auto m = std::bit_cast<std::uint64_t>(p.mantissa);
  const auto e = static_cast<std::uint64_t>(static_cast<std::int64_t>(p.exponent));
  // splitmix64 finalizer over the combined bits
  std::uint64_t z = m ^ (e * 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ProjectionKey ProjectionKey::generate(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("ProjectionKey: zero dimension");
  Rng rng(seed);
  ProjectionKey key;
  key.seed = seed;
  key.h.resize(dim);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : key.h) v = rng.normal(0.0, stddev);
  return key;
}

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialization failed");
}

}  // namespace

ExactDigest exact_digest(std::span<const double> delta) {
  ensure_sodium();
  crypto_generichash_state state;
  crypto_generichash_init(&state, nullptr, 0, 32);
  unsigned char chunk[8 * 64];
  std::size_t fill = 0;
  for (double v : delta) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) chunk[fill++] = static_cast<unsigned char>(bits >> (8 * b));
    if (fill == sizeof(chunk)) {
      crypto_generichash_update(&state, chunk, fill);
      fill = 0;
    }
  }
  if (fill != 0) crypto_generichash_update(&state, chunk, fill);
  ExactDigest out;
  crypto_generichash_final(&state, out.bytes.data(), out.bytes.size());
  return out;
}

Fingerprint fingerprint_exact(std::span<const double> delta) { return Fingerprint(exact_digest(delta)); }

Fingerprint fingerprint_projected(std::span<const double> delta, const ProjectionKey& key) {
  require_same_dim(delta.size(), key.h.size(), "fingerprint_projected");
  const double s = dot(key.h, delta);
  ProjectedPair p;
  if (s != 0.0) p.mantissa = std::frexp(s, &p.exponent);
  return Fingerprint(p);
}

// ---------------------------------------------------------------------------

VisitedSet::VisitedSet(VisitedSetOptions options) : options_(options) {}

const VisitedSet::Entry* VisitedSet::find(const Fingerprint& fp, std::span<const double> delta,
                                          const std::optional<ExactDigest>& digest,
                                          bool& rejected) const {
  rejected = false;
  const auto it = table_.find(fp);
  if (it == table_.end()) return nullptr;
  for (const Entry& e : it->second) {
    if (digest && e.digest && *digest != *e.digest) {
      rejected = true;
      continue;
    }
    if (options_.store_full_vectors && !bit_equal(e.full, delta)) {
      rejected = true;
      continue;
    }
    return &e;
  }
  return nullptr;
}

VisitedSet::InsertResult VisitedSet::insert(const Fingerprint& fp, std::span<const double> delta,
                                            std::size_t iteration) {
  if (fp.mode() != options_.mode) throw std::invalid_argument("VisitedSet: fingerprint mode mismatch");
  std::optional<ExactDigest> digest;
  if (options_.mode == FingerprintMode::Projected && options_.confirm_on_match) {
    digest = exact_digest(delta);
  }
  bool rejected = false;
  if (const Entry* e = find(fp, delta, digest, rejected)) return {true, e->iteration};
  if (rejected) ++rejected_;

  Entry entry;
  entry.digest = digest;
  entry.iteration = iteration;
  if (options_.store_full_vectors) entry.full.assign(delta.begin(), delta.end());
  table_[fp].push_back(std::move(entry));
  ++count_;
  return {false, 0};
}

bool VisitedSet::contains(const Fingerprint& fp, std::span<const double> delta) const {
  if (fp.mode() != options_.mode) throw std::invalid_argument("VisitedSet: fingerprint mode mismatch");
  std::optional<ExactDigest> digest;
  if (options_.mode == FingerprintMode::Projected && options_.confirm_on_match) {
    digest = exact_digest(delta);
  }
  bool rejected = false;
  return find(fp, delta, digest, rejected) != nullptr;
}

}  // namespace pgdcd
