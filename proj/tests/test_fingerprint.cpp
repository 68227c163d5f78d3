#include <bit>
#include <cstdio>
#include <set>
#include <string>

#include "doctest.h"
#include "pgdcd/fingerprint.hpp"
#include "pgdcd/rng.hpp"

using namespace pgdcd;

namespace {

std::string hex(const ExactDigest& d) {
  std::string s;
  char buf[3];
  for (unsigned char c : d.bytes) {
    std::snprintf(buf, sizeof(buf), "%02x", c);
    s += buf;
  }
  return s;
}

Vec random_vec(Rng& rng, std::size_t d) {
  Vec v(d);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("exact digests") {
  // Reference values from Python's hashlib.blake2b(digest_size=32) over the
  // little-endian float64 bytes.
  CHECK(hex(exact_digest(Vec(4, 0.0))) ==
        "89eb0d6a8a691dae2cd15ed0369931ce0a949ecafa5c3f93f8121833646e15c3");
  CHECK(hex(exact_digest(Vec{1.0, -2.5, 0.0, 3.0})) ==
        "f1069da938751e5d94da09d18691dacb578a1af714fa05b51337ecdf9a75508c");

  const Vec v{0.1, 0.2, -0.3};
  const Vec copy = v;
  CHECK(fingerprint_exact(v) == fingerprint_exact(copy));
  CHECK(fingerprint_exact(v).mode() == FingerprintMode::Exact);
}

TEST_CASE("exact digests separate single-bit flips") {
  Rng rng(99);
  for (int t = 0; t < 2000; ++t) {
    Vec v = random_vec(rng, 1 + rng.below(64));
    const auto before = exact_digest(v);
    const std::size_t k = rng.below(v.size());
    const auto bit = std::uint64_t{1} << rng.below(64);
    v[k] = std::bit_cast<double>(std::bit_cast<std::uint64_t>(v[k]) ^ bit);
    CHECK(exact_digest(v) != before);
  }
}

TEST_CASE("projected fingerprints decompose h.delta") {
  ProjectionKey unit{Vec{1.0}, 0};
  CHECK(fingerprint_projected(Vec{0.0}, unit).pair() == ProjectedPair{0.0, 0});
  CHECK(fingerprint_projected(Vec{0.75}, unit).pair() == ProjectedPair{0.75, 0});
  CHECK(fingerprint_projected(Vec{1.5}, unit).pair() == ProjectedPair{0.75, 1});
  CHECK(fingerprint_projected(Vec{-3.0}, unit).pair() == ProjectedPair{-0.75, 2});

  const auto key = ProjectionKey::generate(10, 5);
  CHECK(fingerprint_projected(Vec(10, 0.0), key).pair() == ProjectedPair{0.0, 0});
  CHECK_THROWS_AS(fingerprint_projected(Vec(9, 0.0), key), std::invalid_argument);
}

TEST_CASE("projection keys regenerate bit-exactly") {
  const auto a = ProjectionKey::generate(256, 17);
  const auto b = ProjectionKey::generate(256, 17);
  const auto c = ProjectionKey::generate(256, 18);
  CHECK(bit_equal(a.h, b.h));
  CHECK_FALSE(bit_equal(a.h, c.h));

  // Spread matches the 1/sqrt(d) standard deviation.
  const auto big = ProjectionKey::generate(40000, 1);
  double sq = 0.0;
  for (double v : big.h) sq += v * v;
  CHECK(std::sqrt(sq / big.h.size()) == doctest::Approx(1.0 / 200.0).epsilon(0.02));
}

TEST_CASE("projected fingerprints of random vectors do not collide") {
  const auto key = ProjectionKey::generate(100, 2024);
  Rng rng(4);
  std::size_t collisions = 0;
  for (int t = 0; t < 100000; ++t) {
    const Vec a = random_vec(rng, 100);
    const Vec b = random_vec(rng, 100);
    collisions += fingerprint_projected(a, key) == fingerprint_projected(b, key);
  }
  CHECK(collisions == 0);
}

TEST_CASE("visited set basics") {
  for (auto mode : {FingerprintMode::Exact, FingerprintMode::Projected}) {
    VisitedSet set({mode, true, false});
    const auto key = ProjectionKey::generate(3, 1);
    const Vec v{0.5, -0.25, 0.125};
    const auto fp = mode == FingerprintMode::Exact ? fingerprint_exact(v) : fingerprint_projected(v, key);
    CHECK_FALSE(set.insert(fp, v, 4).seen_before);
    const auto again = set.insert(fp, v, 9);
    CHECK(again.seen_before);
    CHECK(again.first_visit == 4);
    CHECK(set.size() == 1);
    CHECK(set.contains(fp, v));
  }
  VisitedSet exact({FingerprintMode::Exact, true, false});
  const auto key = ProjectionKey::generate(1, 1);
  CHECK_THROWS_AS(exact.insert(fingerprint_projected(Vec{1.0}, key), Vec{1.0}, 1), std::invalid_argument);
}

TEST_CASE("exact visited set: distinct vectors are never reported as seen") {
  Rng rng(12);
  VisitedSet set({FingerprintMode::Exact, true, true});
  std::set<std::vector<double>> reference;
  for (int i = 0; i < 1000; ++i) {
    const Vec v = random_vec(rng, 16);
    const bool truly_seen = !reference.insert(v).second;
    const auto r = set.insert(fingerprint_exact(v), v, i + 1);
    CHECK(r.seen_before == truly_seen);
  }
  CHECK(set.size() == 1000);
  CHECK(set.rejected_matches() == 0);
}

TEST_CASE("confirm-on-match rejects a projected collision") {
  // Dyadic values keep every product and sum exact, so h.w == 0 exactly and
  // both vectors project to the same value.
  const ProjectionKey key{Vec{1.0, -1.0, 0.5, 0.25}, 0};
  const Vec d1{0.25, 0.5, -0.125, 0.75};
  const Vec w{0.125, 0.125, 0.0, 0.0};
  Vec d2 = d1;
  for (std::size_t i = 0; i < d2.size(); ++i) d2[i] += w[i];
  REQUIRE(dot(key.h, w) == 0.0);
  const auto f1 = fingerprint_projected(d1, key);
  const auto f2 = fingerprint_projected(d2, key);
  REQUIRE(f1 == f2);

  VisitedSet confirmed({FingerprintMode::Projected, true, false});
  CHECK_FALSE(confirmed.insert(f1, d1, 1).seen_before);
  CHECK_FALSE(confirmed.insert(f2, d2, 2).seen_before);
  CHECK(confirmed.rejected_matches() == 1);
  CHECK(confirmed.size() == 2);
  // Both remain individually detectable.
  CHECK(confirmed.insert(f1, d1, 3).first_visit == 1);
  CHECK(confirmed.insert(f2, d2, 4).first_visit == 2);

  VisitedSet unconfirmed({FingerprintMode::Projected, false, false});
  CHECK_FALSE(unconfirmed.insert(f1, d1, 1).seen_before);
  CHECK(unconfirmed.insert(f2, d2, 2).seen_before);

  VisitedSet full({FingerprintMode::Projected, false, true});
  CHECK_FALSE(full.insert(f1, d1, 1).seen_before);
  CHECK_FALSE(full.insert(f2, d2, 2).seen_before);
}
