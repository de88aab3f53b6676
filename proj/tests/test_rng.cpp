#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gr1/rng.hpp"
#include "gr1/sha256.hpp"

using namespace gr1;

TEST_CASE("same seed yields identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng c(42), d(43);
  bool differ = false;
  for (int i = 0; i < 10; ++i)
    if (c.next_u64() != d.next_u64()) differ = true;
  CHECK(differ);
}

TEST_CASE("uniform stays in range, uniform_int covers the support") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 20000; ++i) ++counts[size_t(rng.uniform_int(5))];
  for (int c : counts) CHECK(c > 3000);
}

TEST_CASE("normal moments are sane") {
  Rng rng(11);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double v = rng.normal(1.0, 2.0);
    sum += v;
    sq += v * v;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::abs(mean - 1.0) < 0.03);
  CHECK(std::abs(var - 4.0) < 0.1);
}

TEST_CASE("sha256 matches a known vector") {
  CHECK(sha256_hex(std::string("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex(std::string("")) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
