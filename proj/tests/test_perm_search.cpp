#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "permgec/perm_search.hpp"

using namespace permgec;

namespace {

PointerMatrix random_matrix(int n, int s, std::uint64_t seed, double scale = 2.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> a(static_cast<std::size_t>((n + s) * (n + s)));
  for (double& x : a) x = normal(rng);
  return PointerMatrix(n, s, a);
}

std::vector<double> as_vector(const PointerMatrix& a) { return {a.data().begin(), a.data().end()}; }

std::vector<int> indices(const Permutation& p) { return {p.indices().begin(), p.indices().end()}; }

}  // namespace

TEST_CASE("step distribution masks by hand-enumerated rules") {
  // n = 4, s = 1: positions 0 <s>, 1, 2, 3 </s>, 4 <ins_1>.
  const PointerMatrix zero(4, 1);
  const std::vector<int> start{0};
  const auto p = step_distribution(zero, start, 0.0);
  CHECK(p[0] == 0.0);
  for (int j : {1, 2, 3, 4}) CHECK(p[static_cast<std::size_t>(j)] == doctest::Approx(0.25).epsilon(1e-15));

  const std::vector<int> after_ins{0, 4};
  const auto q = step_distribution(zero, after_ins, 0.0);
  CHECK(q[4] == 0.0);
  for (int j : {1, 2, 3}) CHECK(q[static_cast<std::size_t>(j)] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // Short example: right after <ins_1> only core positions remain.
  const PointerMatrix z5(5, 1);
  const std::vector<int> short_prefix{0, 1, 5};
  const auto r = step_distribution(z5, short_prefix, 0.0);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[5] == 0.0);
  CHECK(r[2] + r[3] + r[4] == doctest::Approx(1.0));

  // The second insertion slot is closed until the first is used.
  const PointerMatrix z(4, 2);
  const auto t = step_distribution(z, start, 0.0);
  CHECK(t[4] > 0.0);
  CHECK(t[5] == 0.0);

  // Full confidence bias is a one-hot on the next core position.
  const PointerMatrix a = random_matrix(6, 2, 3);
  const auto c1 = step_distribution(a, start, 1.0);
  CHECK(c1[1] == 1.0);
  const std::vector<int> skip{0, 2};
  CHECK(step_distribution(a, skip, 1.0)[3] == 1.0);
}

TEST_CASE("every position masked is a dead end") {
  const PointerMatrix z(2, 0);
  const std::vector<int> done{0, 1};
  CHECK_THROWS_AS(step_distribution(z, done, 0.0), Error);
}

TEST_CASE("score_permutation matches a direct product of softmax steps") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PointerMatrix a = random_matrix(4, 1, seed);
    for (const auto& pi : oracle::all_permutations(4, 1)) {
      const double got = score_permutation(a, Permutation(pi, 4, 1), 0.0);
      CHECK(got == doctest::Approx(oracle::direct_score(as_vector(a), 4, 1, pi)).epsilon(1e-12));
    }
  }
  const PointerMatrix a = random_matrix(5, 1, 9);
  CHECK(score_permutation(a, Permutation::identity(5, 1), 1.0) == 0.0);
}

TEST_CASE("probability mass over complete permutations is at most one") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PointerMatrix a = random_matrix(5, 1, seed);
    double mass = 0.0;
    for (const auto& pi : oracle::all_permutations(5, 1)) {
      mass += std::exp(score_permutation(a, Permutation(pi, 5, 1), 0.0));
    }
    CHECK(mass <= 1.0 + 1e-12);
    CHECK(mass > 0.0);
  }
  // Without insertion slots no prefix dead-ends, so the mass is exactly one.
  const PointerMatrix a = random_matrix(5, 0, 4);
  double mass = 0.0;
  for (const auto& pi : oracle::all_permutations(5, 0)) {
    mass += std::exp(score_permutation(a, Permutation(pi, 5, 0), 0.0));
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("beam search finds the short example permutation on a handcrafted matrix") {
  PointerMatrix a(5, 1);
  a(0, 1) = 10;
  a(1, 5) = 10;
  a(5, 3) = 10;
  a(3, 4) = 10;
  const auto out = beam_search(a, BeamConfig{4, 0.0, true});
  REQUIRE_FALSE(out.empty());
  CHECK(indices(out.front().pi) == std::vector<int>{0, 1, 5, 3, 4});
  const auto biased = beam_search(a, BeamConfig{4, 1.0, true});
  CHECK(biased.front().pi.is_identity());
}

TEST_CASE("beam output is always structurally valid") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 9);
    const int s = static_cast<int>(rng() % 4);
    const PointerMatrix a = random_matrix(n, s, rng());
    const BeamConfig cfg{1 + static_cast<int>(rng() % 5), (rng() % 4) * 0.1, rng() % 2 == 0};
    for (const auto& h : beam_search(a, cfg)) {
      CHECK_FALSE(Permutation::check(h.pi.indices(), n, s).has_value());
      CHECK(h.logp <= 0.0);
    }
  }
}

TEST_CASE("wider beams never lose the best hypothesis") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const PointerMatrix a = random_matrix(6, 2, rng());
    double prev = -INFINITY;
    for (int w = 1; w <= 6; ++w) {
      const double top = beam_search(a, BeamConfig{w, 0.0, false}).front().logp;
      CHECK(top >= prev - 1e-12);
      prev = top;
    }
  }
}

TEST_CASE("length normalisation reorders but keeps the same finished set") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const PointerMatrix a = random_matrix(5, 1, seed);
    const int all = static_cast<int>(oracle::all_permutations(5, 1).size());
    auto raw = beam_search(a, BeamConfig{all, 0.0, false});
    auto norm = beam_search(a, BeamConfig{all, 0.0, true});
    auto key = [](const std::vector<ScoredPermutation>& v) {
      std::vector<std::vector<int>> out;
      for (const auto& h : v) out.push_back(indices(h.pi));
      std::sort(out.begin(), out.end());
      return out;
    };
    CHECK(key(raw) == key(norm));
    for (const auto& h : norm) {
      CHECK(h.score == doctest::Approx(h.logp / static_cast<double>(h.pi.size())));
    }
  }
}

TEST_CASE("sinkhorn steps") {
  const PointerMatrix a = random_matrix(4, 0, 2);
  CHECK(as_vector(sinkhorn(a, 0)) == as_vector(a));
  const PointerMatrix z(2, 0);
  const PointerMatrix half = sinkhorn(z, 1);
  for (double v : half.data()) CHECK(v == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  const PointerMatrix b = sinkhorn(a, 50);
  for (int i = 0; i < 4; ++i) {
    double row = 0.0, col = 0.0;
    for (int j = 0; j < 4; ++j) {
      row += std::exp(b(i, j));
      col += std::exp(b(j, i));
    }
    CHECK(std::abs(row - 1.0) < 1e-6);
    CHECK(std::abs(col - 1.0) < 1e-6);
  }
}
