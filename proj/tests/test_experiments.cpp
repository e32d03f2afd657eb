#include <atomic>
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "wdro/error.hpp"
#include "wdro/experiments.hpp"

using namespace wdro;

namespace {

double truncnorm_mean(double mu, double s, double a, double b) {
  const auto pdf = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI); };
  const auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  const double al = (a - mu) / s, be = (b - mu) / s;
  return mu + s * (pdf(al) - pdf(be)) / (cdf(be) - cdf(al));
}

ExperimentSetup identity_setup() {
  ExperimentSetup s;
  s.space = SampleSpace({{0, 1}}, {}, 21);
  s.cost.power_q = 1.0;
  s.family = LossFamily::linear({{1, 1}}, 1);
  s.truth.kind = TruthKind::uniform_box;
  s.n_list = {20};
  s.rho_list = {0.0, 0.05, 0.6};
  s.trials = 24;
  s.master_seed = 42;
  return s;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("splitmix64 reference values") {
  std::uint64_t st = 0;
  CHECK(splitmix64(st) == 0xE220A8397B1DCDAFULL);
  CHECK(splitmix64(st) == 0x6E789E6AA1B965F4ULL);
}

TEST_CASE("trial streams are deterministic and distinct") {
  TrialRng a({7, 3}), b({7, 3}), c({7, 4});
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(TrialSeed{7, 3}.derived() != TrialSeed{7, 4}.derived());
  CHECK(TrialSeed{7, 3}.derived() != TrialSeed{8, 3}.derived());
  (void)c;
}

TEST_CASE("truncated gaussian: sampler, quadrature and analytic mean agree") {
  const SampleSpace s({{0, 1}}, {}, 101);
  GroundTruth g;
  g.kind = TruthKind::truncated_gaussian;
  g.mean = {0.3};
  g.sigma = {0.25};
  const double exact = truncnorm_mean(0.3, 0.25, 0.0, 1.0);
  const MemberFunction f([](const SamplePoint& z) { return z.continuous[0]; }, true);
  CHECK(true_mean(g, f, s) == doctest::Approx(exact).epsilon(1e-3));
  double acc = 0.0;
  const int chunks = 4, per = 250000;
  for (int c = 0; c < chunks; ++c) {
    const auto q = sample(g, s, per, {1, static_cast<std::uint64_t>(c)});
    for (const auto& a : q.atoms) {
      CHECK_FALSE((a.continuous[0] < 0.0 || a.continuous[0] > 1.0));
      acc += a.continuous[0];
    }
  }
  CHECK(acc / (chunks * per) == doctest::Approx(exact).epsilon(2e-3));
}

TEST_CASE("label mixture class frequencies") {
  const SampleSpace s({{-1, 1}}, {2}, 21);
  GroundTruth g;
  g.kind = TruthKind::label_mixture;
  g.class_means = {{-0.5}, {0.5}};
  g.class_probs = {0.3, 0.7};
  g.sigma = {0.3};
  const auto q = sample(g, s, 200000, {5, 0});
  double ones = 0.0, x1 = 0.0;
  for (const auto& a : q.atoms) {
    ones += a.labels[0];
    if (a.labels[0] == 1) x1 += a.continuous[0];
  }
  CHECK(ones / 200000 == doctest::Approx(0.7).epsilon(1e-2));
  CHECK(x1 / ones == doctest::Approx(truncnorm_mean(0.5, 0.3, -1, 1)).epsilon(1e-2));
  const auto ref = reference_distribution(g, s);
  double p1 = 0.0, total = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    total += ref.weights[i];
    if (ref.atoms[i].labels[0] == 1) p1 += ref.weights[i];
  }
  CHECK(total == doctest::Approx(1.0));
  CHECK(p1 == doctest::Approx(0.7));
}

TEST_CASE("ground truth validation") {
  const SampleSpace s({{0, 1}}, {}, 11);
  GroundTruth g;
  g.kind = TruthKind::truncated_gaussian;
  g.mean = {0.5, 0.5};
  g.sigma = {0.1};
  CHECK_THROWS_AS(g.validate(s), DomainError);
  g.kind = TruthKind::label_mixture;
  CHECK_THROWS_AS(g.validate(s), DomainError);
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<std::atomic<int>> hits(97);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw std::runtime_error("x"); }),
                  std::runtime_error);
}

TEST_CASE("coverage is paired across rho, monotone and worker independent") {
  auto s = identity_setup();
  const auto a = run_coverage(s);
  s.workers = 4;
  const auto b = run_coverage(s);
  REQUIRE(a.size() == 3u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].coverage == b[k].coverage);
    for (std::size_t t = 0; t < a[k].per_trial.size(); ++t) {
      CHECK(a[k].per_trial[t].seed == b[k].per_trial[t].seed);
      CHECK(a[k].per_trial[t].min_slack == b[k].per_trial[t].min_slack);
    }
  }
  CHECK(a[0].coverage <= a[1].coverage);
  CHECK(a[1].coverage <= a[2].coverage);
  // R = min(1, mean + rho) for q = 1, so rho >= 1/2 always covers E z = 1/2
  CHECK(a[2].coverage == 1.0);
  const auto one = run_coverage_trial(identity_setup(), 20, 0.05, 5);
  CHECK(one.min_slack == a[1].per_trial[5].min_slack);
}

TEST_CASE("coverage threshold separates covered and uncovered radii") {
  const auto s = identity_setup();
  const MemberFunction f([](const SamplePoint& z) { return z.continuous[0]; }, true);
  for (int t = 0; t < 6; ++t) {
    const auto q = sample(s.truth, s.space, 20, {3, static_cast<std::uint64_t>(t)});
    double mean = 0.0;
    for (const auto& a : q.atoms) mean += a.continuous[0] / 20.0;
    const double th = coverage_threshold(q, s.family, {0.5}, s.cost, s.space);
    CHECK(th == doctest::Approx(std::max(0.0, 0.5 - mean)).epsilon(1e-6));
  }
  // unreachable target
  const auto q = sample(s.truth, s.space, 20, {3, 0});
  CHECK(std::isinf(coverage_threshold(q, s.family, {2.0}, s.cost, s.space)));
}

TEST_CASE("excess gap is the sample-over-population deviation") {
  // f = z, c = |.|: psi(mu) = mu xi for mu <= 1 and mu - 1 + xi above, so with
  // lambda_low = 1/2 the gap is max(0, mean - 1/2) and the bound cannot fail.
  auto s = identity_setup();
  s.rho_list = {0.0, 0.05};
  const auto rows = run_excess(s, 0.5, 4);
  REQUIRE(rows.size() == 48u);
  int positive = 0;
  for (const auto& r : rows) {
    const auto q = sample(s.truth, s.space, r.n, {s.master_seed, static_cast<std::uint64_t>(r.trial_index)});
    double mean = 0.0;
    for (const auto& a : q.atoms) mean += a.continuous[0] / static_cast<double>(q.atoms.size());
    CHECK(r.gap == doctest::Approx(std::max(0.0, mean - 0.5)).epsilon(1e-9));
    CHECK(r.violations == 0);
    if (r.gap > 0.0) ++positive;
  }
  CHECK(positive > 0);
}

TEST_CASE("sweep is the order statistic of per-trial thresholds") {
  auto s = identity_setup();
  s.target_coverage = 0.75;
  s.n_list = {20, 80};
  const auto rows = sweep_radius_scaling(s);
  REQUIRE(rows.size() == 2u);
  for (const auto& r : rows) {
    std::vector<double> th;
    for (int t = 0; t < s.trials; ++t) {
      const auto q = sample(s.truth, s.space, r.n, {s.master_seed, static_cast<std::uint64_t>(t)});
      th.push_back(coverage_threshold(q, s.family, {0.5}, s.cost, s.space));
    }
    std::sort(th.begin(), th.end());
    CHECK(r.rho_star == doctest::Approx(th[17]).epsilon(1e-12));
    CHECK_FALSE(r.flagged);
  }
}

TEST_CASE("regularized coverage runs and rejects small radii") {
  ExperimentSetup s = identity_setup();
  s.kernel = ReferenceKernel{};
  s.kernel->quadrature_nodes = 21;
  s.reg = RegParams{0.0, 0.1};
  const auto m = kernel_moments(*s.kernel, s.cost, s.space);
  s.rho_list = {2 * m.m_c};
  s.trials = 10;
  const auto r = run_coverage_reg(s);
  REQUIRE(r.size() == 1u);
  CHECK(r[0].trials == 10);
  s.rho_list = {0.5 * m.m_c};
  CHECK_THROWS(run_coverage_reg(s));
}

TEST_CASE("uniform gap is deterministic across worker counts") {
  auto s = identity_setup();
  s.trials = 6;
  const auto a = measure_uniform_gap(s, 0.5, 10.0, 8);
  s.workers = 3;
  const auto b = measure_uniform_gap(s, 0.5, 10.0, 8);
  REQUIRE(a.size() == 6u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].gap == b[i].gap);
    CHECK(a[i].gap_sqrt_n == doctest::Approx(a[i].gap * std::sqrt(20.0)));
  }
}

}  // TEST_SUITE
