// SPDX-License-Identifier: Apache-2.0
//
// Covered tests:
//   - initial precoder
//   - single-antenna ground truth
//   - caps, monotone objective and trace bookkeeping on the reference setup
//   - failure path keeps the partial trace

#include "dualwsr/optimizer.hpp"
#include "test_support.hpp"

#include "catch_amalgamated.hpp"

#include <cmath>

using namespace dualwsr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("initial precoder runs every antenna at its cap", "[optimizer]") {
  testing::Rng rng(51);
  const SystemDims d = testing::reference_dims();
  const ChannelSet ch = testing::random_channel(rng, d);
  const arma::vec caps{1.0, 2.0, 2.5, 0.5};
  const arma::cx_mat B = init_precoder(ch, caps);
  CHECK(B.n_rows == 4);
  CHECK(B.n_cols == 4);
  CHECK(testing::max_rel_err(testing::ref_row_powers(B), caps) <= 1e-14);
  CHECK_THROWS_AS(init_precoder(ch, arma::vec{1.0, 1.0, 1.0}), ModelError);
  CHECK_THROWS_AS(init_precoder(ch, arma::vec{1.0, 1.0, 0.0, 1.0}), ModelError);
}

TEST_CASE("single-antenna link reaches log2(1 + P / sigma2)", "[optimizer]") {
  const SystemDims d = SystemDims::uniform(1, 1, 1, 1);
  const ChannelSet ch(d, arma::cx_mat(1, 1, arma::fill::ones));
  struct Case { double p, sigma2, omega; };
  for (const Case c : {Case{1.0, 1.0, 0.5}, Case{4.0, 0.5, 0.3}, Case{0.2, 2.0, 0.8}}) {
    const AlgorithmResult r = run_algorithm_ii(ch, NoiseModel::isotropic(d, c.sigma2),
                                               arma::vec{c.p}, RateWeights(arma::vec{c.omega}));
    CHECK(r.converged);
    CHECK_THAT(r.trace.back().weighted_sum_rate,
               WithinAbs(c.omega * std::log2(1.0 + c.p / c.sigma2), 1e-6));
    CHECK_THAT(r.trace.back().total_power, WithinRel(c.p, 1e-8));
  }
}

TEST_CASE("reference setup: caps, monotone objective, trace", "[optimizer]") {
  testing::Rng rng(52);
  const SystemDims d = testing::reference_dims();
  const arma::vec caps(4, arma::fill::value(2.5));
  const RateWeights w(arma::vec{0.4, 0.2, 0.6, 0.25});
  for (double sigma2 : {5.0, 0.5}) {
    const ChannelSet ch = testing::random_channel(rng, d);
    const NoiseModel nz = NoiseModel::isotropic(d, sigma2);
    const AlgorithmResult r = run_algorithm_ii(ch, nz, caps, w);
    REQUIRE(r.trace.size() >= 2);
    CHECK(r.trace.front().iteration == 0);
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
      const IterationRecord& rec = r.trace[i];
      CHECK(rec.iteration == static_cast<int>(i));
      CHECK((rec.antenna_powers - caps).max() <= 1e-8);
      CHECK_THAT(rec.total_power, WithinRel(arma::accu(rec.antenna_powers), 1e-14));
      if (i > 0) {
        CHECK(rec.objective <= r.trace[i - 1].objective + 1e-9 * std::abs(r.trace[i - 1].objective));
        CHECK(rec.gp_status == GpStatus::kConverged);
        CHECK(rec.fixed_point_iterations >= 0);
      }
    }
    CHECK(static_cast<int>(r.trace.size()) <= SolveOptions{}.max_outer_iters + 1);
    CHECK_NOTHROW(r.aux.validate());
    CHECK(is_block_diagonal(d, r.tx.W));

    const SolutionReport rep = evaluate_solution(ch, nz, r.tx.B, w, caps);
    CHECK_THAT(rep.weighted_sum_rate, WithinRel(r.trace.back().weighted_sum_rate, 1e-12));
    CHECK(rep.max_violation <= 1e-8);
    const arma::cx_mat W_ref = testing::ref_mmse_receiver(d, ch.stacked(), nz.blocks(), r.tx.B);
    CHECK(arma::abs(r.tx.W - W_ref).max() <= 1e-8 * std::max(1.0, arma::abs(W_ref).max()));
    // The algorithm should not end below the power-capped starting point.
    CHECK(r.trace.back().weighted_sum_rate >= r.trace.front().weighted_sum_rate - 1e-9);
  }
}

TEST_CASE("iteration cap leaves the run unconverged", "[optimizer]") {
  testing::Rng rng(53);
  const SystemDims d = testing::reference_dims();
  const ChannelSet ch = testing::random_channel(rng, d);
  SolveOptions opts;
  opts.max_outer_iters = 2;
  opts.outer_tol = 0.0;
  const AlgorithmResult r = run_algorithm_ii(ch, NoiseModel::isotropic(d, 0.05),
                                             arma::vec(4, arma::fill::value(2.5)),
                                             RateWeights(arma::vec{0.4, 0.2, 0.6, 0.25}), opts);
  CHECK(r.trace.size() <= 3);
}

TEST_CASE("failure keeps the partial trace", "[optimizer]") {
  testing::Rng rng(54);
  const SystemDims d = testing::reference_dims();
  const ChannelSet ch = testing::random_channel(rng, d);
  SolveOptions opts;
  opts.fixed_point.max_iters = 0;
  try {
    run_algorithm_ii(ch, NoiseModel::isotropic(d, 1.0), arma::vec(4, arma::fill::value(2.5)),
                     RateWeights(arma::vec{0.4, 0.2, 0.6, 0.25}), opts);
    FAIL("expected AlgorithmError");
  } catch (const AlgorithmError& e) {
    REQUIRE(e.trace().size() == 1);
    CHECK(e.trace().front().iteration == 0);
    CHECK(std::string(e.what()).find("duality transfer") != std::string::npos);
  }
}

TEST_CASE("weight count must match streams", "[optimizer]") {
  testing::Rng rng(55);
  const SystemDims d = testing::reference_dims();
  const ChannelSet ch = testing::random_channel(rng, d);
  CHECK_THROWS_AS(run_algorithm_ii(ch, NoiseModel::isotropic(d, 1.0),
                                   arma::vec(4, arma::fill::value(2.5)),
                                   RateWeights(arma::vec{0.4, 0.2})),
                  ModelError);
}
