#include <doctest.h>

#include "dechist/chain.hpp"
#include "oracles.hpp"

using namespace dechist::chain;

namespace {

ChainSpec coupled_spec(int m, double omega0, double kappa) {
  ChainSpec spec;
  spec.num_modes = m;
  spec.omega0 = omega0;
  spec.coupling = kappa;
  return spec;
}

}  // namespace

TEST_CASE("stiffness matrix: row sums and boundary structure") {
  ChainSpec periodic = coupled_spec(4, 0.9, 1.3);
  Eigen::MatrixXd k = periodic.stiffness();
  double diag_term = periodic.mass * 0.9 * 0.9;
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(k.row(i).sum() - diag_term) < 1e-12);  // Laplacian rows sum 0

  ChainSpec open = periodic;
  open.boundary = Boundary::open;
  Eigen::MatrixXd ko = open.stiffness();
  CHECK(std::abs(ko(0, 0) - (diag_term + 1.3)) < 1e-12);      // one neighbor
  CHECK(std::abs(ko(1, 1) - (diag_term + 2 * 1.3)) < 1e-12);  // two neighbors
  CHECK(std::abs(ko(0, 3)) < 1e-12);                          // no wrap
}

TEST_CASE("ground state: uncertainty-valid and stationary under its own spec") {
  ChainSpec spec = coupled_spec(5, 0.8, 1.1);
  GaussianState gs = ground_state(spec);
  gs.validate(spec.hbar);

  GaussianState later = evolve_gaussian(gs, spec, 2.31);
  CHECK((later.mean - gs.mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((later.cov - gs.cov).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("ground state rejects a free (zero-frequency) chain") {
  ChainSpec spec = coupled_spec(3, 0.0, 0.0);
  CHECK_THROWS_AS(ground_state(spec), std::invalid_argument);
}

TEST_CASE("gaussian evolution matches step-halved RK4 on the moment ODEs") {
  ChainSpec spec = coupled_spec(3, 0.7, 0.9);
  spec.equilibrium = {0.0, 1.5, 3.0};  // absolute coordinates exercised

  GaussianState state = ground_state(spec);
  state.mean[0] += 0.3;  // displace to make the mean dynamics nontrivial
  state.mean[4] = 0.2;   // a momentum kick

  double t = 0.9;
  GaussianState evolved = evolve_gaussian(state, spec, t);
  Eigen::VectorXd eq(3);
  eq << 0.0, 1.5, 3.0;
  auto oracle = oracles::chain_rk4_oracle(state.mean, state.cov, spec.stiffness(),
                                          spec.mass, eq, t);
  CHECK((evolved.mean - oracle.mean).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((evolved.cov - oracle.cov).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("free single particle: ballistic spreading via the zero-mode limit") {
  ChainSpec spec = coupled_spec(1, 0.0, 0.0);
  GaussianState state;
  state.mean = Eigen::VectorXd::Zero(2);
  state.mean[1] = 0.7;
  state.cov = Eigen::MatrixXd::Zero(2, 2);
  state.cov(0, 0) = 0.5;
  state.cov(1, 1) = 0.5;  // hbar/2 uncertainty product

  double t = 1.7, m = spec.mass;
  GaussianState out = evolve_gaussian(state, spec, t);
  CHECK(std::abs(out.mean[0] - 0.7 * t / m) < 1e-12);
  CHECK(std::abs(out.mean[1] - 0.7) < 1e-12);
  double expect_qq = 0.5 + 0.5 * t * t / (m * m);
  CHECK(std::abs(out.cov(0, 0) - expect_qq) < 1e-12);
  CHECK(std::abs(out.cov(1, 1) - 0.5) < 1e-12);
}

TEST_CASE("n(k) moments: single-mode closed form and exact k=0 values") {
  ChainSpec spec = coupled_spec(1, 1.2, 0.0);
  GaussianState gs = ground_state(spec);
  double s = gs.cov(0, 0);

  double k = 0.8;
  auto mom = n_k_moments(gs, k);
  CHECK(std::abs(mom.mean - std::exp(-0.5 * k * k * s)) < 1e-14);
  CHECK(std::abs(mom.variance - (1.0 - std::exp(-k * k * s))) < 1e-14);

  auto zero = n_k_moments(gs, 0.0);
  CHECK(zero.variance == 0.0);  // expm1 makes this exact, not approximate
  CHECK(zero.mean == std::complex<double>(1.0, 0.0));
  CHECK(zero.imag_residual == 0.0);
}

TEST_CASE("small-k ratio approaches one quadratically") {
  ChainSpec spec = coupled_spec(4, 0.9, 1.4);
  GaussianState gs = ground_state(spec);
  double sigma = std::sqrt(gs.cov.topLeftCorner(4, 4).diagonal().maxCoeff());

  double r1 = small_k_ratio(gs, 1e-4 / sigma);
  CHECK(std::abs(r1 - 1.0) < 1e-6);
  double d1 = std::abs(small_k_ratio(gs, 1e-2 / sigma) - 1.0);
  double d2 = std::abs(small_k_ratio(gs, 2e-2 / sigma) - 1.0);
  CHECK(d2 / d1 == doctest::Approx(4.0).epsilon(0.01));  // quadratic in k

  CHECK_THROWS_AS(small_k_ratio(gs, 0.0), std::invalid_argument);
}

TEST_CASE("correlation length: uncoupled chain is degenerate, coupled is finite") {
  GaussianState uncoupled = ground_state(coupled_spec(5, 1.0, 0.0));
  auto fit0 = correlation_length(uncoupled);
  CHECK(fit0.degenerate);

  // open chain: separation |j - l| is meaningful all the way across
  ChainSpec spec = coupled_spec(8, 0.6, 2.0);
  spec.boundary = Boundary::open;
  GaussianState coupled = ground_state(spec);
  auto fit = correlation_length(coupled);
  CHECK_FALSE(fit.degenerate);
  CHECK_FALSE(fit.no_decay);
  CHECK(fit.length > 0.0);
  CHECK(fit.length < 8.0);
}

TEST_CASE("gaussian state csv round-trip") {
  GaussianState gs = ground_state(coupled_spec(3, 1.1, 0.4));
  gs.mean[1] = -0.25;
  GaussianState back = GaussianState::from_csv(gs.to_csv());
  CHECK((back.mean - gs.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.cov - gs.cov).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("covariance validation rejects uncertainty-violating states") {
  GaussianState bad;
  bad.mean = Eigen::VectorXd::Zero(2);
  bad.cov = Eigen::MatrixXd::Identity(2, 2) * 0.1;  // sigma_q sigma_p < hbar/2
  CHECK_THROWS_AS(bad.validate(1.0), std::invalid_argument);
}
