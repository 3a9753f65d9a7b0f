#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

// Closed-form Gaussian-state engine for the 1-D harmonic chain: symplectic
// moment evolution and exact characteristic-function moments of the Fourier
// number density n(k) = sum_j e^{i k q_j}.

namespace dechist::chain {

enum class Boundary { periodic, open };

struct ChainSpec {
  int num_modes = 1;
  double mass = 1.0;
  double omega0 = 1.0;    // on-site frequency, >= 0
  double coupling = 0.0;  // nearest-neighbor spring constant, >= 0
  std::vector<double> equilibrium;  // x_bar_j; empty = all zero
  Boundary boundary = Boundary::periodic;
  double hbar = 1.0;

  Eigen::MatrixXd stiffness() const;  // m w0^2 I + kappa * chain Laplacian
  double equilibrium_at(int j) const;
  void validate() const;  // throws on indefinite dynamical matrix
};

struct GaussianState {
  // mean over (q_1..q_M, p_1..p_M) in absolute coordinates (equilibrium
  // offsets included); cov is the symmetrized covariance 1/2<{dz_a,dz_b}>.
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int num_modes() const;
  void validate(double hbar = 1.0) const;  // symmetry 1e-12; uncertainty 1e-9
  double position_cov(int j, int l) const { return cov(j, l); }

  std::string to_csv() const;  // mean row, then 2M covariance rows
  static GaussianState from_csv(const std::string& text);
};

// Oscillator ground state (requires every normal-mode frequency > 0).
GaussianState ground_state(const ChainSpec& spec);

// mean -> S(t) mean (displacement part), cov -> S cov S^T, with S the
// symplectic propagator from the normal-mode decomposition.
GaussianState evolve_gaussian(const GaussianState& state, const ChainSpec& spec,
                              double t);

// <e^{i k q_j}> = exp(i k <q_j> - k^2 cov(q_j,q_j)/2).
std::complex<double> char_one_mode(const GaussianState& state, int j, double k);

struct NkMoments {
  std::complex<double> mean;
  double variance = 0.0;
  double imag_residual = 0.0;  // |imag| of the raw double sum (should be ~0)
};
// mean = sum_j <e^{ikq_j}>;
// variance = sum_{j,l} <e^{ikq_j}><e^{-ikq_l}> (e^{k^2 cov(q_j,q_l)} - 1).
NkMoments n_k_moments(const GaussianState& state, double k);

// variance / (k^2 (DX)^2), (DX)^2 = sum_{j,l} cov(q_j,q_l); -> 1 as k -> 0.
double small_k_ratio(const GaussianState& state, double k);

struct CorrelationLengthFit {
  double length = 0.0;
  double residual = 0.0;   // rms of the log-linear fit
  bool no_decay = false;   // correlations do not fall off within the chain
  bool degenerate = false; // off-diagonal correlations all ~0
};
// Exponential fit of mean |cov(q_j,q_l)| vs separation |j-l| * spacing.
CorrelationLengthFit correlation_length(const GaussianState& state,
                                        double spacing = 1.0);

}  // namespace dechist::chain
