#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

// Independent reference implementations used to cross-check the engines.
// Everything here is deliberately written the slow, direct way: explicit
// operator chains with matrix exponentials, Kronecker products, step-halved
// Runge-Kutta, and O(n^2) double sums. Nothing is shared with src/.

namespace oracles {

inline Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// ---------------------------------------------------------------------------
// Decoherence functional by explicit operator-chain multiplication.
// C_alpha = P_{a_n} U(dt_n) ... P_{a_1} U(dt_1), U(dt) = exp(-i H dt / hbar)
// via the Pade-based matrix exponential (independent of the engine's
// eigendecomposition path). Strings are enumerated lexicographically with the
// first time slot as the most significant digit.

struct OracleDecoherence {
  Eigen::MatrixXcd entries;
  std::vector<std::vector<int>> labels;
};

inline OracleDecoherence chain_oracle(
    const Eigen::VectorXcd& psi, const Eigen::MatrixXcd& hamiltonian,
    const std::vector<double>& times,
    const std::vector<std::vector<Eigen::MatrixXcd>>& families,
    double hbar = 1.0) {
  const std::size_t n_times = times.size();
  if (families.size() != n_times) throw std::invalid_argument("family count");
  std::vector<Eigen::MatrixXcd> steps;
  double prev = 0.0;
  for (std::size_t i = 0; i < n_times; ++i) {
    std::complex<double> factor(0.0, -(times[i] - prev) / hbar);
    steps.push_back((factor * hamiltonian).exp());
    prev = times[i];
  }

  std::size_t total = 1;
  for (const auto& fam : families) total *= fam.size();

  OracleDecoherence out;
  out.entries.resize(Eigen::Index(total), Eigen::Index(total));
  std::vector<Eigen::VectorXcd> branches(total);
  for (std::size_t s = 0; s < total; ++s) {
    // digits of s, first time slot most significant
    std::vector<int> label(n_times);
    std::size_t rest = s;
    for (std::size_t i = n_times; i-- > 0;) {
      label[i] = int(rest % families[i].size());
      rest /= families[i].size();
    }
    Eigen::MatrixXcd chain =
        Eigen::MatrixXcd::Identity(hamiltonian.rows(), hamiltonian.cols());
    for (std::size_t i = 0; i < n_times; ++i)
      chain = families[i][std::size_t(label[i])] * steps[i] * chain;
    branches[s] = chain * psi;
    out.labels.push_back(label);
  }
  for (std::size_t a = 0; a < total; ++a)
    for (std::size_t b = 0; b < total; ++b)
      out.entries(Eigen::Index(a), Eigen::Index(b)) = branches[b].dot(branches[a]);
  return out;
}

// ---------------------------------------------------------------------------
// Step-halved classical RK4 for dy/dt = f(t, y), integrating to t with the
// step halved until two successive answers agree to `tol` (max-norm).

inline Eigen::VectorXd rk4_integrate(
    const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& f,
    Eigen::VectorXd y0, double t, double tol = 1e-12) {
  auto run = [&](int steps) {
    Eigen::VectorXd y = y0;
    double h = t / steps, s = 0.0;
    for (int i = 0; i < steps; ++i) {
      Eigen::VectorXd k1 = f(s, y);
      Eigen::VectorXd k2 = f(s + h / 2, y + h / 2 * k1);
      Eigen::VectorXd k3 = f(s + h / 2, y + h / 2 * k2);
      Eigen::VectorXd k4 = f(s + h, y + h * k3);
      y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
      s += h;
    }
    return y;
  };
  int steps = 64;
  Eigen::VectorXd prev = run(steps);
  for (int round = 0; round < 16; ++round) {
    steps *= 2;
    Eigen::VectorXd next = run(steps);
    if ((next - prev).cwiseAbs().maxCoeff() < tol) return next;
    prev = next;
  }
  return prev;
}

// Gaussian chain first/second moments under dz/dt = A z,
// A = [[0, I/m], [-K, 0]]: mean' = A (mean - equilibrium), cov' = A cov + cov A^T.
// Packs (mean, vec(cov)) into one vector for rk4_integrate.
struct ChainMomentsOracle {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline ChainMomentsOracle chain_rk4_oracle(const Eigen::VectorXd& mean0,
                                           const Eigen::MatrixXd& cov0,
                                           const Eigen::MatrixXd& stiffness,
                                           double mass,
                                           const Eigen::VectorXd& equilibrium,
                                           double t) {
  const int m = int(stiffness.rows());
  const int dim = 2 * m;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  a.topRightCorner(m, m) = Eigen::MatrixXd::Identity(m, m) / mass;
  a.bottomLeftCorner(m, m) = -stiffness;
  Eigen::VectorXd eq = Eigen::VectorXd::Zero(dim);
  eq.head(m) = equilibrium;

  auto f = [&](double, const Eigen::VectorXd& y) {
    Eigen::VectorXd mean = y.head(dim);
    Eigen::MatrixXd cov = Eigen::Map<const Eigen::MatrixXd>(y.data() + dim, dim, dim);
    Eigen::VectorXd dy(dim + dim * dim);
    dy.head(dim) = a * (mean - eq);
    Eigen::MatrixXd dcov = a * cov + cov * a.transpose();
    dy.tail(dim * dim) = Eigen::Map<const Eigen::VectorXd>(dcov.data(), dim * dim);
    return dy;
  };
  Eigen::VectorXd y0(dim + dim * dim);
  y0.head(dim) = mean0;
  y0.tail(dim * dim) = Eigen::Map<const Eigen::VectorXd>(cov0.data(), dim * dim);
  Eigen::VectorXd y = rk4_integrate(f, y0, t);
  ChainMomentsOracle out;
  out.mean = y.head(dim);
  out.cov = Eigen::Map<const Eigen::MatrixXd>(y.data() + dim, dim, dim);
  return out;
}

// Brownian moment flow (mean_q, mean_p, var_qq, cov_qp, var_pp).
inline Eigen::VectorXd brownian_rk4_oracle(const Eigen::VectorXd& y0, double mass,
                                           double gamma, double d_pp, double t) {
  auto f = [&](double, const Eigen::VectorXd& y) {
    Eigen::VectorXd dy(5);
    dy[0] = y[1] / mass;
    dy[1] = -gamma * y[1];
    dy[2] = 2.0 * y[3] / mass;
    dy[3] = y[4] / mass - gamma * y[3];
    dy[4] = -2.0 * gamma * y[4] + 2.0 * d_pp;
    return dy;
  };
  return rk4_integrate(f, y0, t);
}

// ---------------------------------------------------------------------------
// Direct O(n_V^2) evaluation of the windowed correlation functional in 1-D:
//   [sum over window cells of p_i p_j ((1 + cbar_ij)/Z - 1) dx^2] /
//   [sum over window cells of p_i dx]^2
// with cbar the cell-averaged kernel (own subsampling) and Z from the full box.

inline double direct_ratio_1d(const std::vector<double>& p, double box,
                              const std::function<double(double)>& kernel,
                              double window_lo, double window_hi,
                              int subsamples = 32) {
  const int n = int(p.size());
  const double dx = box / n;
  auto cbar = [&](int offset) {
    // average of kernel(|r|) over q1, q2 uniform in cells 0 and `offset`,
    // via the difference-offset quadrature on the periodic box
    double acc = 0.0;
    for (int s = 0; s < subsamples; ++s) {
      double shift = ((s + 0.5) / subsamples - 0.5) * dx;
      double r = std::abs(offset * dx + shift);
      r = std::min(r, box - r);
      acc += kernel(r);
    }
    return acc / subsamples;
  };
  double z = 1.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      int off = (j - i + n) % n;
      z += p[std::size_t(i)] * p[std::size_t(j)] * cbar(off) * dx * dx;
    }
  int lo = int(std::lround(window_lo / dx)), hi = int(std::lround(window_hi / dx));
  double num = 0.0, den = 0.0;
  for (int i = lo; i < hi; ++i) {
    den += p[std::size_t(i)] * dx;
    for (int j = lo; j < hi; ++j) {
      int off = (j - i + n) % n;
      num += p[std::size_t(i)] * p[std::size_t(j)] *
             ((1.0 + cbar(off)) / z - 1.0) * dx * dx;
    }
  }
  return num / (den * den);
}

// Binomial window-count law for i.i.d. samples from a normalized density:
// counts ~ Binomial(N, w) with w the window mass.
struct BinomialLaw {
  double mean, variance, ratio;
};
inline BinomialLaw binomial_law(int num_particles, double window_mass) {
  BinomialLaw out;
  out.mean = num_particles * window_mass;
  out.variance = num_particles * window_mass * (1.0 - window_mass);
  out.ratio = out.variance / (out.mean * out.mean);
  return out;
}

}  // namespace oracles
