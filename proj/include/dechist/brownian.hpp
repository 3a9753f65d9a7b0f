#pragma once

#include <string>
#include <vector>

// Closed-form moment flow for a Brownian particle with linear friction and
// momentum diffusion, and the diffusion-equation residual of the N-fold
// product number density built from it.

namespace dechist::brownian {

struct BrownianParams {
  double mass = 1.0;
  double friction = 1.0;            // gamma > 0
  double momentum_diffusion = 1.0;  // D_pp > 0
  double hbar = 1.0;                // recorded; the moment flow is hbar-free
  void validate() const;
};

struct OneParticleGaussian {
  double mean_q = 0.0, mean_p = 0.0;
  double var_qq = 1.0, cov_qp = 0.0, var_pp = 1.0;
  void validate() const;  // variances >= 0, determinant >= 0
};

// Exact solution of
//   dq/dt = p/m, dp/dt = -gamma p,
//   d var_qq/dt = 2 cov_qp / m,
//   d cov_qp/dt = var_pp / m - gamma cov_qp,
//   d var_pp/dt = -2 gamma var_pp + 2 D_pp.
OneParticleGaussian evolve_moments(const OneParticleGaussian& state,
                                   const BrownianParams& params, double t);

// Long-time diffusion constant of the flow: var_qq -> 2 D t with
// D = D_pp / (m^2 gamma^2).
double diffusion_constant_closed_form(const BrownianParams& params);

struct DiffusionFit {
  double d_fit = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // rms fit residual / fitted var_qq range
};
// Least-squares var_qq(t) ~ 2 D t + const; the grid must span [10/g, 100/g].
DiffusionFit diffusion_constant_fit(const OneParticleGaussian& initial,
                                    const BrownianParams& params,
                                    const std::vector<double>& t_grid);
// Convenience overload starting from the stationary-momentum state
// (var_qq = 1, cov_qp = 0, var_pp = D_pp/gamma).
DiffusionFit diffusion_constant_fit(const BrownianParams& params,
                                    const std::vector<double>& t_grid);

struct DiffusionResidualReport {
  std::vector<double> times;
  std::vector<double> residuals;  // |d_t n - D d_xx n| / |d_t n|, L2 over x
  double diffusion_constant = 0.0;
  bool monotone_decreasing = false;
};
// n(x,t) = N * Gaussian(x; q(t), var_qq(t)); finite-difference residual of
// the diffusion equation on (x_grid, t_grid). diffusion_constant <= 0 selects
// the closed-form value.
DiffusionResidualReport product_density_check(const OneParticleGaussian& initial,
                                              const BrownianParams& params,
                                              int num_particles,
                                              const std::vector<double>& x_grid,
                                              const std::vector<double>& t_grid,
                                              double diffusion_constant = 0.0);

}  // namespace dechist::brownian
