#include <cmath>
#include <stdexcept>

#include "dechist/brownian.hpp"

namespace dechist::brownian {

void BrownianParams::validate() const {
  if (!(mass > 0)) throw std::invalid_argument("mass must be > 0");
  if (!(friction > 0)) throw std::invalid_argument("friction must be > 0");
  if (!(momentum_diffusion > 0))
    throw std::invalid_argument("momentum diffusion must be > 0");
}

void OneParticleGaussian::validate() const {
  if (var_qq < 0 || var_pp < 0)
    throw std::invalid_argument("negative variance");
  if (var_qq * var_pp - cov_qp * cov_qp < -1e-12 * (1.0 + var_qq * var_pp))
    throw std::invalid_argument("covariance matrix not positive semidefinite");
}

OneParticleGaussian evolve_moments(const OneParticleGaussian& state,
                                   const BrownianParams& params, double t) {
  params.validate();
  state.validate();
  if (t < 0) throw std::invalid_argument("time must be >= 0");
  double m = params.mass, g = params.friction, d = params.momentum_diffusion;
  double e1 = std::exp(-g * t);
  double f1 = -std::expm1(-g * t);       // 1 - e^{-gt}
  double f2 = -std::expm1(-2.0 * g * t); // 1 - e^{-2gt}
  double a = state.var_pp - d / g;       // decaying part of var_pp

  OneParticleGaussian out;
  out.mean_q = state.mean_q + state.mean_p * f1 / (m * g);
  out.mean_p = state.mean_p * e1;
  out.var_pp = d / g + a * e1 * e1;
  out.cov_qp = state.cov_qp * e1 + d * f1 / (m * g * g) + a * e1 * f1 / (m * g);
  out.var_qq = state.var_qq + 2.0 * state.cov_qp * f1 / (m * g) +
               2.0 * d * (t - f1 / g) / (m * m * g * g) +
               2.0 * a / (m * m * g) * (f1 / g - f2 / (2.0 * g));
  return out;
}

double diffusion_constant_closed_form(const BrownianParams& params) {
  params.validate();
  return params.momentum_diffusion /
         (params.mass * params.mass * params.friction * params.friction);
}

DiffusionFit diffusion_constant_fit(const OneParticleGaussian& initial,
                                    const BrownianParams& params,
                                    const std::vector<double>& t_grid) {
  params.validate();
  if (t_grid.size() < 4)
    throw std::invalid_argument("diffusion fit needs >= 4 grid times");
  double g = params.friction;
  double lo = t_grid.front(), hi = t_grid.back();
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1]))
      throw std::invalid_argument("time grid not strictly increasing");
  if (lo < 10.0 / g * (1.0 - 1e-12) || hi < 100.0 / g * (1.0 - 1e-12))
    throw std::invalid_argument(
        "grid too short: the fit window must span [10/gamma, 100/gamma]");

  std::size_t n = t_grid.size();
  std::vector<double> sqq(n);
  for (std::size_t i = 0; i < n; ++i)
    sqq[i] = evolve_moments(initial, params, t_grid[i]).var_qq;

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += t_grid[i];
    sy += sqq[i];
    sxx += t_grid[i] * t_grid[i];
    sxy += t_grid[i] * sqq[i];
  }
  double nn = double(n);
  double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  double intercept = (sy - slope * sx) / nn;

  DiffusionFit fit;
  fit.d_fit = 0.5 * slope;
  fit.intercept = intercept;
  double rss = 0.0, ymin = sqq[0], ymax = sqq[0];
  for (std::size_t i = 0; i < n; ++i) {
    double r = sqq[i] - (intercept + slope * t_grid[i]);
    rss += r * r;
    ymin = std::min(ymin, sqq[i]);
    ymax = std::max(ymax, sqq[i]);
  }
  double range = std::max(ymax - ymin, 1e-300);
  fit.residual = std::sqrt(rss / nn) / range;
  return fit;
}

DiffusionFit diffusion_constant_fit(const BrownianParams& params,
                                    const std::vector<double>& t_grid) {
  OneParticleGaussian stationary;
  stationary.var_qq = 1.0;
  stationary.cov_qp = 0.0;
  stationary.var_pp = params.momentum_diffusion / params.friction;
  return diffusion_constant_fit(stationary, params, t_grid);
}

DiffusionResidualReport product_density_check(const OneParticleGaussian& initial,
                                              const BrownianParams& params,
                                              int num_particles,
                                              const std::vector<double>& x_grid,
                                              const std::vector<double>& t_grid,
                                              double diffusion_constant) {
  params.validate();
  initial.validate();
  if (num_particles < 1) throw std::invalid_argument("num_particles must be >= 1");
  if (x_grid.size() < 5) throw std::invalid_argument("x grid too small");
  if (t_grid.empty()) throw std::invalid_argument("empty time grid");
  double dx = x_grid[1] - x_grid[0];
  for (std::size_t i = 1; i < x_grid.size(); ++i) {
    double step = x_grid[i] - x_grid[i - 1];
    if (std::abs(step - dx) > 1e-9 * std::abs(dx))
      throw std::invalid_argument("x grid must be uniform");
  }
  double d = diffusion_constant > 0.0 ? diffusion_constant
                                      : diffusion_constant_closed_form(params);

  auto density_at = [&](const OneParticleGaussian& s, double x) {
    double z = x - s.mean_q;
    return double(num_particles) / std::sqrt(2.0 * M_PI * s.var_qq) *
           std::exp(-0.5 * z * z / s.var_qq);
  };

  DiffusionResidualReport report;
  report.diffusion_constant = d;
  for (double t : t_grid) {
    if (!(t > 0)) throw std::invalid_argument("residual times must be > 0");
    OneParticleGaussian s = evolve_moments(initial, params, t);
    double sigma = std::sqrt(s.var_qq);
    if (dx > sigma / 4.0)
      throw std::invalid_argument("x grid not resolving the Gaussian width");
    if (x_grid.front() > s.mean_q - 6.0 * sigma ||
        x_grid.back() < s.mean_q + 6.0 * sigma)
      throw std::invalid_argument("x grid not covering the Gaussian support");

    double ht = 1e-3 * t;
    OneParticleGaussian s_lo = evolve_moments(initial, params, t - ht);
    OneParticleGaussian s_hi = evolve_moments(initial, params, t + ht);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 1; i + 1 < x_grid.size(); ++i) {
      double x = x_grid[i];
      double dt_n = (density_at(s_hi, x) - density_at(s_lo, x)) / (2.0 * ht);
      double dxx_n = (density_at(s, x_grid[i + 1]) - 2.0 * density_at(s, x) +
                      density_at(s, x_grid[i - 1])) /
                     (dx * dx);
      double r = dt_n - d * dxx_n;
      num += r * r;
      den += dt_n * dt_n;
    }
    if (den <= 0.0)
      throw std::invalid_argument("time derivative vanishes on the grid");
    report.times.push_back(t);
    report.residuals.push_back(std::sqrt(num / den));
  }
  report.monotone_decreasing = true;
  for (std::size_t i = 1; i < report.residuals.size(); ++i)
    if (report.residuals[i] >= report.residuals[i - 1])
      report.monotone_decreasing = false;
  return report;
}

}  // namespace dechist::brownian
