#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

// Classical ensemble engine for coarse-grained number densities: N-particle
// distributions with short-range pair correlations, Monte Carlo and
// deterministic-quadrature density moments, and 1/N and 1/V scaling scans.

namespace dechist::phasespace {

// Periodic grid-tabulated density over [0,B)^dim with multilinear
// interpolation between nodes at integer multiples of B/cells.
struct OneParticleDistribution {
  int dim = 1;
  double box = 1.0;
  int cells = 64;              // nodes per side
  std::vector<double> values;  // row-major, last axis fastest

  static OneParticleDistribution uniform(int dim, double box, int cells);
  static OneParticleDistribution from_function(
      int dim, double box, int cells,
      const std::function<double(const double*)>& f);

  double operator()(const double* q) const;
  double at_node(const std::vector<int>& idx) const;
  double cell_size() const { return box / cells; }
  double integral() const;   // exact for the interpolant
  double max_value() const;  // bounds the interpolant
  void validate() const;     // nonnegative; integral within 1e-8 of 1
};

enum class KernelShape { constant, triangular, gaussian_truncated };

// Pair kernel c(r), hard-zero beyond correlation_length. The two-particle
// density is p(q1,q2) = p(q1) p(q2) (1 + c(|q1-q2|)) / Z with Z the induced
// normalization 1 + integral of p p c (the bare product form is not
// normalizable for c != 0).
struct PairCorrelationModel {
  KernelShape shape = KernelShape::constant;
  double amplitude = 0.0;           // c(0) scale; >= -1 keeps density nonnegative
  double correlation_length = 1.0;  // hard cutoff
  double gaussian_sigma_fraction = 0.25;  // sigma as fraction of cutoff

  double operator()(double r) const;
  bool trivial() const { return amplitude == 0.0; }
  void validate() const;
};

struct WindowRegion {
  std::vector<double> lo, hi;  // axis-aligned, inside [0,B]^dim, no wrap
  double volume() const;
  bool contains(const double* q) const;
  void validate(int dim, double box) const;
  static WindowRegion centered_cube(int dim, double box, double side);
};

struct SamplerMeta {
  double acceptance_rate = 1.0;      // Metropolis acceptance (1 for i.i.d.)
  double autocorr_sweeps = 0.0;      // integrated autocorrelation time
  int thinning = 1;                  // sweeps kept between records
  double effective_sample_size = 0;
  bool converged = true;
};

struct CorrelatedEnsemble {
  int num_particles = 0;
  int dim = 1;
  double box = 1.0;
  std::size_t num_samples = 0;
  std::vector<double> samples;  // sample-major, then particle, then axis
  std::uint64_t seed = 0;
  SamplerMeta meta;

  const double* configuration(std::size_t s) const {
    return samples.data() + s * std::size_t(num_particles) * std::size_t(dim);
  }
};

// Uncorrelated (pair absent or kernel identically zero): i.i.d. rejection
// sampling from p1 — both cases consume the RNG stream identically.
// Correlated: single-particle-move Metropolis with independence proposals,
// thinned until the integrated autocorrelation time is below 5 sweeps.
CorrelatedEnsemble sample_ensemble(const OneParticleDistribution& p1,
                                   const std::optional<PairCorrelationModel>& pair,
                                   int num_particles, std::size_t num_samples,
                                   std::uint64_t seed);

struct DensityMoments {
  double mean = 0.0;
  double mean_err = 0.0;
  double variance = 0.0;
  double variance_err = 0.0;
  double ratio = 0.0;      // variance / mean^2
  double ratio_err = 0.0;  // jackknife
};
DensityMoments density_moments(const CorrelatedEnsemble& ens, const WindowRegion& w);

struct QuadratureSpec {
  int cells = 0;       // grid nodes per side; 0 = inherit from p1
  int subsamples = 0;  // kernel cell-average subdivisions; 0 = dim default
};

// [V-window double integral of (p(q1,q2) - p(q1)p(q2))] / [integral_V p]^2,
// the N -> infinity limit of (Delta n_V)^2/<n_V>^2 minus the 1/N term.
// Deterministic FFT-backed quadrature; requires >= 8 cells per correlation
// length and window edges on cell boundaries.
double variance_ratio_quadrature(const OneParticleDistribution& p1,
                                 const std::optional<PairCorrelationModel>& pair,
                                 const WindowRegion& w,
                                 const QuadratureSpec& quad = {});

// Self-consistency of the pair normalization: |integral of p2 - 1| evaluated
// with the numerator on a 2x refined grid against Z from the base grid.
double pair_normalization_residual(const OneParticleDistribution& p1,
                                   const PairCorrelationModel& pair,
                                   const QuadratureSpec& quad = {});

enum class ScanVariable { particle_count, window_volume };
enum class ScanMethod { monte_carlo, quadrature };

struct ScalingScanConfig {
  ScanVariable variable = ScanVariable::particle_count;
  ScanMethod method = ScanMethod::monte_carlo;
  OneParticleDistribution p1;
  std::optional<PairCorrelationModel> pair;
  WindowRegion window;              // fixed window for particle_count scans
  std::vector<int> particle_grid;
  std::vector<double> volume_grid;  // target window volumes (snapped to cells)
  int num_particles = 2;            // for window_volume Monte Carlo runs
  std::size_t num_samples = 20000;
  std::uint64_t seed = 0;
  QuadratureSpec quad;
};

struct ResultTable {
  std::string variable_name;  // "N" or "volume"
  std::vector<double> x;
  std::vector<double> ratio;
  std::vector<double> error;  // 0 for quadrature rows
  double slope = 0.0;
  double slope_err = 0.0;
  double intercept = 0.0;  // log-log fit: ln ratio = intercept + slope ln x
  std::string to_csv() const;
};

ResultTable scaling_scan(const ScalingScanConfig& config);

// Weighted log-log line fit used by the scans (exposed for reuse/testing).
struct LogLogFit {
  double slope = 0.0, slope_err = 0.0, intercept = 0.0;
};
LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& y_err);

}  // namespace dechist::phasespace
