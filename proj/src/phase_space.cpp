#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <numeric>
#include <random>
#include <stdexcept>

#include "dechist/io.hpp"
#include "dechist/phase_space.hpp"
#include "dechist/seeding.hpp"

namespace dechist::phasespace {

// ---------------------------------------------------------------------------
// OneParticleDistribution

OneParticleDistribution OneParticleDistribution::uniform(int dim, double box,
                                                         int cells) {
  OneParticleDistribution p;
  p.dim = dim;
  p.box = box;
  p.cells = cells;
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= std::size_t(cells);
  p.values.assign(total, 1.0 / std::pow(box, dim));
  p.validate();
  return p;
}

OneParticleDistribution OneParticleDistribution::from_function(
    int dim, double box, int cells, const std::function<double(const double*)>& f) {
  OneParticleDistribution p;
  p.dim = dim;
  p.box = box;
  p.cells = cells;
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= std::size_t(cells);
  p.values.resize(total);
  double delta = box / cells;
  double q[3] = {0, 0, 0};
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (int a = dim - 1; a >= 0; --a) {
      q[a] = double(rest % std::size_t(cells)) * delta;
      rest /= std::size_t(cells);
    }
    double v = f(q);
    if (v < 0.0)
      throw std::invalid_argument("density function negative at a grid node");
    p.values[idx] = v;
  }
  double mass = p.integral();
  if (mass <= 0.0) throw std::invalid_argument("density integrates to zero");
  for (double& v : p.values) v /= mass;
  p.validate();
  return p;
}

double OneParticleDistribution::operator()(const double* q) const {
  // Periodic multilinear interpolation between grid nodes.
  double delta = cell_size();
  int base[3];
  double frac[3];
  for (int a = 0; a < dim; ++a) {
    double t = q[a] / delta;
    double fl = std::floor(t);
    frac[a] = t - fl;
    long i = long(fl) % cells;
    if (i < 0) i += cells;
    base[a] = int(i);
  }
  double out = 0.0;
  for (int corner = 0; corner < (1 << dim); ++corner) {
    double weight = 1.0;
    std::size_t flat = 0;
    for (int a = 0; a < dim; ++a) {
      int bit = (corner >> a) & 1;
      weight *= bit ? frac[a] : 1.0 - frac[a];
      int idx = base[a] + bit;
      if (idx >= cells) idx -= cells;
      flat = flat * std::size_t(cells) + std::size_t(idx);
    }
    out += weight * values[flat];
  }
  return out;
}

double OneParticleDistribution::at_node(const std::vector<int>& idx) const {
  std::size_t flat = 0;
  for (int a = 0; a < dim; ++a)
    flat = flat * std::size_t(cells) + std::size_t(idx[std::size_t(a)]);
  return values[flat];
}

double OneParticleDistribution::integral() const {
  double sum = std::accumulate(values.begin(), values.end(), 0.0);
  return sum * std::pow(cell_size(), dim);
}

double OneParticleDistribution::max_value() const {
  return *std::max_element(values.begin(), values.end());
}

void OneParticleDistribution::validate() const {
  if (dim < 1 || dim > 3) throw std::invalid_argument("dimension must be 1, 2, or 3");
  if (!(box > 0)) throw std::invalid_argument("box side must be > 0");
  if (cells < 2) throw std::invalid_argument("need at least 2 grid cells per side");
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= std::size_t(cells);
  if (values.size() != total)
    throw std::invalid_argument("grid value count != cells^dim");
  for (double v : values)
    if (v < 0.0) throw std::invalid_argument("density has a negative node");
  double mass = integral();
  if (std::abs(mass - 1.0) > 1e-8)
    throw std::invalid_argument("density integrates to " + std::to_string(mass) +
                                ", expected 1");
}

// ---------------------------------------------------------------------------
// PairCorrelationModel

double PairCorrelationModel::operator()(double r) const {
  if (r > correlation_length) return 0.0;
  switch (shape) {
    case KernelShape::constant:
      return amplitude;
    case KernelShape::triangular:
      return amplitude * (1.0 - r / correlation_length);
    case KernelShape::gaussian_truncated: {
      double s = gaussian_sigma_fraction * correlation_length;
      return amplitude * std::exp(-0.5 * r * r / (s * s));
    }
  }
  return 0.0;
}

void PairCorrelationModel::validate() const {
  if (!(correlation_length > 0))
    throw std::invalid_argument("correlation_length must be > 0");
  if (amplitude < -1.0)
    throw std::invalid_argument("kernel drives the pair density negative");
  if (shape == KernelShape::gaussian_truncated &&
      !(gaussian_sigma_fraction > 0))
    throw std::invalid_argument("gaussian sigma fraction must be > 0");
}

// ---------------------------------------------------------------------------
// WindowRegion

double WindowRegion::volume() const {
  double v = 1.0;
  for (std::size_t a = 0; a < lo.size(); ++a) v *= hi[a] - lo[a];
  return v;
}

bool WindowRegion::contains(const double* q) const {
  for (std::size_t a = 0; a < lo.size(); ++a)
    if (q[a] < lo[a] || q[a] >= hi[a]) return false;
  return true;
}

void WindowRegion::validate(int dim, double box) const {
  if (lo.size() != std::size_t(dim) || hi.size() != std::size_t(dim))
    throw std::invalid_argument("window dimension mismatch");
  for (int a = 0; a < dim; ++a) {
    if (!(lo[std::size_t(a)] < hi[std::size_t(a)]))
      throw std::invalid_argument("window has non-positive extent");
    if (lo[std::size_t(a)] < 0.0 || hi[std::size_t(a)] > box + 1e-12 * box)
      throw std::invalid_argument("window outside the periodic box");
  }
}

WindowRegion WindowRegion::centered_cube(int dim, double box, double side) {
  if (!(side > 0) || side > box)
    throw std::invalid_argument("window side must be in (0, box]");
  WindowRegion w;
  double lo = 0.5 * (box - side);
  for (int a = 0; a < dim; ++a) {
    w.lo.push_back(lo);
    w.hi.push_back(lo + side);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

double min_image_distance(const double* a, const double* b, int dim, double box) {
  double r2 = 0.0;
  for (int x = 0; x < dim; ++x) {
    double d = std::abs(a[x] - b[x]);
    d = std::min(d, box - d);
    r2 += d * d;
  }
  return std::sqrt(r2);
}

class PointSampler {
 public:
  PointSampler(const OneParticleDistribution& p1, std::mt19937_64& rng)
      : p1_(p1), rng_(rng), coord_(0.0, p1.box), height_(0.0, p1.max_value()) {}

  void draw(double* q) {
    ++draws_;
    for (;;) {
      ++proposals_;
      for (int a = 0; a < p1_.dim; ++a) q[a] = coord_(rng_);
      if (height_(rng_) <= p1_(q)) return;
    }
  }
  double acceptance() const {
    return proposals_ ? double(draws_) / double(proposals_) : 1.0;
  }
  std::size_t proposals() const { return proposals_; }

 private:
  const OneParticleDistribution& p1_;
  std::mt19937_64& rng_;
  std::uniform_real_distribution<double> coord_;
  std::uniform_real_distribution<double> height_;
  std::size_t proposals_ = 0;
  std::size_t draws_ = 0;
};

// Geyer initial-positive-sequence integrated autocorrelation time, in units
// of the series spacing.
double integrated_autocorr(const std::vector<double>& series) {
  std::size_t n = series.size();
  if (n < 8) return 1.0;
  double mean = std::accumulate(series.begin(), series.end(), 0.0) / double(n);
  double gamma0 = 0.0;
  for (double v : series) gamma0 += (v - mean) * (v - mean);
  gamma0 /= double(n);
  if (gamma0 <= 1e-300) return 1.0;  // constant observable
  double tau = 1.0;
  std::size_t max_lag = n / 4;
  for (std::size_t m = 0;; ++m) {
    std::size_t k1 = 2 * m + 1, k2 = 2 * m + 2;
    if (k2 > max_lag) break;
    auto gamma = [&](std::size_t k) {
      double g = 0.0;
      for (std::size_t i = 0; i + k < n; ++i)
        g += (series[i] - mean) * (series[i + k] - mean);
      return g / double(n);
    };
    double pair = gamma(k1) + gamma(k2);
    if (pair <= 0.0) break;
    tau += 2.0 * pair / gamma0;
  }
  return std::max(tau, 1.0);
}

}  // namespace

CorrelatedEnsemble sample_ensemble(const OneParticleDistribution& p1,
                                   const std::optional<PairCorrelationModel>& pair,
                                   int num_particles, std::size_t num_samples,
                                   std::uint64_t seed) {
  p1.validate();
  if (pair) pair->validate();
  if (num_particles < 2) throw std::invalid_argument("need at least 2 particles");
  if (num_samples < 100) throw std::invalid_argument("need at least 100 samples");

  CorrelatedEnsemble ens;
  ens.num_particles = num_particles;
  ens.dim = p1.dim;
  ens.box = p1.box;
  ens.num_samples = num_samples;
  ens.seed = seed;
  std::size_t stride = std::size_t(num_particles) * std::size_t(p1.dim);
  ens.samples.resize(num_samples * stride);

  bool correlated = pair.has_value() && !pair->trivial();
  if (!correlated) {
    // i.i.d. rejection sampling; a present-but-zero kernel takes this exact
    // path so its sample stream matches the no-pair configuration.
    std::mt19937_64 rng = make_engine(seed, "iid-ensemble");
    PointSampler draw(p1, rng);
    for (std::size_t s = 0; s < num_samples; ++s)
      for (int j = 0; j < num_particles; ++j)
        draw.draw(&ens.samples[s * stride + std::size_t(j) * std::size_t(p1.dim)]);
    ens.meta.acceptance_rate = draw.acceptance();
    ens.meta.autocorr_sweeps = 0.0;
    ens.meta.thinning = 1;
    ens.meta.effective_sample_size = double(num_samples);
    ens.meta.converged = true;
    return ens;
  }

  const PairCorrelationModel& c = *pair;
  std::mt19937_64 rng = make_engine(seed, "metropolis-ensemble");
  PointSampler draw(p1, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> state(stride);
  auto particle = [&](std::vector<double>& cfg, int j) {
    return cfg.data() + std::size_t(j) * std::size_t(p1.dim);
  };
  // Initial configuration: i.i.d., redrawn while any pair factor vanishes.
  for (int tries = 0;; ++tries) {
    for (int j = 0; j < num_particles; ++j) draw.draw(particle(state, j));
    bool ok = true;
    for (int j = 0; j < num_particles && ok; ++j)
      for (int l = j + 1; l < num_particles && ok; ++l)
        ok = 1.0 + c(min_image_distance(particle(state, j), particle(state, l),
                                        p1.dim, p1.box)) > 0.0;
    if (ok) break;
    if (tries > 1000)
      throw std::runtime_error("cannot initialize chain: pair density vanishes");
  }

  std::size_t accepted = 0, attempted = 0;
  double proposal[3];
  auto sweep = [&]() {
    for (int j = 0; j < num_particles; ++j) {
      draw.draw(proposal);
      double ratio = 1.0;
      for (int l = 0; l < num_particles; ++l) {
        if (l == j) continue;
        double rn = min_image_distance(proposal, particle(state, l), p1.dim, p1.box);
        double ro = min_image_distance(particle(state, j), particle(state, l),
                                       p1.dim, p1.box);
        ratio *= (1.0 + c(rn)) / (1.0 + c(ro));
      }
      ++attempted;
      if (unit(rng) < ratio) {
        ++accepted;
        for (int a = 0; a < p1.dim; ++a) particle(state, j)[a] = proposal[a];
      }
    }
  };
  auto close_pairs = [&]() {
    double count = 0.0;
    for (int j = 0; j < num_particles; ++j)
      for (int l = j + 1; l < num_particles; ++l)
        if (min_image_distance(particle(state, j), particle(state, l), p1.dim,
                               p1.box) <= c.correlation_length)
          count += 1.0;
    return count;
  };

  for (int s = 0; s < 100; ++s) sweep();  // burn-in

  // Pilot run to measure the integrated autocorrelation time of a slow
  // observable (close-pair count), extending once if it looks unconverged.
  double tau = 1.0;
  std::size_t pilot_len = 500;
  std::vector<double> series;
  for (int attempt = 0; attempt < 3; ++attempt) {
    series.reserve(pilot_len);
    while (series.size() < pilot_len) {
      sweep();
      series.push_back(close_pairs());
    }
    tau = integrated_autocorr(series);
    if (tau < double(pilot_len) / 10.0) break;
    if (attempt == 2)
      throw std::runtime_error(
          "Metropolis chain failed to converge: autocorrelation time " +
          std::to_string(tau) + " sweeps not resolved by pilot run");
    pilot_len *= 4;
  }

  int thin = std::max(1, int(std::ceil(tau / 4.0)));
  for (std::size_t s = 0; s < num_samples; ++s) {
    for (int t = 0; t < thin; ++t) sweep();
    std::copy(state.begin(), state.end(), ens.samples.begin() + long(s * stride));
  }

  ens.meta.acceptance_rate =
      attempted ? double(accepted) / double(attempted) : 1.0;
  ens.meta.autocorr_sweeps = tau;
  ens.meta.thinning = thin;
  ens.meta.effective_sample_size =
      std::min(double(num_samples), double(num_samples) * double(thin) / tau);
  ens.meta.converged = true;
  return ens;
}

// ---------------------------------------------------------------------------
// Density moments with jackknife errors

DensityMoments density_moments(const CorrelatedEnsemble& ens, const WindowRegion& w) {
  w.validate(ens.dim, ens.box);
  std::size_t n = ens.num_samples;
  if (n < 3) throw std::invalid_argument("too few samples for moments");
  std::vector<double> counts(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double* cfg = ens.configuration(s);
    double k = 0.0;
    for (int j = 0; j < ens.num_particles; ++j)
      if (w.contains(cfg + std::size_t(j) * std::size_t(ens.dim))) k += 1.0;
    counts[s] = k;
  }
  double s1 = 0.0, s2 = 0.0;
  for (double k : counts) {
    s1 += k;
    s2 += k * k;
  }
  double nn = double(n);
  DensityMoments out;
  out.mean = s1 / nn;
  out.variance = std::max(0.0, (s2 - s1 * s1 / nn) / (nn - 1.0));
  out.mean_err = std::sqrt(out.variance / nn);

  // Jackknife for the variance and the ratio variance/mean^2.
  double jk_var_mean = 0.0, jk_ratio_mean = 0.0;
  std::vector<double> jk_var(n), jk_ratio(n);
  bool ratio_ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    double m = (s1 - counts[i]) / (nn - 1.0);
    double v = (s2 - counts[i] * counts[i] - (nn - 1.0) * m * m) / (nn - 2.0);
    v = std::max(v, 0.0);
    jk_var[i] = v;
    jk_var_mean += v;
    if (m == 0.0) {
      ratio_ok = false;
    } else {
      jk_ratio[i] = v / (m * m);
      jk_ratio_mean += jk_ratio[i];
    }
  }
  jk_var_mean /= nn;
  double acc = 0.0;
  for (double v : jk_var) acc += (v - jk_var_mean) * (v - jk_var_mean);
  out.variance_err = std::sqrt((nn - 1.0) / nn * acc);

  if (out.mean != 0.0 && ratio_ok) {
    out.ratio = out.variance / (out.mean * out.mean);
    jk_ratio_mean /= nn;
    acc = 0.0;
    for (double r : jk_ratio) acc += (r - jk_ratio_mean) * (r - jk_ratio_mean);
    out.ratio_err = std::sqrt((nn - 1.0) / nn * acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// FFT-backed quadrature

namespace {

class Convolver {
 public:
  Convolver(int dim, int n) : dim_(dim), n_(n) {
    total_ = 1;
    for (int a = 0; a < dim; ++a) total_ *= std::size_t(n);
    spec_size_ = total_ / std::size_t(n) * (std::size_t(n) / 2 + 1);
    real_ = fftw_alloc_real(total_);
    spec_ = fftw_alloc_complex(spec_size_);
    int sizes[3] = {n, n, n};
    fwd_ = fftw_plan_dft_r2c(dim, sizes, real_, spec_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r(dim, sizes, spec_, real_, FFTW_ESTIMATE);
    if (!fwd_ || !bwd_) throw std::runtime_error("FFTW plan creation failed");
  }
  ~Convolver() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  Convolver(const Convolver&) = delete;
  Convolver& operator=(const Convolver&) = delete;

  std::vector<std::complex<double>> spectrum(const std::vector<double>& f) {
    std::memcpy(real_, f.data(), total_ * sizeof(double));
    fftw_execute(fwd_);
    const auto* s = reinterpret_cast<const std::complex<double>*>(spec_);
    return std::vector<std::complex<double>>(s, s + spec_size_);
  }

  // Periodic convolution with a precomputed (even, real) kernel spectrum.
  std::vector<double> convolve(const std::vector<double>& f,
                               const std::vector<std::complex<double>>& kernel_spec) {
    std::memcpy(real_, f.data(), total_ * sizeof(double));
    fftw_execute(fwd_);
    auto* s = reinterpret_cast<std::complex<double>*>(spec_);
    for (std::size_t i = 0; i < spec_size_; ++i) s[i] *= kernel_spec[i];
    fftw_execute(bwd_);
    std::vector<double> out(total_);
    double norm = 1.0 / double(total_);
    for (std::size_t i = 0; i < total_; ++i) out[i] = real_[i] * norm;
    return out;
  }

  std::size_t total() const { return total_; }

 private:
  int dim_, n_;
  std::size_t total_, spec_size_;
  double* real_;
  fftw_complex* spec_;
  fftw_plan fwd_, bwd_;
};

int default_subsamples(int dim) { return dim == 1 ? 32 : (dim == 2 ? 8 : 4); }

// Density at quadrature-cell centers.
std::vector<double> tabulate_centers(const OneParticleDistribution& p1, int n) {
  std::size_t total = 1;
  for (int a = 0; a < p1.dim; ++a) total *= std::size_t(n);
  std::vector<double> out(total);
  double delta = p1.box / n;
  double q[3] = {0, 0, 0};
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (int a = p1.dim - 1; a >= 0; --a) {
      q[a] = (double(rest % std::size_t(n)) + 0.5) * delta;
      rest /= std::size_t(n);
    }
    out[idx] = p1(q);
  }
  return out;
}

// Kernel tabulated on the torus as cell averages (sub-grid per cell), so the
// hard cutoff is smeared symmetrically instead of biased by half a cell.
std::vector<double> tabulate_kernel(const PairCorrelationModel& c, int dim, int n,
                                    double box, int subsamples) {
  double delta = box / n;
  if (c.correlation_length + delta > 0.5 * box)
    throw std::invalid_argument(
        "correlation length too large for the periodic box");
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= std::size_t(n);
  std::vector<double> out(total, 0.0);

  int reach = int(std::ceil(c.correlation_length / delta)) + 1;
  std::vector<double> offsets(static_cast<std::size_t>(subsamples));
  for (int s = 0; s < subsamples; ++s)
    offsets[std::size_t(s)] = ((s + 0.5) / subsamples - 0.5) * delta;

  int g[3] = {0, 0, 0};
  int span = 2 * reach + 1;
  long cells_in_reach = 1;
  for (int a = 0; a < dim; ++a) cells_in_reach *= span;
  long subs_total = 1;
  for (int a = 0; a < dim; ++a) subs_total *= subsamples;

  for (long flat = 0; flat < cells_in_reach; ++flat) {
    long rest = flat;
    for (int a = dim - 1; a >= 0; --a) {
      g[a] = int(rest % span) - reach;
      rest /= span;
    }
    double avg = 0.0;
    for (long sub = 0; sub < subs_total; ++sub) {
      long srest = sub;
      double r2 = 0.0;
      for (int a = dim - 1; a >= 0; --a) {
        double d = g[a] * delta + offsets[std::size_t(srest % subsamples)];
        srest /= subsamples;
        r2 += d * d;
      }
      avg += c(std::sqrt(r2));
    }
    avg /= double(subs_total);
    if (avg == 0.0) continue;
    std::size_t torus = 0;
    for (int a = 0; a < dim; ++a) {
      int idx = ((g[a] % n) + n) % n;
      torus = torus * std::size_t(n) + std::size_t(idx);
    }
    out[torus] = avg;
  }
  return out;
}

struct SnappedWindow {
  std::vector<int> lo_cell, hi_cell;  // [lo, hi) in cell indices
};

SnappedWindow snap_window(const WindowRegion& w, int dim, double box, int n) {
  double delta = box / n;
  SnappedWindow s;
  for (int a = 0; a < dim; ++a) {
    double lo = w.lo[std::size_t(a)] / delta;
    double hi = w.hi[std::size_t(a)] / delta;
    double lo_r = std::round(lo), hi_r = std::round(hi);
    if (std::abs(lo - lo_r) > 1e-9 * n || std::abs(hi - hi_r) > 1e-9 * n)
      throw std::invalid_argument(
          "window edge does not lie on the quadrature grid");
    s.lo_cell.push_back(int(lo_r));
    s.hi_cell.push_back(int(hi_r));
  }
  return s;
}

void mask_window(std::vector<double>& field, const SnappedWindow& w, int dim, int n) {
  std::size_t total = field.size();
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    bool inside = true;
    for (int a = dim - 1; a >= 0; --a) {
      int i = int(rest % std::size_t(n));
      rest /= std::size_t(n);
      if (i < w.lo_cell[std::size_t(a)] || i >= w.hi_cell[std::size_t(a)])
        inside = false;
    }
    if (!inside) field[idx] = 0.0;
  }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double variance_ratio_quadrature(const OneParticleDistribution& p1,
                                 const std::optional<PairCorrelationModel>& pair,
                                 const WindowRegion& w, const QuadratureSpec& quad) {
  p1.validate();
  w.validate(p1.dim, p1.box);
  int n = quad.cells > 0 ? quad.cells : p1.cells;
  double delta = p1.box / n;
  SnappedWindow sw = snap_window(w, p1.dim, p1.box, n);

  // Factorized pair density: the correlation integrand is identically zero.
  if (!pair || pair->trivial()) return 0.0;
  pair->validate();
  if (delta > pair->correlation_length / 8.0 + 1e-15)
    throw std::invalid_argument(
        "grid does not resolve the correlation length (need >= 8 cells)");

  int subs = quad.subsamples > 0 ? quad.subsamples : default_subsamples(p1.dim);
  std::vector<double> p = tabulate_centers(p1, n);
  std::vector<double> kernel =
      tabulate_kernel(*pair, p1.dim, n, p1.box, subs);

  Convolver fft(p1.dim, n);
  auto kernel_spec = fft.spectrum(kernel);
  double cell_vol = std::pow(delta, p1.dim);

  std::vector<double> conv_p = fft.convolve(p, kernel_spec);
  double z = 1.0 + cell_vol * cell_vol * dot(p, conv_p);
  conv_p.clear();
  conv_p.shrink_to_fit();

  std::vector<double> masked = p;
  mask_window(masked, sw, p1.dim, n);
  double window_mass = cell_vol * std::accumulate(masked.begin(), masked.end(), 0.0);
  if (window_mass <= 0.0)
    throw std::invalid_argument("window carries no probability mass");
  std::vector<double> conv_q = fft.convolve(masked, kernel_spec);
  double t = cell_vol * cell_vol * dot(masked, conv_q);

  return t / (z * window_mass * window_mass) - (z - 1.0) / z;
}

double pair_normalization_residual(const OneParticleDistribution& p1,
                                   const PairCorrelationModel& pair,
                                   const QuadratureSpec& quad) {
  p1.validate();
  pair.validate();
  int n = quad.cells > 0 ? quad.cells : p1.cells;
  int subs = quad.subsamples > 0 ? quad.subsamples : default_subsamples(p1.dim);

  auto correlation_mass = [&](int grid, int sub) {
    std::vector<double> p = tabulate_centers(p1, grid);
    std::vector<double> kernel = tabulate_kernel(pair, p1.dim, grid, p1.box, sub);
    Convolver fft(p1.dim, grid);
    auto conv = fft.convolve(p, fft.spectrum(kernel));
    double cv = std::pow(p1.box / grid, p1.dim);
    return cv * cv * dot(p, conv);
  };
  double z_base = 1.0 + correlation_mass(n, subs);
  double z_fine = 1.0 + correlation_mass(2 * n, subs);
  return std::abs(z_fine / z_base - 1.0);
}

// ---------------------------------------------------------------------------
// Scaling scans

LogLogFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& y_err) {
  if (x.size() != y.size() || x.size() != y_err.size() || x.size() < 4)
    throw std::invalid_argument("log-log fit needs >= 4 matched points");
  std::size_t n = x.size();
  bool weighted = false;
  for (double e : y_err)
    if (e > 0.0) weighted = true;

  std::vector<double> lx(n), ly(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw std::invalid_argument("log-log fit needs positive data");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    if (weighted) {
      double sigma = std::max(y_err[i] / y[i], 1e-12);
      w[i] = 1.0 / (sigma * sigma);
    } else {
      w[i] = 1.0;
    }
  }
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    swx += w[i] * lx[i];
    swy += w[i] * ly[i];
    swxx += w[i] * lx[i] * lx[i];
    swxy += w[i] * lx[i] * ly[i];
  }
  double det = sw * swxx - swx * swx;
  LogLogFit fit;
  fit.slope = (sw * swxy - swx * swy) / det;
  fit.intercept = (swxx * swy - swx * swxy) / det;
  if (weighted) {
    fit.slope_err = std::sqrt(sw / det);
  } else {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
      rss += r * r;
    }
    double dof = double(n) - 2.0;
    fit.slope_err = std::sqrt(std::max(rss, 0.0) / dof * sw / det);
  }
  return fit;
}

std::string ResultTable::to_csv() const {
  io::CsvWriter csv({variable_name, "ratio", "error"});
  for (std::size_t i = 0; i < x.size(); ++i)
    csv.add_row({io::cell(x[i]), io::cell(ratio[i]), io::cell(error[i])});
  return csv.str();
}

ResultTable scaling_scan(const ScalingScanConfig& config) {
  ResultTable table;
  if (config.variable == ScanVariable::particle_count) {
    if (config.particle_grid.size() < 4)
      throw std::invalid_argument("particle-count scan needs >= 4 grid points");
    table.variable_name = "N";
    for (std::size_t i = 0; i < config.particle_grid.size(); ++i) {
      int n_particles = config.particle_grid[i];
      auto ens = sample_ensemble(config.p1, config.pair, n_particles,
                                 config.num_samples,
                                 substream_seed(config.seed, "scan-N", i));
      auto dm = density_moments(ens, config.window);
      table.x.push_back(double(n_particles));
      table.ratio.push_back(dm.ratio);
      table.error.push_back(dm.ratio_err);
    }
  } else {
    if (config.volume_grid.size() < 4)
      throw std::invalid_argument("window-volume scan needs >= 4 grid points");
    table.variable_name = "volume";
    int n = config.quad.cells > 0 ? config.quad.cells : config.p1.cells;
    double delta = config.p1.box / n;
    for (std::size_t i = 0; i < config.volume_grid.size(); ++i) {
      double target_side = std::pow(config.volume_grid[i], 1.0 / config.p1.dim);
      int side_cells = std::max(1, int(std::round(target_side / delta)));
      if (side_cells >= n)
        throw std::invalid_argument("window volume exceeds the box");
      double side = side_cells * delta;
      int lo_cell = (n - side_cells) / 2;
      WindowRegion w;
      for (int a = 0; a < config.p1.dim; ++a) {
        w.lo.push_back(lo_cell * delta);
        w.hi.push_back((lo_cell + side_cells) * delta);
      }
      double actual_volume = std::pow(side, config.p1.dim);
      if (config.method == ScanMethod::quadrature) {
        double r = variance_ratio_quadrature(config.p1, config.pair, w, config.quad);
        table.x.push_back(actual_volume);
        table.ratio.push_back(r);
        table.error.push_back(0.0);
      } else {
        auto ens = sample_ensemble(config.p1, config.pair, config.num_particles,
                                   config.num_samples,
                                   substream_seed(config.seed, "scan-V", i));
        auto dm = density_moments(ens, w);
        table.x.push_back(actual_volume);
        table.ratio.push_back(dm.ratio);
        table.error.push_back(dm.ratio_err);
      }
    }
  }
  LogLogFit fit = fit_loglog(table.x, table.ratio, table.error);
  table.slope = fit.slope;
  table.slope_err = fit.slope_err;
  table.intercept = fit.intercept;
  return table;
}

}  // namespace dechist::phasespace
