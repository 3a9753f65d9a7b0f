#include <cmath>
#include <stdexcept>

#include "dechist/hilbert.hpp"

namespace dechist::hilbert {

namespace {
constexpr std::complex<double> kI{0.0, 1.0};
}

std::size_t LatticeSpec::dim() const {
  std::size_t d = 1;
  for (int j = 0; j < num_particles; ++j) {
    if (d > max_dim / std::size_t(num_sites))
      throw std::invalid_argument("Hilbert dimension d^N exceeds cap " +
                                  std::to_string(max_dim));
    d *= std::size_t(num_sites);
  }
  return d;
}

double LatticeSpec::effective_hopping() const {
  if (hopping >= 0.0) return hopping;
  return hbar * hbar / (2.0 * mass * lattice_spacing * lattice_spacing);
}

int LatticeSpec::separation(int site_a, int site_b) const {
  int r = std::abs(site_a - site_b);
  if (boundary == Boundary::periodic) r = std::min(r, num_sites - r);
  return r;
}

double LatticeSpec::phi(int site_a, int site_b) const {
  if (pair_potential.empty()) return 0.0;
  return pair_potential[std::size_t(separation(site_a, site_b))];
}

void LatticeSpec::validate() const {
  if (num_particles < 1) throw std::invalid_argument("num_particles must be >= 1");
  if (num_sites < 2) throw std::invalid_argument("num_sites must be >= 2");
  if (!(lattice_spacing > 0)) throw std::invalid_argument("lattice_spacing must be > 0");
  if (!(mass > 0)) throw std::invalid_argument("mass must be > 0");
  if (!(hbar > 0)) throw std::invalid_argument("hbar must be > 0");
  dim();  // throws if over the cap
  if (!pair_potential.empty()) {
    if (pair_potential.size() != std::size_t(num_sites))
      throw std::invalid_argument("pair_potential must have num_sites entries");
    if (boundary == Boundary::periodic) {
      for (int r = 1; r < num_sites; ++r) {
        double a = pair_potential[std::size_t(r)];
        double b = pair_potential[std::size_t(num_sites - r)];
        if (std::abs(a - b) > 1e-12 * (1.0 + std::abs(a)))
          throw std::invalid_argument(
              "pair_potential not symmetric under periodic distance: phi[" +
              std::to_string(r) + "] != phi[" + std::to_string(num_sites - r) + "]");
      }
    }
  }
}

void PureState::validate() const {
  double n = amplitudes.norm();
  if (std::abs(n - 1.0) > 1e-12)
    throw std::invalid_argument("state norm " + std::to_string(n) + " != 1");
}

PureState product_state(const LatticeSpec& spec, const Eigen::VectorXcd& single) {
  spec.validate();
  if (single.size() != spec.num_sites)
    throw std::invalid_argument("single-particle vector length != num_sites");
  double n = single.norm();
  if (n <= 0) throw std::invalid_argument("single-particle vector has zero norm");
  Eigen::VectorXcd unit = single / n;
  std::size_t dim = spec.dim();
  PureState out;
  out.amplitudes.resize(Eigen::Index(dim));
  for (std::size_t idx = 0; idx < dim; ++idx) {
    std::complex<double> amp = 1.0;
    std::size_t rest = idx;
    for (int j = spec.num_particles - 1; j >= 0; --j) {
      amp *= unit[Eigen::Index(rest % std::size_t(spec.num_sites))];
      rest /= std::size_t(spec.num_sites);
    }
    out.amplitudes[Eigen::Index(idx)] = amp;
  }
  return out;
}

std::vector<int> decode_sites(std::size_t index, int num_particles, int num_sites) {
  std::vector<int> sites(static_cast<std::size_t>(num_particles));
  for (int j = num_particles - 1; j >= 0; --j) {
    sites[std::size_t(j)] = int(index % std::size_t(num_sites));
    index /= std::size_t(num_sites);
  }
  return sites;
}

Eigen::MatrixXcd single_site_shift(const LatticeSpec& spec) {
  int d = spec.num_sites;
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(d, d);
  for (int site = 0; site < d - 1; ++site) s(site + 1, site) = 1.0;
  if (spec.boundary == Boundary::periodic) s(0, d - 1) = 1.0;
  return s;
}

Eigen::MatrixXcd single_site_kinetic(const LatticeSpec& spec) {
  double j = spec.effective_hopping();
  Eigen::MatrixXcd s = single_site_shift(spec);
  Eigen::MatrixXcd k = -j * (s + s.adjoint());
  k += 2.0 * j * Eigen::MatrixXcd::Identity(spec.num_sites, spec.num_sites);
  return k;
}

Eigen::MatrixXcd single_site_momentum(const LatticeSpec& spec) {
  Eigen::MatrixXcd s = single_site_shift(spec);
  return (-kI * spec.hbar / (2.0 * spec.lattice_spacing)) *
         (s - s.adjoint()).eval();
}

Eigen::MatrixXcd embed_single(const Eigen::MatrixXcd& op, int particle,
                              const LatticeSpec& spec) {
  if (particle < 0 || particle >= spec.num_particles)
    throw std::invalid_argument("particle index out of range");
  if (op.rows() != spec.num_sites || op.cols() != spec.num_sites)
    throw std::invalid_argument("single-particle operator must be d x d");
  std::size_t dim = spec.dim();
  int d = spec.num_sites;
  // stride of particle j's site digit in the basis index
  std::size_t stride = 1;
  for (int j = spec.num_particles - 1; j > particle; --j) stride *= std::size_t(d);
  std::size_t block = stride * std::size_t(d);

  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(Eigen::Index(dim), Eigen::Index(dim));
  for (std::size_t base = 0; base < dim; base += block)
    for (std::size_t rest = 0; rest < stride; ++rest)
      for (int row = 0; row < d; ++row)
        for (int col = 0; col < d; ++col) {
          if (op(row, col) == 0.0) continue;
          out(Eigen::Index(base + std::size_t(row) * stride + rest),
              Eigen::Index(base + std::size_t(col) * stride + rest)) = op(row, col);
        }
  return out;
}

Eigen::MatrixXcd build_hamiltonian(const LatticeSpec& spec) {
  spec.validate();
  std::size_t dim = spec.dim();
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(Eigen::Index(dim), Eigen::Index(dim));
  Eigen::MatrixXcd kin = single_site_kinetic(spec);
  for (int j = 0; j < spec.num_particles; ++j) h += embed_single(kin, j, spec);
  if (!spec.pair_potential.empty()) {
    for (std::size_t idx = 0; idx < dim; ++idx) {
      auto sites = decode_sites(idx, spec.num_particles, spec.num_sites);
      double u = 0.0;
      for (int j = 0; j < spec.num_particles; ++j)
        for (int l = j + 1; l < spec.num_particles; ++l)
          u += spec.phi(sites[std::size_t(j)], sites[std::size_t(l)]);
      h(Eigen::Index(idx), Eigen::Index(idx)) += u;
    }
  }
  return h;
}

void WindowV::validate(const LatticeSpec& spec) const {
  if (sites.empty()) throw std::invalid_argument("window site set is empty");
  for (int s : sites)
    if (s < 0 || s >= spec.num_sites)
      throw std::invalid_argument("window site " + std::to_string(s) + " out of range");
  // must be a contiguous run starting at sites.front(), wrapping if periodic
  for (std::size_t i = 1; i < sites.size(); ++i) {
    int expected = sites.front() + int(i);
    if (spec.boundary == Boundary::periodic) expected %= spec.num_sites;
    if (sites[i] != expected)
      throw std::invalid_argument("window sites not contiguous (mod boundary)");
  }
  if (sites.size() > std::size_t(spec.num_sites))
    throw std::invalid_argument("window larger than the lattice");
}

bool WindowV::contains(int site) const {
  for (int s : sites)
    if (s == site) return true;
  return false;
}

namespace {

Eigen::MatrixXcd single_site_window(const LatticeSpec& spec, const WindowV& w) {
  Eigen::MatrixXcd delta = Eigen::MatrixXcd::Zero(spec.num_sites, spec.num_sites);
  for (int s : w.sites) delta(s, s) = 1.0;
  return delta;
}

Eigen::MatrixXcd weyl(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return 0.5 * (a * b + b * a);
}

}  // namespace

Eigen::MatrixXcd build_density_operator(const LatticeSpec& spec,
                                        const DensityOperatorSpec& dspec) {
  spec.validate();
  if (dspec.kind == DensityKind::fourier_number)
    throw std::invalid_argument(
        "fourier_number is a complex density; use build_fourier_density");
  dspec.window.validate(spec);
  std::size_t dim = spec.dim();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(Eigen::Index(dim), Eigen::Index(dim));
  Eigen::MatrixXcd delta = single_site_window(spec, dspec.window);

  switch (dspec.kind) {
    case DensityKind::number:
      for (int j = 0; j < spec.num_particles; ++j)
        out += embed_single(delta, j, spec);
      break;
    case DensityKind::momentum: {
      Eigen::MatrixXcd g = weyl(single_site_momentum(spec), delta);
      for (int j = 0; j < spec.num_particles; ++j) out += embed_single(g, j, spec);
      break;
    }
    case DensityKind::energy: {
      Eigen::MatrixXcd hk = weyl(single_site_kinetic(spec), delta);
      for (int j = 0; j < spec.num_particles; ++j) out += embed_single(hk, j, spec);
      if (!spec.pair_potential.empty()) {
        for (std::size_t idx = 0; idx < dim; ++idx) {
          auto sites = decode_sites(idx, spec.num_particles, spec.num_sites);
          double u = 0.0;
          for (int j = 0; j < spec.num_particles; ++j)
            for (int l = j + 1; l < spec.num_particles; ++l) {
              double pair = spec.phi(sites[std::size_t(j)], sites[std::size_t(l)]);
              if (dspec.pair_assignment == PairAssignment::lower_index) {
                if (dspec.window.contains(sites[std::size_t(j)])) u += pair;
              } else {
                if (dspec.window.contains(sites[std::size_t(j)])) u += 0.5 * pair;
                if (dspec.window.contains(sites[std::size_t(l)])) u += 0.5 * pair;
              }
            }
          out(Eigen::Index(idx), Eigen::Index(idx)) += u;
        }
      }
      break;
    }
    case DensityKind::fourier_number:
      break;  // unreachable
  }
  return out;
}

FourierDensity build_fourier_density(const LatticeSpec& spec, double k) {
  spec.validate();
  double unit = 2.0 * M_PI / (spec.num_sites * spec.lattice_spacing);
  double n_real = k / unit;
  double n_round = std::round(n_real);
  if (std::abs(n_real - n_round) > 1e-9)
    throw std::invalid_argument(
        "wavenumber not lattice-commensurate: k must be 2*pi*n/(d*a)");
  int d = spec.num_sites;
  Eigen::MatrixXcd re1 = Eigen::MatrixXcd::Zero(d, d);
  Eigen::MatrixXcd im1 = Eigen::MatrixXcd::Zero(d, d);
  for (int s = 0; s < d; ++s) {
    double phase = k * spec.lattice_spacing * s;
    re1(s, s) = std::cos(phase);
    im1(s, s) = std::sin(phase);
  }
  std::size_t dim = spec.dim();
  FourierDensity f;
  f.real_part = Eigen::MatrixXcd::Zero(Eigen::Index(dim), Eigen::Index(dim));
  f.imag_part = Eigen::MatrixXcd::Zero(Eigen::Index(dim), Eigen::Index(dim));
  for (int j = 0; j < spec.num_particles; ++j) {
    f.real_part += embed_single(re1, j, spec);
    f.imag_part += embed_single(im1, j, spec);
  }
  return f;
}

double expectation(const PureState& state, const Eigen::MatrixXcd& op) {
  return (state.amplitudes.adjoint() * op * state.amplitudes)(0, 0).real();
}

double variance(const PureState& state, const Eigen::MatrixXcd& op) {
  Eigen::VectorXcd applied = op * state.amplitudes;
  double m2 = applied.squaredNorm();  // <psi|A^2|psi> for Hermitian A
  double m1 = state.amplitudes.dot(applied).real();
  return std::max(0.0, m2 - m1 * m1);
}

double peaking_ratio(const PureState& state, const Eigen::MatrixXcd& op) {
  Eigen::VectorXcd applied = op * state.amplitudes;
  double m2 = applied.squaredNorm();
  double m1 = state.amplitudes.dot(applied).real();
  if (std::abs(m1) <= 1e-14 * (1.0 + std::sqrt(m2)))
    throw std::invalid_argument(
        "peaking ratio undefined for zero-mean operator; use variance()");
  double var = std::max(0.0, m2 - m1 * m1);
  return var / (m1 * m1);
}

}  // namespace dechist::hilbert
