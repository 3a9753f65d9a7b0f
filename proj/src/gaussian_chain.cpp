#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dechist/chain.hpp"
#include "dechist/io.hpp"

namespace dechist::chain {

Eigen::MatrixXd ChainSpec::stiffness() const {
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(num_modes, num_modes);
  double w2 = mass * omega0 * omega0;
  for (int j = 0; j < num_modes; ++j) k(j, j) = w2;
  if (coupling > 0.0 && num_modes > 1) {
    for (int j = 0; j + 1 < num_modes; ++j) {
      k(j, j) += coupling;
      k(j + 1, j + 1) += coupling;
      k(j, j + 1) -= coupling;
      k(j + 1, j) -= coupling;
    }
    if (boundary == Boundary::periodic && num_modes > 2) {
      k(0, 0) += coupling;
      k(num_modes - 1, num_modes - 1) += coupling;
      k(0, num_modes - 1) -= coupling;
      k(num_modes - 1, 0) -= coupling;
    }
  }
  return k;
}

double ChainSpec::equilibrium_at(int j) const {
  if (equilibrium.empty()) return 0.0;
  return equilibrium[std::size_t(j)];
}

void ChainSpec::validate() const {
  if (num_modes < 1) throw std::invalid_argument("num_modes must be >= 1");
  if (!(mass > 0)) throw std::invalid_argument("mass must be > 0");
  if (omega0 < 0) throw std::invalid_argument("omega0 must be >= 0");
  if (coupling < 0) throw std::invalid_argument("coupling must be >= 0");
  if (!(hbar > 0)) throw std::invalid_argument("hbar must be > 0");
  if (!equilibrium.empty() && equilibrium.size() != std::size_t(num_modes))
    throw std::invalid_argument("equilibrium vector length != num_modes");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(stiffness());
  if (solver.eigenvalues().minCoeff() < -1e-12)
    throw std::invalid_argument("indefinite dynamical matrix (runaway mode)");
}

int GaussianState::num_modes() const {
  if (mean.size() % 2 != 0 || cov.rows() != mean.size() || cov.cols() != mean.size())
    throw std::invalid_argument("Gaussian state shape inconsistent");
  return int(mean.size() / 2);
}

void GaussianState::validate(double hbar) const {
  int m = num_modes();
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("covariance not symmetric");
  // Uncertainty relation: Sigma + (i hbar / 2) Omega >= 0 (Hermitian PSD).
  Eigen::MatrixXcd test = cov.cast<std::complex<double>>();
  const std::complex<double> ih2(0.0, 0.5 * hbar);
  for (int j = 0; j < m; ++j) {
    test(j, m + j) += ih2;
    test(m + j, j) -= ih2;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(test);
  double lo = solver.eigenvalues().minCoeff();
  if (lo < -1e-9)
    throw std::invalid_argument("uncertainty relation violated: min eig " +
                                std::to_string(lo));
}

std::string GaussianState::to_csv() const {
  const int n = int(mean.size());
  std::vector<std::string> header;
  header.reserve(std::size_t(n));
  int m = n / 2;
  for (int i = 0; i < n; ++i)
    header.push_back((i < m ? "q" : "p") + std::to_string(i < m ? i : i - m));
  io::CsvWriter csv(header);
  std::vector<std::string> row;
  row.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) row.push_back(io::cell(mean[i]));
  csv.add_row(row);
  for (int r = 0; r < n; ++r) {
    row.clear();
    for (int c = 0; c < n; ++c) row.push_back(io::cell(cov(r, c)));
    csv.add_row(row);
  }
  return csv.str();
}

GaussianState GaussianState::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty Gaussian CSV");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) row.push_back(std::stod(tok));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("Gaussian CSV has no data rows");
  std::size_t n = rows.front().size();
  if (n % 2 != 0 || rows.size() != n + 1)
    throw std::invalid_argument("Gaussian CSV must be mean row + 2M cov rows");
  GaussianState s;
  s.mean.resize(Eigen::Index(n));
  for (std::size_t i = 0; i < n; ++i) s.mean[Eigen::Index(i)] = rows[0][i];
  s.cov.resize(Eigen::Index(n), Eigen::Index(n));
  for (std::size_t r = 0; r < n; ++r) {
    if (rows[r + 1].size() != n)
      throw std::invalid_argument("Gaussian CSV covariance row width mismatch");
    for (std::size_t c = 0; c < n; ++c)
      s.cov(Eigen::Index(r), Eigen::Index(c)) = rows[r + 1][c];
  }
  return s;
}

namespace {

struct NormalModes {
  Eigen::MatrixXd vectors;  // columns
  Eigen::VectorXd omega;    // frequencies >= 0
};

NormalModes decompose(const ChainSpec& spec) {
  spec.validate();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(spec.stiffness() /
                                                        spec.mass);
  NormalModes nm;
  nm.vectors = solver.eigenvectors();
  nm.omega = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return nm;
}

}  // namespace

GaussianState ground_state(const ChainSpec& spec) {
  NormalModes nm = decompose(spec);
  for (int i = 0; i < spec.num_modes; ++i)
    if (nm.omega[i] <= 1e-12)
      throw std::invalid_argument(
          "zero-frequency mode: chain has no normalizable ground state");
  int m = spec.num_modes;
  GaussianState s;
  s.mean = Eigen::VectorXd::Zero(2 * m);
  for (int j = 0; j < m; ++j) s.mean[j] = spec.equilibrium_at(j);
  s.cov = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  Eigen::VectorXd inv_w = nm.omega.cwiseInverse();
  s.cov.topLeftCorner(m, m) =
      (0.5 * spec.hbar / spec.mass) *
      (nm.vectors * inv_w.asDiagonal() * nm.vectors.transpose());
  s.cov.bottomRightCorner(m, m) =
      (0.5 * spec.hbar * spec.mass) *
      (nm.vectors * nm.omega.asDiagonal() * nm.vectors.transpose());
  return s;
}

GaussianState evolve_gaussian(const GaussianState& state, const ChainSpec& spec,
                              double t) {
  state.validate(spec.hbar);
  int m = state.num_modes();
  if (m != spec.num_modes)
    throw std::invalid_argument("state mode count != chain spec");
  NormalModes nm = decompose(spec);

  Eigen::VectorXd cos_wt(m), sin_over(m), msin(m);
  for (int i = 0; i < m; ++i) {
    double w = nm.omega[i];
    cos_wt[i] = std::cos(w * t);
    // sin(wt)/(m w) -> t/m for the free mode
    sin_over[i] = (w > 1e-12) ? std::sin(w * t) / (spec.mass * w) : t / spec.mass;
    msin[i] = spec.mass * w * std::sin(w * t);
  }
  const Eigen::MatrixXd& v = nm.vectors;
  Eigen::MatrixXd s(2 * m, 2 * m);
  s.topLeftCorner(m, m) = v * cos_wt.asDiagonal() * v.transpose();
  s.topRightCorner(m, m) = v * sin_over.asDiagonal() * v.transpose();
  s.bottomLeftCorner(m, m) = -(v * msin.asDiagonal() * v.transpose());
  s.bottomRightCorner(m, m) = s.topLeftCorner(m, m);

  // The propagator acts on displacements from equilibrium.
  Eigen::VectorXd z = state.mean;
  for (int j = 0; j < m; ++j) z[j] -= spec.equilibrium_at(j);
  z = s * z;
  for (int j = 0; j < m; ++j) z[j] += spec.equilibrium_at(j);

  GaussianState out;
  out.mean = z;
  out.cov = s * state.cov * s.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

std::complex<double> char_one_mode(const GaussianState& state, int j, double k) {
  int m = state.num_modes();
  if (j < 0 || j >= m) throw std::invalid_argument("mode index out of range");
  std::complex<double> exponent(-0.5 * k * k * state.cov(j, j),
                                k * state.mean[j]);
  return std::exp(exponent);
}

NkMoments n_k_moments(const GaussianState& state, double k) {
  int m = state.num_modes();
  NkMoments out;
  std::vector<std::complex<double>> w(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    w[std::size_t(j)] = char_one_mode(state, j, k);
    out.mean += w[std::size_t(j)];
  }
  std::complex<double> sum = 0.0;
  for (int j = 0; j < m; ++j)
    for (int l = 0; l < m; ++l)
      sum += w[std::size_t(j)] * std::conj(w[std::size_t(l)]) *
             std::expm1(k * k * state.cov(j, l));
  out.variance = sum.real();
  out.imag_residual = std::abs(sum.imag());
  return out;
}

double small_k_ratio(const GaussianState& state, double k) {
  if (k == 0.0) throw std::invalid_argument("small_k_ratio needs k != 0");
  int m = state.num_modes();
  double dx2 = state.cov.topLeftCorner(m, m).sum();
  if (dx2 <= 0.0)
    throw std::invalid_argument(
        "center-of-mass variance vanishes; ratio undefined");
  return n_k_moments(state, k).variance / (k * k * dx2);
}

CorrelationLengthFit correlation_length(const GaussianState& state,
                                        double spacing) {
  int m = state.num_modes();
  if (m < 4) throw std::invalid_argument("correlation_length needs >= 4 modes");
  if (!(spacing > 0)) throw std::invalid_argument("spacing must be > 0");

  // Mean |cov(q_j, q_l)| at each separation s = |j - l|.
  std::vector<double> mag(std::size_t(m), 0.0);
  std::vector<int> count(std::size_t(m), 0);
  for (int j = 0; j < m; ++j)
    for (int l = 0; l < m; ++l) {
      int s = std::abs(j - l);
      mag[std::size_t(s)] += std::abs(state.cov(j, l));
      count[std::size_t(s)] += 1;
    }
  for (int s = 0; s < m; ++s) mag[std::size_t(s)] /= double(count[std::size_t(s)]);

  CorrelationLengthFit fit;
  double floor = 1e-12 * mag[0];
  std::vector<double> xs, ys;
  for (int s = 1; s < m; ++s) {
    if (mag[std::size_t(s)] <= floor) break;  // below resolvable correlations
    xs.push_back(double(s) * spacing);
    ys.push_back(std::log(mag[std::size_t(s)]));
  }
  if (xs.empty()) {
    fit.degenerate = true;
    return fit;  // length 0: no off-diagonal correlations
  }
  if (xs.size() < 2) {
    fit.no_decay = false;
    fit.length = xs[0];  // single usable separation: only an upper bound
    return fit;
  }
  double n = double(xs.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  double intercept = (sy - slope * sx) / n;
  double rss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double r = ys[i] - (intercept + slope * xs[i]);
    rss += r * r;
  }
  fit.residual = std::sqrt(rss / n);
  if (slope >= 0.0) {
    fit.no_decay = true;
    fit.length = std::numeric_limits<double>::infinity();
  } else {
    fit.length = -1.0 / slope;
  }
  return fit;
}

}  // namespace dechist::chain
