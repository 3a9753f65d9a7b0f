#include <cmath>
#include <stdexcept>

#include "dechist/hilbert.hpp"
#include "dechist/io.hpp"

namespace dechist::hilbert {

namespace {
constexpr std::complex<double> kI{0.0, 1.0};

// Unitary steps via one eigendecomposition of H, reused for every interval.
class Propagator {
 public:
  explicit Propagator(const Eigen::MatrixXcd& hamiltonian, double hbar)
      : hbar_(hbar), solver_(hamiltonian) {
    if (solver_.info() != Eigen::Success)
      throw std::runtime_error("eigendecomposition of the Hamiltonian failed");
  }
  Eigen::MatrixXcd unitary(double dt) const {
    const Eigen::VectorXd& w = solver_.eigenvalues();
    Eigen::VectorXcd phases(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i)
      phases[i] = std::exp(-kI * w[i] * dt / hbar_);
    return solver_.eigenvectors() * phases.asDiagonal() *
           solver_.eigenvectors().adjoint();
  }

 private:
  double hbar_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver_;
};

}  // namespace

std::size_t HistorySchedule::num_strings() const {
  std::size_t n = 1;
  for (const auto& f : families) {
    if (f.size() == 0) throw std::invalid_argument("empty projector family");
    if (n > max_strings / f.size() + 1) return max_strings + 1;  // saturate
    n *= f.size();
  }
  return n;
}

void HistorySchedule::validate() const {
  if (times.empty()) throw std::invalid_argument("schedule needs at least one time");
  if (times.size() != families.size())
    throw std::invalid_argument("times and families length mismatch");
  if (times.front() < 0.0) throw std::invalid_argument("times must be >= 0");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("times not strictly increasing");
  Eigen::Index n = families.front().dim();
  for (const auto& f : families) {
    if (f.dim() != n)
      throw std::invalid_argument("projector families act on different dimensions");
  }
  if (num_strings() > max_strings)
    throw std::invalid_argument("history-string count exceeds cap " +
                                std::to_string(max_strings));
}

void DecoherenceMatrix::validate() const {
  Eigen::Index n = entries.rows();
  if (entries.cols() != n || std::size_t(n) != labels.size())
    throw std::invalid_argument("decoherence matrix shape/label mismatch");
  if ((entries - entries.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("decoherence matrix not Hermitian");
  double trace = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = entries(i, i).real();
    if (p < -1e-12)
      throw std::invalid_argument("negative diagonal entry " + std::to_string(p));
    trace += p;
  }
  if (std::abs(trace - 1.0) > 1e-10)
    throw std::invalid_argument("diagonal sums to " + std::to_string(trace) +
                                ", expected 1");
}

std::string DecoherenceMatrix::label_string(int index, char sep) const {
  const auto& tuple = labels[std::size_t(index)];
  std::string out;
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(tuple[i]);
  }
  return out;
}

std::string DecoherenceMatrix::to_csv() const {
  io::CsvWriter csv({"alpha", "alpha_prime", "re", "im"});
  for (Eigen::Index i = 0; i < entries.rows(); ++i)
    for (Eigen::Index j = 0; j < entries.cols(); ++j)
      csv.add_row({label_string(int(i)), label_string(int(j)),
                   io::cell(entries(i, j).real()), io::cell(entries(i, j).imag())});
  return csv.str();
}

PureState evolve(const PureState& state, const Eigen::MatrixXcd& hamiltonian,
                 double dt, double hbar) {
  state.validate();
  Propagator prop(hamiltonian, hbar);
  PureState out;
  out.amplitudes = prop.unitary(dt) * state.amplitudes;
  return out;
}

DecoherenceMatrix decoherence_functional(const PureState& initial,
                                         const HistorySchedule& schedule,
                                         const Eigen::MatrixXcd& hamiltonian,
                                         double hbar) {
  initial.validate();
  schedule.validate();
  if (hamiltonian.rows() != initial.amplitudes.size())
    throw std::invalid_argument("Hamiltonian dimension != state dimension");
  if (schedule.families.front().dim() != initial.amplitudes.size())
    throw std::invalid_argument("projector dimension != state dimension");

  Propagator prop(hamiltonian, hbar);

  // Leaves of the history prefix tree: each branch evolved once per interval,
  // then split by the time's projector family. Order is lexicographic in the
  // bin tuple (earliest time most significant).
  std::vector<Eigen::VectorXcd> branches{initial.amplitudes};
  std::vector<std::vector<int>> labels{{}};
  double prev_time = 0.0;
  for (std::size_t step = 0; step < schedule.times.size(); ++step) {
    double dt = schedule.times[step] - prev_time;
    prev_time = schedule.times[step];
    if (dt != 0.0) {
      Eigen::MatrixXcd u = prop.unitary(dt);
      for (auto& b : branches) b = u * b;
    }
    const ProjectorFamily& family = schedule.families[step];
    std::vector<Eigen::VectorXcd> next;
    std::vector<std::vector<int>> next_labels;
    next.reserve(branches.size() * family.size());
    next_labels.reserve(branches.size() * family.size());
    for (std::size_t i = 0; i < branches.size(); ++i)
      for (std::size_t bin = 0; bin < family.size(); ++bin) {
        next.push_back(family.projectors[bin] * branches[i]);
        next_labels.push_back(labels[i]);
        next_labels.back().push_back(int(bin));
      }
    branches = std::move(next);
    labels = std::move(next_labels);
  }

  Eigen::Index n = Eigen::Index(branches.size());
  Eigen::MatrixXcd stacked(initial.amplitudes.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) stacked.col(i) = branches[std::size_t(i)];

  DecoherenceMatrix out;
  // D(a, a') = <phi_{a'} | phi_a> = (B^dag B)(a', a)
  out.entries = (stacked.adjoint() * stacked).transpose();
  out.labels = std::move(labels);
  return out;
}

CoherenceDiagnostic epsilon_decoherence(const DecoherenceMatrix& d) {
  CoherenceDiagnostic diag;
  Eigen::Index n = d.entries.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      double pi = d.entries(i, i).real();
      double pj = d.entries(j, j).real();
      if (pi < 1e-14 || pj < 1e-14) continue;
      double eps = std::abs(d.entries(i, j)) / std::sqrt(pi * pj);
      if (eps > diag.epsilon) {
        diag.epsilon = eps;
        diag.worst_row = int(i);
        diag.worst_col = int(j);
      }
    }
  if (diag.worst_row >= 0) {
    diag.worst_row_label = d.labels[std::size_t(diag.worst_row)];
    diag.worst_col_label = d.labels[std::size_t(diag.worst_col)];
  }
  return diag;
}

SumRuleReport probability_sum_check(const DecoherenceMatrix& d,
                                    const std::vector<std::vector<int>>& partition) {
  Eigen::Index n = d.entries.rows();
  std::vector<int> seen(std::size_t(n), 0);
  for (const auto& cell : partition)
    for (int m : cell) {
      if (m < 0 || m >= int(n))
        throw std::invalid_argument("partition member out of range");
      seen[std::size_t(m)] += 1;
    }
  for (Eigen::Index i = 0; i < n; ++i)
    if (seen[std::size_t(i)] != 1)
      throw std::invalid_argument("partition must cover every history exactly once");

  SumRuleReport report;
  for (const auto& cell : partition) {
    SumRuleCell c;
    c.members = cell;
    // p(cell) = || sum of branch states ||^2 = sum of the cell's D block
    std::complex<double> block = 0.0;
    for (int i : cell)
      for (int j : cell) block += d.entries(i, j);
    c.cell_probability = block.real();
    for (int i : cell) c.member_sum += d.entries(i, i).real();
    c.residual = std::abs(c.cell_probability - c.member_sum);
    for (std::size_t a = 0; a < cell.size(); ++a)
      for (std::size_t b = a + 1; b < cell.size(); ++b)
        c.offdiag_bound += 2.0 * std::abs(d.entries(cell[a], cell[b]));
    c.bounded = c.residual <= c.offdiag_bound + 1e-12;
    report.total_probability += c.cell_probability;
    report.max_residual = std::max(report.max_residual, c.residual);
    report.all_bounded = report.all_bounded && c.bounded;
    report.cells.push_back(std::move(c));
  }
  return report;
}

DecoherenceMatrix conserved_superposition_experiment(
    const LatticeSpec& spec, const Eigen::MatrixXcd& conserved_q,
    const PureState& a_state, const PureState& b_state,
    const HistorySchedule& schedule) {
  a_state.validate();
  b_state.validate();
  Eigen::MatrixXcd hamiltonian = build_hamiltonian(spec);

  double overlap = std::abs(a_state.amplitudes.dot(b_state.amplitudes));
  if (overlap > 1e-12)
    throw std::invalid_argument("branch states not orthogonal: |<a|b>| = " +
                                std::to_string(overlap));
  auto eigen_residual = [&](const PureState& s) {
    Eigen::VectorXcd applied = conserved_q * s.amplitudes;
    std::complex<double> value = s.amplitudes.dot(applied);
    return (applied - value * s.amplitudes).norm();
  };
  double res_a = eigen_residual(a_state);
  if (res_a > 1e-10)
    throw std::invalid_argument("a_state not a Q eigenstate: residual " +
                                std::to_string(res_a));
  double res_b = eigen_residual(b_state);
  if (res_b > 1e-10)
    throw std::invalid_argument("b_state not a Q eigenstate: residual " +
                                std::to_string(res_b));
  double comm =
      (conserved_q * hamiltonian - hamiltonian * conserved_q).cwiseAbs().maxCoeff();
  if (comm > 1e-12)
    throw std::invalid_argument("[Q,H] max entry " + std::to_string(comm) +
                                " exceeds 1e-12: Q not conserved");
  for (const auto& family : schedule.families)
    for (const auto& p : family.projectors) {
      double pc = (p * conserved_q - conserved_q * p).cwiseAbs().maxCoeff();
      if (pc > 1e-9)
        throw std::invalid_argument(
            "schedule projector does not commute with Q: max entry " +
            std::to_string(pc));
    }

  PureState superposition;
  superposition.amplitudes =
      (a_state.amplitudes + b_state.amplitudes) / std::sqrt(2.0);
  return decoherence_functional(superposition, schedule, hamiltonian, spec.hbar);
}

}  // namespace dechist::hilbert
