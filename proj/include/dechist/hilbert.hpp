#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

// Exact finite-dimensional engine for N distinguishable particles on a 1-D
// lattice: Hamiltonians, windowed density operators, spectral projector
// families, unitary evolution, and multi-time decoherence functionals.

namespace dechist::hilbert {

enum class Boundary { periodic, open };

struct LatticeSpec {
  int num_particles = 1;
  int num_sites = 2;
  double lattice_spacing = 1.0;
  double mass = 1.0;
  double hopping = -1.0;  // < 0 means "use hbar^2/(2 m a^2)"
  // Pair energy tabulated by site separation: phi[r] for r = 0..num_sites-1.
  // Periodic chains read phi[(s_l - s_j) mod d] and must have phi[r] == phi[d-r];
  // open chains read phi[|s_l - s_j|]. Empty vector = no interaction.
  std::vector<double> pair_potential;
  Boundary boundary = Boundary::periodic;
  double hbar = 1.0;
  std::size_t max_dim = std::size_t(1) << 16;

  std::size_t dim() const;
  double effective_hopping() const;
  int separation(int site_a, int site_b) const;  // 0..d-1 (periodic: min image)
  double phi(int site_a, int site_b) const;
  void validate() const;
};

struct PureState {
  // Product basis, particle-major site-minor: index = sum_j s_j d^(N-1-j).
  Eigen::VectorXcd amplitudes;
  void validate() const;  // unit norm within 1e-12
};

// |psi>^{(x) N} for a single-particle vector of length d.
PureState product_state(const LatticeSpec& spec, const Eigen::VectorXcd& single);

std::vector<int> decode_sites(std::size_t index, int num_particles, int num_sites);

Eigen::MatrixXcd single_site_shift(const LatticeSpec& spec);
Eigen::MatrixXcd single_site_kinetic(const LatticeSpec& spec);
Eigen::MatrixXcd single_site_momentum(const LatticeSpec& spec);

// Embed a one-particle operator on particle j of N (identity elsewhere).
Eigen::MatrixXcd embed_single(const Eigen::MatrixXcd& op, int particle,
                              const LatticeSpec& spec);

Eigen::MatrixXcd build_hamiltonian(const LatticeSpec& spec);

struct WindowV {
  std::vector<int> sites;  // contiguous run of sites (mod d when periodic)
  void validate(const LatticeSpec& spec) const;
  bool contains(int site) const;
};

enum class DensityKind { number, momentum, energy, fourier_number };
enum class PairAssignment { lower_index, split_half };

struct DensityOperatorSpec {
  DensityKind kind = DensityKind::number;
  WindowV window;          // number / momentum / energy
  double wavenumber = 0.0; // fourier_number: k = 2 pi n / (d a)
  PairAssignment pair_assignment = PairAssignment::lower_index;
};

Eigen::MatrixXcd build_density_operator(const LatticeSpec& spec,
                                        const DensityOperatorSpec& dspec);

// Hermitian real/imaginary parts of n(k) = sum_j e^{i k q_j}.
struct FourierDensity {
  Eigen::MatrixXcd real_part;
  Eigen::MatrixXcd imag_part;
};
FourierDensity build_fourier_density(const LatticeSpec& spec, double k);

struct ProjectorFamily {
  std::vector<Eigen::MatrixXcd> projectors;  // one per bin
  std::vector<double> bin_edges;
  std::vector<int> ranks;
  std::vector<bool> empty_bins;
  std::size_t size() const { return projectors.size(); }
  Eigen::Index dim() const;
  void validate() const;  // idempotent, orthogonal, complete (1e-10)
};

// Bin the spectral decomposition of a Hermitian operator. Bins are
// [e_i, e_{i+1}) except the last, which is closed; eigenvalues clustered
// within cluster_tol share a bin (degenerate levels never straddle edges).
ProjectorFamily spectral_projectors(const Eigen::MatrixXcd& op,
                                    const std::vector<double>& bin_edges,
                                    double cluster_tol = 1e-9);

struct HistorySchedule {
  std::vector<double> times;  // strictly increasing, t >= 0; evolution starts at 0
  std::vector<ProjectorFamily> families;
  std::size_t max_strings = 10000;
  std::size_t num_strings() const;
  void validate() const;
};

struct DecoherenceMatrix {
  Eigen::MatrixXcd entries;              // D(alpha, alpha') by string index
  std::vector<std::vector<int>> labels;  // bin tuple per string, lexicographic
  void validate() const;  // Hermitian 1e-12, diag >= -1e-12, trace 1 within 1e-10
  std::string label_string(int index, char sep = ';') const;
  std::string to_csv() const;  // columns: alpha,alpha_prime,re,im
};

// Exact unitary step via eigendecomposition of H.
PureState evolve(const PureState& state, const Eigen::MatrixXcd& hamiltonian,
                 double dt, double hbar = 1.0);

// D(a,a') = <Psi| C_{a'}^dag C_a |Psi>, C_a = P_{a_n} U(t_n,t_{n-1}) ... P_{a_1} U(t_1,0).
// Branch states are propagated down a prefix tree; operator products are never formed.
DecoherenceMatrix decoherence_functional(const PureState& initial,
                                         const HistorySchedule& schedule,
                                         const Eigen::MatrixXcd& hamiltonian,
                                         double hbar = 1.0);

struct CoherenceDiagnostic {
  double epsilon = 0.0;  // max normalized off-diagonal magnitude
  int worst_row = -1;
  int worst_col = -1;
  std::vector<int> worst_row_label, worst_col_label;
};
CoherenceDiagnostic epsilon_decoherence(const DecoherenceMatrix& d);

struct SumRuleCell {
  std::vector<int> members;
  double cell_probability = 0.0;  // from the summed branch state
  double member_sum = 0.0;        // sum of fine-grained diagonals
  double residual = 0.0;          // |cell_probability - member_sum|
  double offdiag_bound = 0.0;     // 2 * sum of in-cell off-diagonal magnitudes
  bool bounded = true;            // residual <= offdiag_bound + 1e-12
};
struct SumRuleReport {
  std::vector<SumRuleCell> cells;
  double total_probability = 0.0;
  double max_residual = 0.0;
  bool all_bounded = true;
};
SumRuleReport probability_sum_check(const DecoherenceMatrix& d,
                                    const std::vector<std::vector<int>>& partition);

// |Psi> = (|a> + |b>)/sqrt(2) with a,b orthogonal eigenstates of a conserved Q;
// every off-diagonal of the result vanishes (superselection). Preconditions are
// checked and reported with the violating norm.
DecoherenceMatrix conserved_superposition_experiment(
    const LatticeSpec& spec, const Eigen::MatrixXcd& conserved_q,
    const PureState& a_state, const PureState& b_state,
    const HistorySchedule& schedule);

double expectation(const PureState& state, const Eigen::MatrixXcd& op);
double variance(const PureState& state, const Eigen::MatrixXcd& op);
// (Delta Q)^2 / <Q>^2; throws if <Q> is consistent with zero.
double peaking_ratio(const PureState& state, const Eigen::MatrixXcd& op);

}  // namespace dechist::hilbert
