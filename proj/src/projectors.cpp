#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dechist/hilbert.hpp"

namespace dechist::hilbert {

Eigen::Index ProjectorFamily::dim() const {
  return projectors.empty() ? 0 : projectors.front().rows();
}

void ProjectorFamily::validate() const {
  if (projectors.empty()) throw std::invalid_argument("projector family is empty");
  Eigen::Index n = dim();
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t b = 0; b < projectors.size(); ++b) {
    const auto& p = projectors[b];
    if (p.rows() != n || p.cols() != n)
      throw std::invalid_argument("projector dimensions inconsistent");
    if ((p * p - p).cwiseAbs().maxCoeff() > 1e-10)
      throw std::invalid_argument("projector " + std::to_string(b) +
                                  " not idempotent");
    sum += p;
  }
  for (std::size_t b = 0; b < projectors.size(); ++b)
    for (std::size_t c = b + 1; c < projectors.size(); ++c)
      if ((projectors[b] * projectors[c]).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("projectors " + std::to_string(b) + "," +
                                    std::to_string(c) + " not orthogonal");
  if ((sum - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("projector family does not sum to identity");
}

ProjectorFamily spectral_projectors(const Eigen::MatrixXcd& op,
                                    const std::vector<double>& bin_edges,
                                    double cluster_tol) {
  if (op.rows() != op.cols()) throw std::invalid_argument("operator not square");
  if ((op - op.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + op.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("operator not Hermitian");
  if (bin_edges.size() < 2) throw std::invalid_argument("need at least two bin edges");
  for (std::size_t i = 1; i < bin_edges.size(); ++i)
    if (!(bin_edges[i] > bin_edges[i - 1]))
      throw std::invalid_argument("bin edges not strictly increasing");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(op);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigendecomposition failed");
  const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
  const Eigen::MatrixXcd& evecs = solver.eigenvectors();
  Eigen::Index n = op.rows();

  // Cluster numerically degenerate eigenvalues so a level never straddles an
  // edge; the cluster is binned by its mean.
  std::vector<std::pair<double, std::vector<Eigen::Index>>> clusters;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!clusters.empty() &&
        evals[i] - evals[clusters.back().second.back()] <= cluster_tol) {
      clusters.back().second.push_back(i);
    } else {
      clusters.push_back({0.0, {i}});
    }
  }
  for (auto& c : clusters) {
    double mean = 0.0;
    for (Eigen::Index i : c.second) mean += evals[i];
    c.first = mean / double(c.second.size());
  }

  std::size_t bins = bin_edges.size() - 1;
  ProjectorFamily family;
  family.bin_edges = bin_edges;
  family.projectors.assign(bins, Eigen::MatrixXcd::Zero(n, n));
  family.ranks.assign(bins, 0);
  family.empty_bins.assign(bins, true);

  for (const auto& c : clusters) {
    double v = c.first;
    std::size_t bin = bins;  // sentinel
    for (std::size_t b = 0; b < bins; ++b) {
      bool last = (b == bins - 1);
      if (v >= bin_edges[b] && (last ? v <= bin_edges[b + 1] : v < bin_edges[b + 1])) {
        bin = b;
        break;
      }
    }
    if (bin == bins)
      throw std::invalid_argument("eigenvalue " + std::to_string(v) +
                                  " outside all bins");
    for (Eigen::Index i : c.second) {
      family.projectors[bin] += evecs.col(i) * evecs.col(i).adjoint();
      family.ranks[bin] += 1;
    }
    family.empty_bins[bin] = false;
  }
  return family;
}

}  // namespace dechist::hilbert
