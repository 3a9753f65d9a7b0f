#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <stdexcept>

#include "dechist/brownian.hpp"
#include "dechist/chain.hpp"
#include "dechist/experiments.hpp"
#include "dechist/hilbert.hpp"
#include "dechist/io.hpp"
#include "dechist/limits.hpp"
#include "dechist/phase_space.hpp"
#include "dechist/seeding.hpp"

#include <Eigen/Cholesky>

namespace dechist::experiments {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Parameter schemas

struct ParamDesc {
  const char* name;
  const char* type;  // "int" | "number" | "string" | "bool" | "array[number]"
                     // | "array[int]" | "object"
  bool required;
};

struct KindDesc {
  const char* kind;
  const char* description;
  const char* demonstrates;
  bool stochastic;
  std::vector<ParamDesc> params;
};

const std::vector<KindDesc>& kinds() {
  static const std::vector<KindDesc> table = {
      {"conserved_decoherence",
       "Two interacting lattice particles, histories of energy-bin projectors "
       "of the Hamiltonian applied at three times to a superposition of two "
       "energy eigenstates.",
       "Exact decoherence of histories built from a conserved quantity: every "
       "off-diagonal decoherence-functional entry vanishes, and coarse-grained "
       "probabilities obey the sum rules.",
       false,
       {{"num_sites", "int", false},
        {"num_particles", "int", false},
        {"interaction_strength", "number", false},
        {"times", "array[number]", false},
        {"energy_bins", "int", false}}},
      {"coarse_k_scan",
       "Histories of binned Fourier-mode number-density projectors on a "
       "two-particle lattice, scanned over the mode index.",
       "Interference revival away from the conserved k=0 mode: the normalized "
       "off-diagonal maximum is exactly zero at k=0 (superselection) and "
       "generically nonzero for finite k.",
       false,
       {{"num_sites", "int", false},
        {"num_particles", "int", false},
        {"interaction_strength", "number", false},
        {"times", "array[number]", false},
        {"bins", "int", false},
        {"max_k_index", "int", false}}},
      {"peaking_vs_N",
       "Windowed number-density moments of N-fold product states on a "
       "two-site lattice.",
       "Central-limit peaking of product states: the squared relative spread "
       "of the windowed number density falls off as 1/N.",
       false,
       {{"particle_grid", "array[int]", false},
        {"window_weight", "number", false}}},
      {"gaussian_k_scan",
       "Closed-form Fourier-density moments of harmonic-chain ground states, "
       "validated against direct Gaussian sampling.",
       "The Gaussian double-sum variance formula for the smeared number "
       "density: exact zero variance at k=0, quadratic small-k growth set by "
       "the center-of-mass spread, and agreement with Monte Carlo at finite k.",
       true,
       {{"num_modes", "int", false},
        {"mass", "number", false},
        {"omega0", "number", false},
        {"coupling", "number", false},
        {"equilibrium_spacing", "number", false},
        {"k_sigma_grid", "array[number]", false},
        {"mc_k_sigma", "array[number]", false},
        {"mc_samples", "int", false}}},
      {"variance_scaling",
       "Scaling scans of the windowed density variance ratio: Monte Carlo "
       "over particle number, or deterministic quadrature over window volume "
       "with a short-range pair correlation.",
       "Fluctuation scaling of coarse-grained densities: 1/N falloff for "
       "uncorrelated particles and (correlation volume)/(window volume) "
       "falloff for short-range-correlated ones.",
       true,
       {{"mode", "string", true},
        {"dim", "int", true},
        {"box", "number", true},
        {"cells", "int", true},
        {"kernel", "object", false},
        {"particle_grid", "array[int]", false},
        {"volume_grid", "array[number]", false},
        {"num_samples", "int", false},
        {"window_fraction", "number", false},
        {"prefactor_check", "bool", false}}},
      {"diffusion_emergence",
       "Closed-form Brownian moment flow with friction and momentum "
       "diffusion; product number density checked against the diffusion "
       "equation by finite differences.",
       "Emergence of diffusive transport: the position variance grows "
       "linearly at late times and the product-state number density obeys the "
       "diffusion equation to within a residual that shrinks past 1/friction.",
       false,
       {{"mass", "number", false},
        {"friction", "number", false},
        {"momentum_diffusion", "number", false},
        {"initial", "object", false},
        {"fit_points", "int", false},
        {"residual_times_over_gamma", "array[number]", false},
        {"num_particles", "int", false}}},
  };
  return table;
}

const KindDesc& kind_desc(const std::string& kind) {
  for (const auto& k : kinds())
    if (kind == k.kind) return k;
  throw ConfigError("unknown experiment kind '" + kind + "' at $.experiment");
}

bool type_matches(const json& v, const std::string& type) {
  if (type == "int") return v.is_number_integer() || v.is_number_unsigned();
  if (type == "number") return v.is_number();
  if (type == "string") return v.is_string();
  if (type == "bool") return v.is_boolean();
  if (type == "object") return v.is_object();
  if (type == "array[number]") {
    if (!v.is_array()) return false;
    for (const auto& e : v)
      if (!e.is_number()) return false;
    return true;
  }
  if (type == "array[int]") {
    if (!v.is_array()) return false;
    for (const auto& e : v)
      if (!e.is_number_integer() && !e.is_number_unsigned()) return false;
    return true;
  }
  return false;
}

void validate_params(const std::string& kind, const json& params) {
  const KindDesc& desc = kind_desc(kind);
  if (!params.is_object())
    throw ConfigError("$.params must be an object");
  for (auto it = params.begin(); it != params.end(); ++it) {
    const ParamDesc* found = nullptr;
    for (const auto& p : desc.params)
      if (it.key() == p.name) found = &p;
    if (!found)
      throw ConfigError("unknown key $.params." + it.key() + " for kind '" +
                        kind + "'");
    if (!type_matches(it.value(), found->type))
      throw ConfigError("$.params." + it.key() + " must have type " +
                        found->type);
  }
  for (const auto& p : desc.params)
    if (p.required && !params.contains(p.name))
      throw ConfigError("missing required key $.params." + std::string(p.name));
}

// Typed getters with defaults (types were validated above).
int geti(const json& p, const char* k, int dflt) {
  return p.contains(k) ? p.at(k).get<int>() : dflt;
}
double getd(const json& p, const char* k, double dflt) {
  return p.contains(k) ? p.at(k).get<double>() : dflt;
}
bool getb(const json& p, const char* k, bool dflt) {
  return p.contains(k) ? p.at(k).get<bool>() : dflt;
}
std::vector<double> getvd(const json& p, const char* k,
                          std::vector<double> dflt) {
  if (!p.contains(k)) return dflt;
  return p.at(k).get<std::vector<double>>();
}
std::vector<int> getvi(const json& p, const char* k, std::vector<int> dflt) {
  if (!p.contains(k)) return dflt;
  return p.at(k).get<std::vector<int>>();
}

CriterionRow make_row(const std::string& name, double measured, double expected,
                      double tolerance) {
  CriterionRow row;
  row.name = name;
  row.measured = measured;
  row.expected = expected;
  row.tolerance = tolerance;
  row.pass = std::isfinite(measured) &&
             std::abs(measured - expected) <= tolerance;
  return row;
}

void write_artifact(AcceptanceReport& report, const std::string& outdir,
                    const std::string& name, const std::string& content) {
  io::write_text_file(outdir + "/" + name, content);
  report.artifacts.push_back(name);
}

// Equal-width bin edges covering a spectrum; collapses to one bin when the
// spectral range is numerically a point (the trivial family).
std::vector<double> spectrum_edges(const Eigen::VectorXd& evals, int bins) {
  double lo = evals.minCoeff(), hi = evals.maxCoeff();
  if (hi - lo <= 1e-9) return {lo - 0.5, lo + 0.5};
  // Interior edges by formula; the outer edges are pinned to the exact
  // spectral extremes so rounding can never push an eigenvalue outside.
  std::vector<double> edges = {lo};
  for (int b = 1; b < bins; ++b)
    edges.push_back(lo + (hi - lo) * double(b) / double(bins));
  edges.push_back(hi);
  return edges;
}

// ---------------------------------------------------------------------------
// conserved_decoherence

void run_conserved(const ExperimentConfig& config, const std::string& outdir,
                   AcceptanceReport& report) {
  namespace hb = dechist::hilbert;
  const json& p = config.params;
  int d = geti(p, "num_sites", 6);
  int n = geti(p, "num_particles", 2);
  double u = getd(p, "interaction_strength", 0.8);
  std::vector<double> times = getvd(p, "times", {0.7, 1.9, 3.4});
  int bins = geti(p, "energy_bins", 3);

  hb::LatticeSpec spec;
  spec.num_particles = n;
  spec.num_sites = d;
  spec.pair_potential.resize(std::size_t(d));
  for (int r = 0; r < d; ++r)
    spec.pair_potential[std::size_t(r)] = u / (1.0 + spec.separation(0, r));
  Eigen::MatrixXcd h = hb::build_hamiltonian(spec);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
  hb::ProjectorFamily family =
      hb::spectral_projectors(h, spectrum_edges(solver.eigenvalues(), bins));
  hb::HistorySchedule schedule;
  schedule.times = times;
  schedule.families.assign(times.size(), family);

  hb::PureState a, b;
  a.amplitudes = solver.eigenvectors().col(0);
  b.amplitudes = solver.eigenvectors().col(h.rows() - 1);

  hb::DecoherenceMatrix dm =
      hb::conserved_superposition_experiment(spec, h, a, b, schedule);
  dm.validate();
  auto diag = hb::epsilon_decoherence(dm);

  // Coarse-grain by the first-time outcome and check the sum rules.
  std::vector<std::vector<int>> partition(family.size());
  for (std::size_t i = 0; i < dm.labels.size(); ++i)
    partition[std::size_t(dm.labels[i][0])].push_back(int(i));
  partition.erase(std::remove_if(partition.begin(), partition.end(),
                                 [](const auto& c) { return c.empty(); }),
                  partition.end());
  auto sum = hb::probability_sum_check(dm, partition);

  double worst_excess = 0.0;
  for (const auto& cell : sum.cells)
    worst_excess = std::max(worst_excess, cell.residual - cell.offdiag_bound);

  report.rows.push_back(make_row("epsilon_off_diagonal", diag.epsilon, 0.0,
                                 limits::conserved_epsilon));
  report.rows.push_back(make_row("probability_total",
                                 std::abs(sum.total_probability - 1.0), 0.0,
                                 limits::probability_total));
  report.rows.push_back(make_row("sum_rule_residual_excess",
                                 std::max(0.0, worst_excess), 0.0,
                                 limits::sum_rule_slack));
  write_artifact(report, outdir, "decoherence_matrix.csv", dm.to_csv());
}

// ---------------------------------------------------------------------------
// coarse_k_scan

void run_coarse_k(const ExperimentConfig& config, const std::string& outdir,
                  AcceptanceReport& report) {
  namespace hb = dechist::hilbert;
  const json& p = config.params;
  int d = geti(p, "num_sites", 8);
  int n = geti(p, "num_particles", 2);
  double u = getd(p, "interaction_strength", 0.4);
  std::vector<double> times = getvd(p, "times", {0.6, 1.7});
  int bins = geti(p, "bins", 3);
  int max_k = geti(p, "max_k_index", 4);

  hb::LatticeSpec spec;
  spec.num_particles = n;
  spec.num_sites = d;
  spec.pair_potential.resize(std::size_t(d));
  for (int r = 0; r < d; ++r)
    spec.pair_potential[std::size_t(r)] = u / (1.0 + spec.separation(0, r));
  Eigen::MatrixXcd h = hb::build_hamiltonian(spec);

  // Localized single-particle bump, product over particles.
  Eigen::VectorXcd bump(d);
  for (int s = 0; s < d; ++s) {
    double z = (s - 0.5 * d) / (0.25 * d);
    bump[s] = std::exp(-0.5 * z * z);
  }
  hb::PureState psi = hb::product_state(spec, bump);

  io::CsvWriter csv({"k_index", "k", "histories", "epsilon"});
  double eps_at_k0 = -1.0;
  for (int idx = 0; idx <= max_k; ++idx) {
    double k = 2.0 * M_PI * idx / (d * spec.lattice_spacing);
    hb::FourierDensity f = hb::build_fourier_density(spec, k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(f.real_part);
    hb::ProjectorFamily family = hb::spectral_projectors(
        f.real_part, spectrum_edges(solver.eigenvalues(), bins));
    hb::HistorySchedule schedule;
    schedule.times = times;
    schedule.families.assign(times.size(), family);
    hb::DecoherenceMatrix dm = hb::decoherence_functional(psi, schedule, h);
    double eps = hb::epsilon_decoherence(dm).epsilon;
    if (idx == 0) eps_at_k0 = eps;
    csv.add_row({io::cell(idx), io::cell(k), io::cell(dm.labels.size()),
                 io::cell(eps)});
  }
  report.rows.push_back(make_row("epsilon_at_k0", eps_at_k0, 0.0, 0.0));
  write_artifact(report, outdir, "k_scan.csv", csv.str());
}

// ---------------------------------------------------------------------------
// peaking_vs_N

void run_peaking(const ExperimentConfig& config, const std::string& outdir,
                 AcceptanceReport& report) {
  namespace hb = dechist::hilbert;
  const json& p = config.params;
  std::vector<int> grid = getvi(p, "particle_grid", {2, 3, 4, 5, 6, 7, 8});
  double weight = getd(p, "window_weight", 0.65);
  if (!(weight > 0.0) || !(weight < 1.0))
    throw ConfigError("$.params.window_weight must lie in (0,1)");
  if (grid.size() < 4)
    throw ConfigError("$.params.particle_grid needs >= 4 points");

  Eigen::VectorXcd single(2);
  single << std::sqrt(weight), std::sqrt(1.0 - weight);

  io::CsvWriter csv({"N", "ratio", "root_ratio"});
  std::vector<double> xs, ratios;
  for (int n : grid) {
    hb::LatticeSpec spec;
    spec.num_particles = n;
    spec.num_sites = 2;
    hb::PureState psi = hb::product_state(spec, single);
    hb::DensityOperatorSpec dspec;
    dspec.kind = hb::DensityKind::number;
    dspec.window.sites = {0};
    Eigen::MatrixXcd nv = hb::build_density_operator(spec, dspec);
    double ratio = hb::peaking_ratio(psi, nv);
    xs.push_back(double(n));
    ratios.push_back(ratio);
    csv.add_row({io::cell(n), io::cell(ratio), io::cell(std::sqrt(ratio))});
  }
  bool monotone = true;
  for (std::size_t i = 1; i < ratios.size(); ++i)
    if (ratios[i] >= ratios[i - 1]) monotone = false;

  auto fit = phasespace::fit_loglog(xs, ratios,
                                    std::vector<double>(xs.size(), 0.0));
  report.rows.push_back(make_row("ratio_monotone_decreasing",
                                 monotone ? 1.0 : 0.0, 1.0, 0.0));
  report.rows.push_back(make_row("inverse_n_slope", fit.slope,
                                 limits::n_slope_expected, limits::n_slope_tol));
  write_artifact(report, outdir, "peaking.csv", csv.str());
}

// ---------------------------------------------------------------------------
// gaussian_k_scan

void run_gaussian_k(const ExperimentConfig& config, const std::string& outdir,
                    AcceptanceReport& report) {
  namespace ch = dechist::chain;
  const json& p = config.params;
  int m = geti(p, "num_modes", 6);
  double mass = getd(p, "mass", 1.0);
  double omega0 = getd(p, "omega0", 0.9);
  double coupling = getd(p, "coupling", 1.4);
  double spacing = getd(p, "equilibrium_spacing", 0.0);
  std::vector<double> k_sigma =
      getvd(p, "k_sigma_grid",
            {1e-4, 3.16e-4, 1e-3, 2.15e-3, 4.64e-3, 1e-2, 2.15e-2, 4.64e-2, 1e-1});
  std::vector<double> mc_k_sigma =
      getvd(p, "mc_k_sigma", {0.2, 0.35, 0.5, 0.7, 0.9});
  int mc_samples = geti(p, "mc_samples", 200000);
  if (mc_samples < 1000) throw ConfigError("$.params.mc_samples must be >= 1000");

  ch::ChainSpec spec;
  spec.num_modes = m;
  spec.mass = mass;
  spec.omega0 = omega0;
  spec.coupling = coupling;
  for (int j = 0; j < m; ++j) spec.equilibrium.push_back(spacing * j);
  ch::GaussianState gs = ch::ground_state(spec);

  double sigma_ref = 0.0;
  for (int j = 0; j < m; ++j) sigma_ref = std::max(sigma_ref, gs.cov(j, j));
  sigma_ref = std::sqrt(sigma_ref);

  // Scan rows and the small-k law.
  io::CsvWriter csv({"k", "mean_re", "mean_im", "variance", "ratio"});
  std::vector<double> slope_k, slope_dev;
  double tiny_dev = -1.0;
  for (double ks : k_sigma) {
    double k = ks / sigma_ref;
    auto mom = ch::n_k_moments(gs, k);
    double ratio = ch::small_k_ratio(gs, k);
    csv.add_row({io::cell(k), io::cell(mom.mean.real()), io::cell(mom.mean.imag()),
                 io::cell(mom.variance), io::cell(ratio)});
    if (ks >= 1e-3 * (1.0 - 1e-9) && ks <= 1e-1 * (1.0 + 1e-9)) {
      slope_k.push_back(k);
      slope_dev.push_back(std::abs(ratio - 1.0));
    }
    if (std::abs(ks - 1e-4) <= 1e-6) tiny_dev = std::abs(ratio - 1.0);
  }
  if (tiny_dev < 0.0)
    throw ConfigError("$.params.k_sigma_grid must contain the point 1e-4");
  if (slope_k.size() < 4)
    throw ConfigError(
        "$.params.k_sigma_grid needs >= 4 points inside [1e-3, 1e-1]");

  auto mom0 = ch::n_k_moments(gs, 0.0);
  auto fit = phasespace::fit_loglog(slope_k, slope_dev,
                                    std::vector<double>(slope_k.size(), 0.0));

  // Monte Carlo validation of the closed-form variance on two states.
  ch::ChainSpec stiffer = spec;
  stiffer.coupling = coupling * 2.5;
  ch::GaussianState evolved =
      ch::evolve_gaussian(gs, stiffer, 0.7 / std::max(omega0, 0.1));
  std::vector<std::pair<std::string, const ch::GaussianState*>> states = {
      {"ground", &gs}, {"evolved", &evolved}};

  io::CsvWriter mc_csv({"state", "k", "variance_closed", "variance_mc",
                        "std_err", "z"});
  double max_z = 0.0;
  std::size_t pair_index = 0;
  for (auto& [label, state] : states) {
    Eigen::MatrixXd qcov = state->cov.topLeftCorner(m, m);
    Eigen::LLT<Eigen::MatrixXd> llt(qcov);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("position covariance not positive definite");
    Eigen::MatrixXd chol = llt.matrixL();
    double sref = std::sqrt(qcov.diagonal().maxCoeff());

    for (double ks : mc_k_sigma) {
      double k = ks / sref;
      double closed = ch::n_k_moments(*state, k).variance;
      std::mt19937_64 rng = make_engine(config.seed, "nk-mc", pair_index++);
      std::normal_distribution<double> normal(0.0, 1.0);
      // Accumulate |n(k)|^2 and n(k) with a jackknife error on the variance.
      std::vector<double> w(static_cast<std::size_t>(mc_samples));
      std::vector<std::complex<double>> nk(static_cast<std::size_t>(mc_samples));
      Eigen::VectorXd z(m);
      for (int s = 0; s < mc_samples; ++s) {
        for (int j = 0; j < m; ++j) z[j] = normal(rng);
        Eigen::VectorXd q = chol * z;
        std::complex<double> sum = 0.0;
        for (int j = 0; j < m; ++j) {
          double phase = k * (q[j] + state->mean[j]);
          sum += std::complex<double>(std::cos(phase), std::sin(phase));
        }
        nk[std::size_t(s)] = sum;
        w[std::size_t(s)] = std::norm(sum);
      }
      double nn = double(mc_samples);
      double sw = 0.0;
      std::complex<double> sn = 0.0;
      for (int s = 0; s < mc_samples; ++s) {
        sw += w[std::size_t(s)];
        sn += nk[std::size_t(s)];
      }
      double var_mc = sw / nn - std::norm(sn / nn);
      double jk_mean = 0.0;
      std::vector<double> jk(static_cast<std::size_t>(mc_samples));
      for (int s = 0; s < mc_samples; ++s) {
        double wv = (sw - w[std::size_t(s)]) / (nn - 1.0);
        std::complex<double> nv = (sn - nk[std::size_t(s)]) / (nn - 1.0);
        jk[std::size_t(s)] = wv - std::norm(nv);
        jk_mean += jk[std::size_t(s)];
      }
      jk_mean /= nn;
      double acc = 0.0;
      for (double v : jk) acc += (v - jk_mean) * (v - jk_mean);
      double se = std::sqrt((nn - 1.0) / nn * acc);
      double zscore = se > 0.0 ? (var_mc - closed) / se : 0.0;
      max_z = std::max(max_z, std::abs(zscore));
      mc_csv.add_row({label, io::cell(k), io::cell(closed), io::cell(var_mc),
                      io::cell(se), io::cell(zscore)});
    }
  }
  if (pair_index < 10)
    throw ConfigError("$.params.mc_k_sigma must provide >= 10 (state, k) pairs");

  report.rows.push_back(make_row("variance_at_k0", mom0.variance, 0.0, 0.0));
  report.rows.push_back(
      make_row("mean_at_k0_minus_modes", std::abs(mom0.mean - double(m)), 0.0, 0.0));
  report.rows.push_back(make_row("small_k_slope", fit.slope,
                                 limits::small_k_slope_expected,
                                 limits::small_k_slope_tol));
  report.rows.push_back(
      make_row("ratio_deviation_at_tiny_k", tiny_dev, 0.0, limits::tiny_k_ratio_tol));
  report.rows.push_back(make_row("mc_max_z", max_z, 0.0, limits::mc_z_limit));
  write_artifact(report, outdir, "k_scan.csv", csv.str());
  write_artifact(report, outdir, "mc_check.csv", mc_csv.str());
}

// ---------------------------------------------------------------------------
// variance_scaling

phasespace::PairCorrelationModel parse_kernel(const json& k) {
  for (auto it = k.begin(); it != k.end(); ++it) {
    std::string key = it.key();
    if (key != "shape" && key != "amplitude" && key != "correlation_length" &&
        key != "gaussian_sigma_fraction")
      throw ConfigError("unknown key $.params.kernel." + key);
  }
  phasespace::PairCorrelationModel c;
  std::string shape = k.value("shape", "constant");
  if (shape == "constant")
    c.shape = phasespace::KernelShape::constant;
  else if (shape == "triangular")
    c.shape = phasespace::KernelShape::triangular;
  else if (shape == "gaussian_truncated")
    c.shape = phasespace::KernelShape::gaussian_truncated;
  else
    throw ConfigError("$.params.kernel.shape must be constant, triangular, or "
                      "gaussian_truncated");
  if (!k.contains("amplitude") || !k.at("amplitude").is_number())
    throw ConfigError("$.params.kernel.amplitude must be a number");
  if (!k.contains("correlation_length") ||
      !k.at("correlation_length").is_number())
    throw ConfigError("$.params.kernel.correlation_length must be a number");
  c.amplitude = k.at("amplitude").get<double>();
  c.correlation_length = k.at("correlation_length").get<double>();
  c.gaussian_sigma_fraction = k.value("gaussian_sigma_fraction", 0.25);
  c.validate();
  return c;
}

void run_variance_scaling(const ExperimentConfig& config,
                          const std::string& outdir, AcceptanceReport& report) {
  namespace ps = dechist::phasespace;
  const json& p = config.params;
  std::string mode = p.at("mode").get<std::string>();
  int dim = p.at("dim").get<int>();
  double box = p.at("box").get<double>();
  int cells = p.at("cells").get<int>();

  ps::ScalingScanConfig scan;
  scan.p1 = ps::OneParticleDistribution::uniform(dim, box, cells);
  scan.seed = config.seed;
  scan.num_samples = std::size_t(geti(p, "num_samples", 20000));
  if (p.contains("kernel")) scan.pair = parse_kernel(p.at("kernel"));

  if (mode == "particle_count") {
    scan.variable = ps::ScanVariable::particle_count;
    scan.method = ps::ScanMethod::monte_carlo;
    scan.particle_grid =
        getvi(p, "particle_grid", {4, 8, 16, 32, 64, 128, 256, 512});
    double fraction = getd(p, "window_fraction", 0.5);
    if (!(fraction > 0.0) || !(fraction < 1.0))
      throw ConfigError("$.params.window_fraction must lie in (0,1)");
    scan.window = ps::WindowRegion::centered_cube(
        dim, box, box * std::pow(fraction, 1.0 / dim));
    ps::ResultTable table = ps::scaling_scan(scan);
    report.rows.push_back(make_row("inverse_n_slope", table.slope,
                                   limits::n_slope_expected,
                                   limits::n_slope_tol));
    write_artifact(report, outdir, "scan_n.csv", table.to_csv());
  } else if (mode == "window_volume") {
    if (!scan.pair)
      throw ConfigError(
          "missing required key $.params.kernel for window_volume mode");
    scan.variable = ps::ScanVariable::window_volume;
    scan.method = ps::ScanMethod::quadrature;
    scan.volume_grid = getvd(p, "volume_grid", {});
    if (scan.volume_grid.size() < 4)
      throw ConfigError("$.params.volume_grid needs >= 4 entries");
    ps::ResultTable table = ps::scaling_scan(scan);
    report.rows.push_back(make_row("inverse_v_slope", table.slope,
                                   limits::v_slope_expected,
                                   limits::v_slope_tol));
    if (getb(p, "prefactor_check", false)) {
      if (dim != 1 || scan.pair->shape != ps::KernelShape::constant)
        throw ConfigError(
            "$.params.prefactor_check requires dim=1 and a constant kernel");
      // Uncorrelated control: the quadrature functional must vanish.
      ps::WindowRegion mid = ps::WindowRegion::centered_cube(
          dim, box, scan.volume_grid.front());
      double zero =
          ps::variance_ratio_quadrature(scan.p1, std::nullopt, mid, scan.quad);
      report.rows.push_back(make_row("uncorrelated_ratio", std::abs(zero), 0.0,
                                     limits::uncorrelated_ratio));
      // Fitted prefactor at the geometric center of the scan against the
      // analytic correlation-volume integral c0 * 2L.
      double lx = 0.0;
      for (double v : table.x) lx += std::log(v);
      lx /= double(table.x.size());
      double a_eff =
          std::exp(table.intercept + table.slope * lx) * std::exp(lx);
      double analytic =
          scan.pair->amplitude * 2.0 * scan.pair->correlation_length;
      report.rows.push_back(make_row("constant_kernel_prefactor_rel_err",
                                     std::abs(a_eff / analytic - 1.0), 0.0,
                                     limits::prefactor_rel_tol));
    }
    write_artifact(report, outdir, "scan_v.csv", table.to_csv());
  } else {
    throw ConfigError(
        "$.params.mode must be particle_count or window_volume");
  }
}

// ---------------------------------------------------------------------------
// diffusion_emergence

void run_diffusion(const ExperimentConfig& config, const std::string& outdir,
                   AcceptanceReport& report) {
  namespace br = dechist::brownian;
  const json& p = config.params;
  br::BrownianParams params;
  params.mass = getd(p, "mass", 1.0);
  params.friction = getd(p, "friction", 0.8);
  params.momentum_diffusion = getd(p, "momentum_diffusion", 0.9);
  params.validate();
  double g = params.friction;

  br::OneParticleGaussian initial;
  initial.mean_q = 0.0;
  initial.mean_p = 2.0;
  initial.var_qq = 1.0;
  initial.cov_qp = 0.0;
  initial.var_pp = params.momentum_diffusion / params.friction;
  if (p.contains("initial")) {
    const json& init = p.at("initial");
    for (auto it = init.begin(); it != init.end(); ++it) {
      std::string key = it.key();
      if (key != "mean_q" && key != "mean_p" && key != "var_qq" &&
          key != "cov_qp" && key != "var_pp")
        throw ConfigError("unknown key $.params.initial." + key);
      if (!it.value().is_number())
        throw ConfigError("$.params.initial." + key + " must be a number");
    }
    initial.mean_q = init.value("mean_q", initial.mean_q);
    initial.mean_p = init.value("mean_p", initial.mean_p);
    initial.var_qq = init.value("var_qq", initial.var_qq);
    initial.cov_qp = init.value("cov_qp", initial.cov_qp);
    initial.var_pp = init.value("var_pp", initial.var_pp);
  }
  initial.validate();

  int fit_points = geti(p, "fit_points", 12);
  if (fit_points < 4) throw ConfigError("$.params.fit_points must be >= 4");
  std::vector<double> fit_grid;
  for (int i = 0; i < fit_points; ++i)
    fit_grid.push_back((10.0 + 90.0 * double(i) / double(fit_points - 1)) / g);
  br::DiffusionFit fit = br::diffusion_constant_fit(initial, params, fit_grid);
  double d_closed = br::diffusion_constant_closed_form(params);

  std::vector<double> times_over_gamma =
      getvd(p, "residual_times_over_gamma", {0.1, 0.3, 1.0, 3.0, 10.0, 50.0});
  bool has_ten = false;
  for (double t : times_over_gamma)
    if (std::abs(t - 10.0) < 1e-9) has_ten = true;
  if (!has_ten)
    throw ConfigError(
        "$.params.residual_times_over_gamma must include the point 10");
  std::vector<double> t_grid;
  for (double t : times_over_gamma) t_grid.push_back(t / g);

  // x grid sized to resolve the narrowest and cover the widest Gaussian.
  double sigma_min = 1e300, sigma_max = 0.0, q_lo = 0.0, q_hi = 0.0;
  for (double t : t_grid) {
    auto s = br::evolve_moments(initial, params, t);
    sigma_min = std::min(sigma_min, std::sqrt(s.var_qq));
    sigma_max = std::max(sigma_max, std::sqrt(s.var_qq));
    q_lo = std::min(q_lo, s.mean_q);
    q_hi = std::max(q_hi, s.mean_q);
  }
  double dx = sigma_min / 8.0;
  double lo = q_lo - 8.0 * sigma_max, hi = q_hi + 8.0 * sigma_max;
  std::vector<double> x_grid;
  for (double x = lo; x <= hi; x += dx) x_grid.push_back(x);

  int n_particles = geti(p, "num_particles", 3);
  auto residual_report = br::product_density_check(initial, params, n_particles,
                                                   x_grid, t_grid, fit.d_fit);

  double res_at_10 = -1.0;
  io::CsvWriter csv({"t", "sigma_qq", "sigma_qp", "sigma_pp", "residual"});
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    auto s = br::evolve_moments(initial, params, t_grid[i]);
    csv.add_row({io::cell(t_grid[i]), io::cell(s.var_qq), io::cell(s.cov_qp),
                 io::cell(s.var_pp), io::cell(residual_report.residuals[i])});
    if (std::abs(times_over_gamma[i] - 10.0) < 1e-9)
      res_at_10 = residual_report.residuals[i];
  }

  report.rows.push_back(make_row("d_fit_rel_err",
                                 std::abs(fit.d_fit / d_closed - 1.0), 0.0,
                                 limits::d_fit_rel_tol));
  report.rows.push_back(make_row("fit_linearity_residual", fit.residual, 0.0,
                                 limits::fit_linearity_tol));
  report.rows.push_back(make_row("residual_at_10_over_gamma", res_at_10, 0.0,
                                 limits::late_residual_tol));
  report.rows.push_back(make_row("residual_monotone_decreasing",
                                 residual_report.monotone_decreasing ? 1.0 : 0.0,
                                 1.0, 0.0));
  write_artifact(report, outdir, "diffusion.csv", csv.str());
}

}  // namespace

// ---------------------------------------------------------------------------
// Public API

json ExperimentConfig::to_json() const {
  json j;
  // Echo only the experiment definition: where artifacts land is a runtime
  // concern and must not change artifact bytes (or the config hash).
  j["experiment"] = kind;
  j["params"] = params.is_object() ? params : json::object();
  if (has_seed) j["seed"] = seed;
  return j;
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::string key = it.key();
    if (key != "experiment" && key != "params" && key != "seed" &&
        key != "output_dir")
      throw ConfigError("unknown key $." + key);
  }
  if (!j.contains("experiment") || !j.at("experiment").is_string())
    throw ConfigError("missing or non-string key $.experiment");
  ExperimentConfig config;
  config.kind = j.at("experiment").get<std::string>();
  const KindDesc& desc = kind_desc(config.kind);

  config.params = j.value("params", json::object());
  validate_params(config.kind, config.params);

  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_integer() && !s.is_number_unsigned())
      throw ConfigError("$.seed must be an integer");
    if (s.is_number_integer() && s.get<long long>() < 0)
      throw ConfigError("$.seed must be nonnegative");
    config.seed = s.get<std::uint64_t>();
    config.has_seed = true;
  } else if (desc.stochastic) {
    throw ConfigError("missing key $.seed (required for stochastic kind '" +
                      config.kind + "')");
  }
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string())
      throw ConfigError("$.output_dir must be a string");
    config.output_dir = j.at("output_dir").get<std::string>();
  }
  return config;
}

ExperimentConfig load_config_file(const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_config(j);
}

json AcceptanceReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows)
    rows_json.push_back({{"name", r.name},
                         {"measured", r.measured},
                         {"expected", r.expected},
                         {"tolerance", r.tolerance},
                         {"pass", r.pass}});
  return json{{"experiment", experiment}, {"version", version},
              {"config_hash", config_hash}, {"pass", pass},
              {"rows", rows_json},          {"artifacts", artifacts}};
}

std::string version_string() { return "dechist 0.1.0"; }

AcceptanceReport run(const ExperimentConfig& config) {
  const KindDesc& desc = kind_desc(config.kind);
  std::string outdir = config.output_dir.empty() ? "." : config.output_dir;
  std::filesystem::create_directories(outdir);

  AcceptanceReport report;
  report.experiment = config.kind;
  report.version = version_string();
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a(config.to_json().dump())));
  report.config_hash = hash;

  io::write_text_file(outdir + "/config.json", config.to_json().dump(2) + "\n");
  report.artifacts.push_back("config.json");

  if (config.kind == "conserved_decoherence")
    run_conserved(config, outdir, report);
  else if (config.kind == "coarse_k_scan")
    run_coarse_k(config, outdir, report);
  else if (config.kind == "peaking_vs_N")
    run_peaking(config, outdir, report);
  else if (config.kind == "gaussian_k_scan")
    run_gaussian_k(config, outdir, report);
  else if (config.kind == "variance_scaling")
    run_variance_scaling(config, outdir, report);
  else if (config.kind == "diffusion_emergence")
    run_diffusion(config, outdir, report);
  else
    throw ConfigError("unknown experiment kind '" + config.kind + "'");
  (void)desc;

  report.pass = !report.rows.empty();
  for (const auto& r : report.rows) report.pass = report.pass && r.pass;
  io::write_text_file(outdir + "/report.json", report.to_json().dump(2) + "\n");
  report.artifacts.push_back("report.json");
  return report;
}

const std::vector<CatalogEntry>& catalog() {
  static const std::vector<CatalogEntry> entries = [] {
    std::vector<CatalogEntry> out;
    for (const auto& k : kinds()) {
      CatalogEntry e;
      e.kind = k.kind;
      e.description = k.description;
      e.demonstrates = k.demonstrates;
      e.stochastic = k.stochastic;
      json schema = json::object();
      for (const auto& p : k.params)
        schema[p.name] = std::string(p.type) + (p.required ? " (required)" : "");
      e.parameter_schema = schema;
      out.push_back(std::move(e));
    }
    return out;
  }();
  return entries;
}

json catalog_json() {
  json out = json::array();
  for (const auto& e : catalog())
    out.push_back({{"kind", e.kind},
                   {"description", e.description},
                   {"demonstrates", e.demonstrates},
                   {"stochastic", e.stochastic},
                   {"params", e.parameter_schema}});
  return out;
}

std::string catalog_text() {
  std::string out;
  for (const auto& e : catalog()) {
    out += e.kind + (e.stochastic ? "  [seeded]" : "") + "\n";
    out += "  " + e.description + "\n";
    out += "  demonstrates: " + e.demonstrates + "\n";
    out += "  params:";
    for (auto it = e.parameter_schema.begin(); it != e.parameter_schema.end(); ++it)
      out += " " + it.key();
    out += "\n\n";
  }
  return out;
}

}  // namespace dechist::experiments
