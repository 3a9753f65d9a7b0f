// Acceptance battery: nine gate criteria, one printed line each, exit 0 only
// if every line passes. Usage: acceptance <configs_dir> <scratch_dir>
//
//   1 conserved-quantity decoherence        (canonical config, < 10 s)
//   2 decoherence functional vs chain oracle (20 randomized instances, < 60 s)
//   3 probability sum rules on those instances
//   4 1/N peaking scaling                    (Monte Carlo, < 2 min)
//   5 1/V correlation-volume scaling         (quadrature 1-D & 3-D, < 5 min)
//   6 Gaussian-chain variance vs Monte Carlo (>= 10 state/k pairs, 3 sigma)
//   7 small-k quadratic limit
//   8 diffusion-equation emergence           (< 10 s)
//   9 byte-identical rerun of the whole battery

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dechist/experiments.hpp"
#include "dechist/hilbert.hpp"
#include "dechist/io.hpp"
#include "dechist/limits.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
namespace ex = dechist::experiments;
namespace hb = dechist::hilbert;
namespace lm = dechist::limits;

namespace {

int g_criterion = 0;
bool g_all_pass = true;

void line(const std::string& name, bool pass, const std::string& detail) {
  ++g_criterion;
  std::printf("[%d/9] %s: %s (%s)\n", g_criterion, name.c_str(),
              pass ? "PASS" : "FAIL", detail.c_str());
  g_all_pass = g_all_pass && pass;
}

std::string fmt(double x) { return dechist::io::format_double(x); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

ex::AcceptanceReport run_config(const fs::path& config_path, const fs::path& outdir) {
  ex::ExperimentConfig config = ex::load_config_file(config_path.string());
  config.output_dir = outdir.string();
  return ex::run(config);
}

const ex::CriterionRow& row(const ex::AcceptanceReport& report,
                            const std::string& name) {
  for (const auto& r : report.rows)
    if (r.name == name) return r;
  throw std::runtime_error("report row missing: " + name);
}

std::size_t csv_data_rows(const fs::path& file) {
  std::string text = dechist::io::read_text_file(file.string());
  std::size_t lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines > 0 ? lines - 1 : 0;  // minus header
}

// ---------------------------------------------------------------------------
// Randomized instances for the oracle battery (criteria 2 and 3).

struct Instance {
  hb::LatticeSpec spec;
  hb::PureState psi;
  hb::HistorySchedule schedule;
};

hb::ProjectorFamily random_family(std::mt19937_64& rng, const hb::LatticeSpec& spec) {
  std::uniform_int_distribution<int> op_pick(0, 3);
  std::uniform_int_distribution<int> len_pick(1, spec.num_sites - 1);
  std::uniform_int_distribution<int> start_pick(0, spec.num_sites - 1);
  std::uniform_int_distribution<int> bins_pick(2, 3);

  Eigen::MatrixXcd op;
  int kind = op_pick(rng);
  if (kind == 3 && spec.num_sites >= 3) {
    std::uniform_int_distribution<int> n_pick(1, spec.num_sites - 1);
    double k = 2.0 * M_PI * n_pick(rng) /
               (spec.num_sites * spec.lattice_spacing);
    hb::FourierDensity f = hb::build_fourier_density(spec, k);
    op = (rng() & 1) ? f.real_part : f.imag_part;
  } else {
    hb::DensityOperatorSpec dspec;
    dspec.kind = kind == 1 ? hb::DensityKind::momentum
                           : (kind == 2 ? hb::DensityKind::energy
                                        : hb::DensityKind::number);
    int len = len_pick(rng);
    int start = spec.boundary == hb::Boundary::periodic
                    ? start_pick(rng)
                    : std::uniform_int_distribution<int>(
                          0, spec.num_sites - len)(rng);
    for (int i = 0; i < len; ++i)
      dspec.window.sites.push_back(
          spec.boundary == hb::Boundary::periodic
              ? (start + i) % spec.num_sites
              : start + i);
    dspec.pair_assignment = (rng() & 1) ? hb::PairAssignment::lower_index
                                        : hb::PairAssignment::split_half;
    op = hb::build_density_operator(spec, dspec);
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(op);
  double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  if (hi - lo <= 1e-9) return hb::spectral_projectors(op, {lo - 0.5, lo + 0.5});
  int bins = bins_pick(rng);
  std::vector<double> edges = {lo};
  for (int b = 1; b < bins; ++b)
    edges.push_back(lo + (hi - lo) * double(b) / double(bins));
  edges.push_back(hi);  // exact extremes: rounding must not orphan a level
  return hb::spectral_projectors(op, edges);
}

Instance random_instance(std::mt19937_64& rng) {
  static const std::vector<std::pair<int, int>> shapes = {
      {3, 2}, {3, 3}, {3, 4}, {2, 4}, {2, 5}, {2, 6},
      {4, 2}, {4, 3}, {5, 2}, {6, 2}, {8, 2}, {9, 2}};
  std::uniform_int_distribution<std::size_t> shape_pick(0, shapes.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;

  Instance inst;
  auto [d, n] = shapes[shape_pick(rng)];
  inst.spec.num_sites = d;
  inst.spec.num_particles = n;
  inst.spec.boundary = (rng() & 1) ? hb::Boundary::periodic : hb::Boundary::open;
  inst.spec.pair_potential.assign(std::size_t(d), 0.0);
  if (inst.spec.boundary == hb::Boundary::periodic) {
    for (int r = 0; r <= d / 2; ++r) {
      double v = unit(rng);
      inst.spec.pair_potential[std::size_t(r)] = v;
      inst.spec.pair_potential[std::size_t((d - r) % d)] = v;
    }
  } else {
    for (int r = 0; r < d; ++r) inst.spec.pair_potential[std::size_t(r)] = unit(rng);
  }
  inst.spec.validate();

  std::uniform_int_distribution<int> times_pick(1, 3);
  int n_times = times_pick(rng);
  double t = 0.0;
  for (int i = 0; i < n_times; ++i) {
    t += 0.2 + unit(rng);
    inst.schedule.times.push_back(t);
  }
  hb::ProjectorFamily family = random_family(rng, inst.spec);
  for (int i = 0; i < n_times; ++i) {
    if (i > 0 && unit(rng) < 0.3) family = random_family(rng, inst.spec);
    inst.schedule.families.push_back(family);
  }
  inst.schedule.validate();

  Eigen::VectorXcd raw(Eigen::Index(inst.spec.dim()));
  for (Eigen::Index i = 0; i < raw.size(); ++i)
    raw[i] = std::complex<double>(normal(rng), normal(rng));
  inst.psi.amplitudes = raw / raw.norm();
  return inst;
}

// ---------------------------------------------------------------------------

void criteria_1(const fs::path& configs, const fs::path& scratch) {
  auto t0 = std::chrono::steady_clock::now();
  auto report = run_config(configs / "conserved_decoherence.json",
                           scratch / "run1" / "conserved_decoherence");
  double dt = seconds_since(t0);
  const auto& eps = row(report, "epsilon_off_diagonal");
  bool pass = report.pass && dt < 10.0;
  line("conserved-quantity decoherence", pass,
       "epsilon=" + fmt(eps.measured) + " < " + fmt(lm::conserved_epsilon) +
           ", " + fmt(dt) + " s < 10 s");
}

void criteria_2_and_3(int instances) {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double worst_entry = 0.0, worst_total = 0.0, worst_excess = -1e300;
  bool labels_ok = true;
  for (int i = 0; i < instances; ++i) {
    Instance inst = random_instance(rng);
    Eigen::MatrixXcd h = hb::build_hamiltonian(inst.spec);
    hb::DecoherenceMatrix dm =
        hb::decoherence_functional(inst.psi, inst.schedule, h);

    std::vector<std::vector<Eigen::MatrixXcd>> fams;
    for (const auto& f : inst.schedule.families) fams.push_back(f.projectors);
    auto oracle =
        oracles::chain_oracle(inst.psi.amplitudes, h, inst.schedule.times, fams);
    labels_ok = labels_ok && (dm.labels == oracle.labels);
    worst_entry = std::max(
        worst_entry, (dm.entries - oracle.entries).cwiseAbs().maxCoeff());

    worst_total = std::max(
        worst_total, std::abs(dm.entries.diagonal().real().sum() - 1.0));
    std::vector<std::vector<int>> partition(inst.schedule.families[0].size());
    for (std::size_t s = 0; s < dm.labels.size(); ++s)
      partition[std::size_t(dm.labels[s][0])].push_back(int(s));
    partition.erase(std::remove_if(partition.begin(), partition.end(),
                                   [](const auto& c) { return c.empty(); }),
                    partition.end());
    auto sum = hb::probability_sum_check(dm, partition);
    worst_total = std::max(worst_total, std::abs(sum.total_probability - 1.0));
    for (const auto& cell : sum.cells)
      worst_excess = std::max(worst_excess, cell.residual - cell.offdiag_bound);
  }
  double dt = seconds_since(t0);

  bool pass2 = labels_ok && worst_entry < lm::oracle_agreement && dt < 60.0;
  line("decoherence functional vs operator-chain oracle", pass2,
       std::to_string(instances) + " instances, max entry diff=" +
           fmt(worst_entry) + " < " + fmt(lm::oracle_agreement) + ", " +
           fmt(dt) + " s < 60 s");

  bool pass3 =
      worst_total < lm::probability_total && worst_excess <= lm::sum_rule_slack;
  line("probability sum rules", pass3,
       "max |sum p - 1|=" + fmt(worst_total) +
           ", max residual excess=" + fmt(worst_excess) + " <= " +
           fmt(lm::sum_rule_slack));
}

void criteria_4(const fs::path& configs, const fs::path& scratch) {
  auto t0 = std::chrono::steady_clock::now();
  auto report = run_config(configs / "variance_scaling_particle_count.json",
                           scratch / "run1" / "variance_scaling_particle_count");
  double dt = seconds_since(t0);
  const auto& slope = row(report, "inverse_n_slope");
  bool pass = report.pass && dt < 120.0;
  line("1/N peaking of uncorrelated product densities", pass,
       "slope=" + fmt(slope.measured) + " = -1 +- " + fmt(lm::n_slope_tol) +
           ", " + fmt(dt) + " s < 120 s");
}

void criteria_5(const fs::path& configs, const fs::path& scratch) {
  auto t0 = std::chrono::steady_clock::now();
  auto r1 = run_config(configs / "variance_scaling_volume_1d.json",
                       scratch / "run1" / "variance_scaling_volume_1d");
  auto r3 = run_config(configs / "variance_scaling_volume_3d.json",
                       scratch / "run1" / "variance_scaling_volume_3d");
  double dt = seconds_since(t0);
  const auto& s1 = row(r1, "inverse_v_slope");
  const auto& s3 = row(r3, "inverse_v_slope");
  const auto& zero = row(r1, "uncorrelated_ratio");
  const auto& pre = row(r1, "constant_kernel_prefactor_rel_err");
  bool pass = r1.pass && r3.pass && dt < 300.0;
  line("correlation-volume/window-volume scaling", pass,
       "slope_1d=" + fmt(s1.measured) + ", slope_3d=" + fmt(s3.measured) +
           " = -1 +- " + fmt(lm::v_slope_tol) +
           ", uncorrelated=" + fmt(zero.measured) +
           ", prefactor err=" + fmt(pre.measured) + " < " +
           fmt(lm::prefactor_rel_tol) + ", " + fmt(dt) + " s < 300 s");
}

void criteria_6_and_7(const fs::path& configs, const fs::path& scratch) {
  fs::path outdir = scratch / "run1" / "gaussian_k_scan";
  auto report = run_config(configs / "gaussian_k_scan.json", outdir);

  const auto& v0 = row(report, "variance_at_k0");
  const auto& z = row(report, "mc_max_z");
  std::size_t pairs = csv_data_rows(outdir / "mc_check.csv");
  bool pass6 = v0.pass && z.pass && pairs >= 10;
  line("closed-form n(k) variance vs Gaussian Monte Carlo", pass6,
       std::to_string(pairs) + " (state,k) pairs, max |z|=" + fmt(z.measured) +
           " < " + fmt(lm::mc_z_limit) + ", variance(k=0)=" + fmt(v0.measured));

  const auto& slope = row(report, "small_k_slope");
  const auto& tiny = row(report, "ratio_deviation_at_tiny_k");
  bool pass7 = slope.pass && tiny.pass;
  line("quadratic small-k limit of the variance", pass7,
       "slope=" + fmt(slope.measured) + " = 2 +- " + fmt(lm::small_k_slope_tol) +
           ", |ratio-1| at k sigma=1e-4: " + fmt(tiny.measured) + " < " +
           fmt(lm::tiny_k_ratio_tol));
}

void criteria_8(const fs::path& configs, const fs::path& scratch) {
  auto t0 = std::chrono::steady_clock::now();
  auto report = run_config(configs / "diffusion_emergence.json",
                           scratch / "run1" / "diffusion_emergence");
  double dt = seconds_since(t0);
  const auto& dfit = row(report, "d_fit_rel_err");
  const auto& late = row(report, "residual_at_10_over_gamma");
  const auto& mono = row(report, "residual_monotone_decreasing");
  bool pass = report.pass && dt < 10.0;
  line("diffusion-equation emergence", pass,
       "D rel err=" + fmt(dfit.measured) + " < " + fmt(lm::d_fit_rel_tol) +
           ", residual(10/gamma)=" + fmt(late.measured) + " < " +
           fmt(lm::late_residual_tol) + ", monotone=" + fmt(mono.measured) +
           ", " + fmt(dt) + " s < 10 s");
}

void criteria_9(const fs::path& configs, const fs::path& scratch,
                const std::vector<std::string>& names) {
  // Rerun the whole battery into a second tree and compare artifact bytes.
  std::size_t files = 0;
  std::vector<std::string> mismatches;
  for (const auto& name : names) {
    fs::path cfg = configs / (name + ".json");
    run_config(cfg, scratch / "run2" / name);
    fs::path dir1 = scratch / "run1" / name, dir2 = scratch / "run2" / name;
    for (const auto& entry : fs::directory_iterator(dir1)) {
      if (entry.path().extension() != ".csv" &&
          entry.path().filename() != "report.json")
        continue;
      ++files;
      std::string a = dechist::io::read_text_file(entry.path().string());
      std::string b = dechist::io::read_text_file(
          (dir2 / entry.path().filename()).string());
      if (a != b) mismatches.push_back(name + "/" + entry.path().filename().string());
    }
  }
  std::string detail = std::to_string(files) + " artifacts compared";
  for (const auto& m : mismatches) detail += ", differs: " + m;
  line("byte-identical rerun of the full battery", mismatches.empty() && files > 0,
       detail);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: acceptance <configs_dir> <scratch_dir>\n");
    return 2;
  }
  fs::path configs = argv[1], scratch = argv[2];
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  const std::vector<std::string> battery = {
      "conserved_decoherence",       "coarse_k_scan",
      "peaking_vs_n",                "gaussian_k_scan",
      "variance_scaling_particle_count", "variance_scaling_volume_1d",
      "variance_scaling_volume_3d",  "diffusion_emergence"};

  try {
    criteria_1(configs, scratch);
    criteria_2_and_3(20);
    criteria_4(configs, scratch);
    criteria_5(configs, scratch);
    criteria_6_and_7(configs, scratch);
    criteria_8(configs, scratch);
    // the two kinds not gated above still belong to the rerun battery
    run_config(configs / "coarse_k_scan.json", scratch / "run1" / "coarse_k_scan");
    run_config(configs / "peaking_vs_n.json", scratch / "run1" / "peaking_vs_n");
    criteria_9(configs, scratch, battery);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance battery aborted: %s\n", e.what());
    return 1;
  }
  std::printf("acceptance: %s\n", g_all_pass ? "ALL PASS" : "FAILURES");
  return g_all_pass ? 0 : 1;
}
