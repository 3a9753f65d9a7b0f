#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dechist/brownian.hpp"
#include "dechist/chain.hpp"
#include "dechist/experiments.hpp"
#include "dechist/hilbert.hpp"
#include "dechist/phase_space.hpp"

namespace py = pybind11;
namespace hb = dechist::hilbert;
namespace ch = dechist::chain;
namespace ps = dechist::phasespace;
namespace br = dechist::brownian;
namespace ex = dechist::experiments;

namespace {

hb::Boundary lattice_boundary(const std::string& s) {
  if (s == "periodic") return hb::Boundary::periodic;
  if (s == "open") return hb::Boundary::open;
  throw std::invalid_argument("boundary must be 'periodic' or 'open'");
}

hb::DensityKind density_kind(const std::string& s) {
  if (s == "number") return hb::DensityKind::number;
  if (s == "momentum") return hb::DensityKind::momentum;
  if (s == "energy") return hb::DensityKind::energy;
  if (s == "fourier_number") return hb::DensityKind::fourier_number;
  throw std::invalid_argument(
      "kind must be number, momentum, energy, or fourier_number");
}

ps::KernelShape kernel_shape(const std::string& s) {
  if (s == "constant") return ps::KernelShape::constant;
  if (s == "triangular") return ps::KernelShape::triangular;
  if (s == "gaussian_truncated") return ps::KernelShape::gaussian_truncated;
  throw std::invalid_argument(
      "shape must be constant, triangular, or gaussian_truncated");
}

hb::HistorySchedule make_schedule(const std::vector<double>& times,
                                  const std::vector<hb::ProjectorFamily>& fams) {
  hb::HistorySchedule schedule;
  schedule.times = times;
  schedule.families = fams;
  return schedule;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Coarse-grained density decoherence engines";
  m.attr("__version__") = ex::version_string();

  // ---- lattice / histories -------------------------------------------------
  py::class_<hb::LatticeSpec>(m, "LatticeSpec")
      .def(py::init([](int num_particles, int num_sites, double lattice_spacing,
                       double mass, double hopping,
                       std::vector<double> pair_potential,
                       const std::string& boundary, double hbar) {
             hb::LatticeSpec spec;
             spec.num_particles = num_particles;
             spec.num_sites = num_sites;
             spec.lattice_spacing = lattice_spacing;
             spec.mass = mass;
             spec.hopping = hopping;
             spec.pair_potential = std::move(pair_potential);
             spec.boundary = lattice_boundary(boundary);
             spec.hbar = hbar;
             spec.validate();
             return spec;
           }),
           py::arg("num_particles"), py::arg("num_sites"),
           py::arg("lattice_spacing") = 1.0, py::arg("mass") = 1.0,
           py::arg("hopping") = -1.0,
           py::arg("pair_potential") = std::vector<double>{},
           py::arg("boundary") = "periodic", py::arg("hbar") = 1.0)
      .def_readonly("num_particles", &hb::LatticeSpec::num_particles)
      .def_readonly("num_sites", &hb::LatticeSpec::num_sites)
      .def("dim", &hb::LatticeSpec::dim);

  m.def(
      "product_state",
      [](const hb::LatticeSpec& spec, const Eigen::VectorXcd& single) {
        return hb::product_state(spec, single).amplitudes;
      },
      py::arg("spec"), py::arg("single"));
  m.def("build_hamiltonian", &hb::build_hamiltonian, py::arg("spec"));
  m.def(
      "build_density_operator",
      [](const hb::LatticeSpec& spec, const std::string& kind,
         std::vector<int> window_sites, double wavenumber) {
        hb::DensityOperatorSpec dspec;
        dspec.kind = density_kind(kind);
        dspec.window.sites = std::move(window_sites);
        dspec.wavenumber = wavenumber;
        return hb::build_density_operator(spec, dspec);
      },
      py::arg("spec"), py::arg("kind"),
      py::arg("window_sites") = std::vector<int>{}, py::arg("wavenumber") = 0.0);

  py::class_<hb::ProjectorFamily>(m, "ProjectorFamily")
      .def_readonly("projectors", &hb::ProjectorFamily::projectors)
      .def_readonly("bin_edges", &hb::ProjectorFamily::bin_edges)
      .def_readonly("ranks", &hb::ProjectorFamily::ranks)
      .def_readonly("empty_bins", &hb::ProjectorFamily::empty_bins)
      .def("validate", &hb::ProjectorFamily::validate)
      .def("__len__", &hb::ProjectorFamily::size);
  m.def("spectral_projectors", &hb::spectral_projectors, py::arg("op"),
        py::arg("bin_edges"), py::arg("cluster_tol") = 1e-9);

  py::class_<hb::DecoherenceMatrix>(m, "DecoherenceMatrix")
      .def_readonly("entries", &hb::DecoherenceMatrix::entries)
      .def_readonly("labels", &hb::DecoherenceMatrix::labels)
      .def("validate", &hb::DecoherenceMatrix::validate)
      .def("to_csv", &hb::DecoherenceMatrix::to_csv);
  m.def(
      "decoherence_functional",
      [](const Eigen::VectorXcd& initial, const std::vector<double>& times,
         const std::vector<hb::ProjectorFamily>& families,
         const Eigen::MatrixXcd& hamiltonian, double hbar) {
        hb::PureState psi;
        psi.amplitudes = initial;
        return hb::decoherence_functional(psi, make_schedule(times, families),
                                          hamiltonian, hbar);
      },
      py::arg("initial"), py::arg("times"), py::arg("families"),
      py::arg("hamiltonian"), py::arg("hbar") = 1.0);
  m.def(
      "epsilon_decoherence",
      [](const hb::DecoherenceMatrix& d) {
        return hb::epsilon_decoherence(d).epsilon;
      },
      py::arg("d"));
  m.def(
      "probability_sum_check",
      [](const hb::DecoherenceMatrix& d,
         const std::vector<std::vector<int>>& partition) {
        auto report = hb::probability_sum_check(d, partition);
        return py::make_tuple(report.total_probability, report.max_residual,
                              report.all_bounded);
      },
      py::arg("d"), py::arg("partition"));
  m.def(
      "evolve",
      [](const Eigen::VectorXcd& state, const Eigen::MatrixXcd& hamiltonian,
         double dt, double hbar) {
        hb::PureState psi;
        psi.amplitudes = state;
        return hb::evolve(psi, hamiltonian, dt, hbar).amplitudes;
      },
      py::arg("state"), py::arg("hamiltonian"), py::arg("dt"),
      py::arg("hbar") = 1.0);
  m.def(
      "expectation",
      [](const Eigen::VectorXcd& state, const Eigen::MatrixXcd& op) {
        hb::PureState psi;
        psi.amplitudes = state;
        return hb::expectation(psi, op);
      },
      py::arg("state"), py::arg("op"));
  m.def(
      "peaking_ratio",
      [](const Eigen::VectorXcd& state, const Eigen::MatrixXcd& op) {
        hb::PureState psi;
        psi.amplitudes = state;
        return hb::peaking_ratio(psi, op);
      },
      py::arg("state"), py::arg("op"));

  // ---- gaussian chains -----------------------------------------------------
  py::class_<ch::ChainSpec>(m, "ChainSpec")
      .def(py::init([](int num_modes, double mass, double omega0,
                       double coupling, std::vector<double> equilibrium,
                       const std::string& boundary, double hbar) {
             ch::ChainSpec spec;
             spec.num_modes = num_modes;
             spec.mass = mass;
             spec.omega0 = omega0;
             spec.coupling = coupling;
             spec.equilibrium = std::move(equilibrium);
             spec.boundary = boundary == "open" ? ch::Boundary::open
                                                : ch::Boundary::periodic;
             spec.hbar = hbar;
             spec.validate();
             return spec;
           }),
           py::arg("num_modes"), py::arg("mass") = 1.0, py::arg("omega0") = 1.0,
           py::arg("coupling") = 0.0,
           py::arg("equilibrium") = std::vector<double>{},
           py::arg("boundary") = "periodic", py::arg("hbar") = 1.0)
      .def_readonly("num_modes", &ch::ChainSpec::num_modes)
      .def("stiffness", &ch::ChainSpec::stiffness);

  py::class_<ch::GaussianState>(m, "GaussianState")
      .def(py::init([](Eigen::VectorXd mean, Eigen::MatrixXd cov) {
             ch::GaussianState state;
             state.mean = std::move(mean);
             state.cov = std::move(cov);
             return state;
           }),
           py::arg("mean"), py::arg("cov"))
      .def_readwrite("mean", &ch::GaussianState::mean)
      .def_readwrite("cov", &ch::GaussianState::cov)
      .def("validate", &ch::GaussianState::validate, py::arg("hbar") = 1.0)
      .def("to_csv", &ch::GaussianState::to_csv);
  m.def("ground_state", &ch::ground_state, py::arg("spec"));
  m.def("evolve_gaussian", &ch::evolve_gaussian, py::arg("state"),
        py::arg("spec"), py::arg("t"));
  m.def(
      "n_k_moments",
      [](const ch::GaussianState& state, double k) {
        auto mom = ch::n_k_moments(state, k);
        return py::make_tuple(mom.mean, mom.variance, mom.imag_residual);
      },
      py::arg("state"), py::arg("k"));
  m.def("small_k_ratio", &ch::small_k_ratio, py::arg("state"), py::arg("k"));
  m.def(
      "correlation_length",
      [](const ch::GaussianState& state, double spacing) {
        auto fit = ch::correlation_length(state, spacing);
        py::dict out;
        out["length"] = fit.length;
        out["residual"] = fit.residual;
        out["no_decay"] = fit.no_decay;
        out["degenerate"] = fit.degenerate;
        return out;
      },
      py::arg("state"), py::arg("spacing") = 1.0);

  // ---- phase-space densities -----------------------------------------------
  py::class_<ps::OneParticleDistribution>(m, "OneParticleDistribution")
      .def_static("uniform", &ps::OneParticleDistribution::uniform,
                  py::arg("dim"), py::arg("box"), py::arg("cells"))
      .def_readonly("dim", &ps::OneParticleDistribution::dim)
      .def_readonly("box", &ps::OneParticleDistribution::box)
      .def_readonly("cells", &ps::OneParticleDistribution::cells)
      .def("integral", &ps::OneParticleDistribution::integral);

  py::class_<ps::PairCorrelationModel>(m, "PairCorrelationModel")
      .def(py::init([](const std::string& shape, double amplitude,
                       double correlation_length, double gaussian_sigma_fraction) {
             ps::PairCorrelationModel c;
             c.shape = kernel_shape(shape);
             c.amplitude = amplitude;
             c.correlation_length = correlation_length;
             c.gaussian_sigma_fraction = gaussian_sigma_fraction;
             c.validate();
             return c;
           }),
           py::arg("shape"), py::arg("amplitude"),
           py::arg("correlation_length"),
           py::arg("gaussian_sigma_fraction") = 0.25)
      .def("__call__", &ps::PairCorrelationModel::operator(), py::arg("r"));

  py::class_<ps::WindowRegion>(m, "WindowRegion")
      .def_static("centered_cube", &ps::WindowRegion::centered_cube,
                  py::arg("dim"), py::arg("box"), py::arg("side"))
      .def_readonly("lo", &ps::WindowRegion::lo)
      .def_readonly("hi", &ps::WindowRegion::hi)
      .def("volume", &ps::WindowRegion::volume);

  py::class_<ps::CorrelatedEnsemble>(m, "CorrelatedEnsemble")
      .def_readonly("num_particles", &ps::CorrelatedEnsemble::num_particles)
      .def_readonly("num_samples", &ps::CorrelatedEnsemble::num_samples)
      .def_property_readonly("acceptance_rate",
                             [](const ps::CorrelatedEnsemble& e) {
                               return e.meta.acceptance_rate;
                             })
      .def_property_readonly("effective_sample_size",
                             [](const ps::CorrelatedEnsemble& e) {
                               return e.meta.effective_sample_size;
                             });
  m.def("sample_ensemble", &ps::sample_ensemble, py::arg("p1"), py::arg("pair"),
        py::arg("num_particles"), py::arg("num_samples"), py::arg("seed"));
  m.def(
      "density_moments",
      [](const ps::CorrelatedEnsemble& ens, const ps::WindowRegion& w) {
        auto mom = ps::density_moments(ens, w);
        py::dict out;
        out["mean"] = mom.mean;
        out["mean_err"] = mom.mean_err;
        out["variance"] = mom.variance;
        out["variance_err"] = mom.variance_err;
        out["ratio"] = mom.ratio;
        out["ratio_err"] = mom.ratio_err;
        return out;
      },
      py::arg("ensemble"), py::arg("window"));
  m.def(
      "variance_ratio_quadrature",
      [](const ps::OneParticleDistribution& p1,
         const std::optional<ps::PairCorrelationModel>& pair,
         const ps::WindowRegion& w) {
        return ps::variance_ratio_quadrature(p1, pair, w);
      },
      py::arg("p1"), py::arg("pair"), py::arg("window"));

  // ---- brownian moments ------------------------------------------------------
  py::class_<br::BrownianParams>(m, "BrownianParams")
      .def(py::init([](double mass, double friction, double momentum_diffusion) {
             br::BrownianParams p;
             p.mass = mass;
             p.friction = friction;
             p.momentum_diffusion = momentum_diffusion;
             p.validate();
             return p;
           }),
           py::arg("mass"), py::arg("friction"), py::arg("momentum_diffusion"))
      .def_readonly("mass", &br::BrownianParams::mass)
      .def_readonly("friction", &br::BrownianParams::friction)
      .def_readonly("momentum_diffusion", &br::BrownianParams::momentum_diffusion);

  py::class_<br::OneParticleGaussian>(m, "OneParticleGaussian")
      .def(py::init([](double mean_q, double mean_p, double var_qq,
                       double cov_qp, double var_pp) {
             br::OneParticleGaussian g;
             g.mean_q = mean_q;
             g.mean_p = mean_p;
             g.var_qq = var_qq;
             g.cov_qp = cov_qp;
             g.var_pp = var_pp;
             g.validate();
             return g;
           }),
           py::arg("mean_q") = 0.0, py::arg("mean_p") = 0.0,
           py::arg("var_qq") = 1.0, py::arg("cov_qp") = 0.0,
           py::arg("var_pp") = 1.0)
      .def_readwrite("mean_q", &br::OneParticleGaussian::mean_q)
      .def_readwrite("mean_p", &br::OneParticleGaussian::mean_p)
      .def_readwrite("var_qq", &br::OneParticleGaussian::var_qq)
      .def_readwrite("cov_qp", &br::OneParticleGaussian::cov_qp)
      .def_readwrite("var_pp", &br::OneParticleGaussian::var_pp);
  m.def("evolve_moments", &br::evolve_moments, py::arg("state"),
        py::arg("params"), py::arg("t"));
  m.def("diffusion_constant_closed_form", &br::diffusion_constant_closed_form,
        py::arg("params"));
  m.def(
      "diffusion_constant_fit",
      [](const br::OneParticleGaussian& initial, const br::BrownianParams& p,
         const std::vector<double>& t_grid) {
        auto fit = br::diffusion_constant_fit(initial, p, t_grid);
        return py::make_tuple(fit.d_fit, fit.intercept, fit.residual);
      },
      py::arg("initial"), py::arg("params"), py::arg("t_grid"));

  // ---- experiment runner -----------------------------------------------------
  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        auto config = ex::parse_config(nlohmann::json::parse(config_json));
        return ex::run(config).to_json().dump();
      },
      py::arg("config_json"),
      "Parse a JSON config string, run it, and return the report as JSON.");
  m.def("validate_config", [](const std::string& config_json) {
    ex::parse_config(nlohmann::json::parse(config_json));
  });
  m.def("catalog", [] { return ex::catalog_json().dump(); });

  py::register_exception<ex::ConfigError>(m, "ConfigError");
}
