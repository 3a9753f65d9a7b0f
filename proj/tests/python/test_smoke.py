"""End-to-end smoke tests of the python bindings and the CLI."""

import json
import os
import subprocess

import numpy as np
import pytest

import dechist


def test_version_string():
    assert dechist.__version__ == "dechist 0.1.0"


def test_lattice_decoherence_roundtrip():
    spec = dechist.LatticeSpec(num_particles=2, num_sites=3,
                               pair_potential=[0.0, 0.5, 0.5])
    h = dechist.build_hamiltonian(spec)
    assert h.shape == (9, 9)
    assert np.abs(h - h.conj().T).max() < 1e-13

    nv = dechist.build_density_operator(spec, "number", window_sites=[0])
    family = dechist.spectral_projectors(nv, [-0.5, 0.5, 1.5, 2.5])
    assert len(family) == 3
    assert sum(family.ranks) == 9

    single = np.array([1.0, 1.0j, 0.5]) / np.sqrt(2.25)
    psi = dechist.product_state(spec, single)
    d = dechist.decoherence_functional(psi, [0.5, 1.2], [family, family], h)
    entries = d.entries
    assert entries.shape == (9, 9)
    assert abs(np.trace(entries).real - 1.0) < 1e-10
    assert abs(np.trace(entries).imag) < 1e-12
    eps = dechist.epsilon_decoherence(d)
    assert 0.0 <= eps

    total, max_residual, bounded = dechist.probability_sum_check(
        d, [[i for i, lab in enumerate(d.labels) if lab[0] == b] for b in range(3)])
    assert abs(total - 1.0) < 1e-10
    assert bounded

    evolved = dechist.evolve(psi, h, 0.7)
    assert abs(np.linalg.norm(evolved) - 1.0) < 1e-12


def test_chain_moments():
    spec = dechist.ChainSpec(num_modes=4, omega0=0.9, coupling=1.1)
    gs = dechist.ground_state(spec)
    mean, variance, imag_residual = dechist.n_k_moments(gs, 0.0)
    assert variance == 0.0
    assert mean == 4.0 + 0.0j
    assert imag_residual == 0.0

    sigma = np.sqrt(gs.cov[:4, :4].diagonal().max())
    assert abs(dechist.small_k_ratio(gs, 1e-4 / sigma) - 1.0) < 1e-6

    later = dechist.evolve_gaussian(gs, spec, 1.3)
    assert np.abs(later.cov - gs.cov).max() < 1e-9  # ground state is stationary


def test_phase_space_quadrature_and_sampling():
    # 128 cells: the quadrature wants >= 8 cells per correlation length
    p1 = dechist.OneParticleDistribution.uniform(1, 1.0, 128)
    w = dechist.WindowRegion.centered_cube(1, 1.0, 0.5)
    assert dechist.variance_ratio_quadrature(p1, None, w) == 0.0

    kernel = dechist.PairCorrelationModel("constant", 0.5, 1.0 / 16.0)
    assert dechist.variance_ratio_quadrature(p1, kernel, w) > 0.0
    assert kernel(0.01) == 0.5
    assert kernel(0.2) == 0.0

    ens = dechist.sample_ensemble(p1, None, 8, 2000, 42)
    mom = dechist.density_moments(ens, w)
    binomial_ratio = (1 - 0.5) / (8 * 0.5)
    assert abs(mom["ratio"] - binomial_ratio) < 5 * mom["ratio_err"]


def test_brownian_flow():
    params = dechist.BrownianParams(mass=1.0, friction=0.8, momentum_diffusion=0.9)
    state = dechist.OneParticleGaussian(var_pp=0.9 / 0.8)
    out = dechist.evolve_moments(state, params, 12.5)
    assert out.var_pp == pytest.approx(0.9 / 0.8)
    d_closed = dechist.diffusion_constant_closed_form(params)
    grid = [(10 + 10 * i) / 0.8 for i in range(10)]
    d_fit, _, residual = dechist.diffusion_constant_fit(state, params, grid)
    assert d_fit == pytest.approx(d_closed, rel=0.02)
    assert residual < 0.01


def test_run_experiment_api(tmp_path):
    config = {
        "experiment": "peaking_vs_N",
        "output_dir": str(tmp_path / "peak"),
        "params": {"particle_grid": [2, 3, 4, 5]},
    }
    report = json.loads(dechist.run_experiment(json.dumps(config)))
    assert report["pass"] is True
    assert (tmp_path / "peak" / "peaking.csv").exists()

    with pytest.raises(dechist.ConfigError):
        dechist.validate_config(json.dumps({"experiment": "nope"}))

    catalog = json.loads(dechist.catalog())
    assert len(catalog) == 6


@pytest.fixture()
def cli():
    path = os.environ.get("DECHIST_CLI")
    if not path or not os.path.exists(path):
        pytest.skip("CLI binary not available")
    return path


@pytest.fixture()
def configs_dir():
    path = os.environ.get("DECHIST_CONFIGS")
    if not path or not os.path.isdir(path):
        pytest.skip("configs directory not available")
    return path


def test_cli_exit_codes(cli, configs_dir, tmp_path):
    good = os.path.join(configs_dir, "peaking_vs_n.json")
    r = subprocess.run([cli, "validate", good], capture_output=True, text=True)
    assert r.returncode == 0
    assert "OK peaking_vs_N" in r.stdout

    bad = tmp_path / "bad.json"
    bad.write_text('{"experiment": "peaking_vs_N", "params": {"bogus": 1}}')
    r = subprocess.run([cli, "validate", str(bad)], capture_output=True, text=True)
    assert r.returncode == 2
    assert "$.params.bogus" in r.stderr

    out = tmp_path / "out"
    r = subprocess.run([cli, "run", good, "--out", str(out)],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert (out / "report.json").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["pass"] is True


def test_cli_env_output_dir(cli, configs_dir, tmp_path):
    good = os.path.join(configs_dir, "peaking_vs_n.json")
    env = dict(os.environ, DECHIST_OUT=str(tmp_path / "envout"))
    r = subprocess.run([cli, "run", good], capture_output=True, text=True, env=env)
    assert r.returncode == 0
    assert (tmp_path / "envout" / "report.json").exists()


def test_cli_list_json(cli):
    r = subprocess.run([cli, "list", "--json"], capture_output=True, text=True)
    assert r.returncode == 0
    catalog = json.loads(r.stdout)
    kinds = {entry["kind"] for entry in catalog}
    assert len(kinds) == 6
    assert "diffusion_emergence" in kinds
