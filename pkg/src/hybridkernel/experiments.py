"""Deterministic experiment drivers behind the CLI: dataset generation,
regularization sweeps for the three static settings, the Koopman sweep, and
the closed-loop control comparison. All functions are pure given their seeds.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np

from . import control, hybrid_static, koopman, thermo_vle
from .hybrid_static import Dataset
from .kernels import KernelSpec

DEFAULT_LAMBDA_GRID = tuple(np.logspace(-3, 2, 13))
DEFAULT_LAMBDA_R_GRID = tuple(np.logspace(-4, 2, 7))
DEFAULT_GAMMA_X = 100.0
DEFAULT_GAMMA_THETA = 10.0
DEFAULT_LAMBDA_THETA = 1e-6
DEFAULT_LAMBDA_B = 1e-8
THREADS_ENV = "HYBRIDKERNEL_THREADS"


def worker_count() -> int:
    cap = os.environ.get(THREADS_ENV)
    if cap:
        return max(1, int(cap))
    return min(4, os.cpu_count() or 1)


def _map_grid(fn, grid):
    workers = worker_count()
    if workers == 1 or len(grid) == 1:
        return [fn(g) for g in grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, grid))


@lru_cache(maxsize=None)
def _bubble_T(x: float) -> float:
    return thermo_vle.bubble_point(x)[0]


def xy_dataset(n: int, seed: int) -> Dataset:
    """(x, y) pairs from the VLE ground truth."""
    pts = thermo_vle.generate_vle_dataset(n, seed=seed)
    return Dataset(inputs=np.array([p.x for p in pts]),
                   targets=np.array([p.y for p in pts]))


def gex_dataset(n: int, seed: int) -> Dataset:
    """(x, Gibbs-energy target) pairs converted from simulated T-x-y data."""
    pts = thermo_vle.generate_vle_dataset(n, seed=seed)
    return Dataset(inputs=np.array([p.x for p in pts]),
                   targets=np.array([thermo_vle.excess_gibbs_from_txy(p) for p in pts]))


def relative_volatility_reference(x):
    return thermo_vle.rel_volatility_model(thermo_vle.REL_VOLATILITY_ALPHA, x)


def gex_reference(x):
    """Relative-volatility reference pushed through the Gibbs-energy conversion.

    y is replaced by the reference prediction; T comes from the ground-truth
    bubble point at x (the temperature is measured data in this setting).
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    for i, xi in enumerate(xs):
        y_ref = thermo_vle.rel_volatility_model(thermo_vle.REL_VOLATILITY_ALPHA, float(xi))
        T = _bubble_T(float(xi))
        out[i] = thermo_vle.excess_gibbs_from_txy(
            thermo_vle.VlePoint(x=float(xi), y=y_ref, T=T))
    return float(out[0]) if np.ndim(x) == 0 else out


def wilson_family(x, theta):
    """Wilson Gibbs-energy model h(x | theta) evaluated at the bubble temperature."""
    w = thermo_vle.WilsonParams(theta=(float(theta[0]), float(theta[1])))
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.array([thermo_vle.wilson_gex(w, float(xi),
                                          _bubble_T(float(xi)) + thermo_vle.CELSIUS_TO_KELVIN)
                    for xi in xs])
    return float(out[0]) if np.ndim(x) == 0 else out


def sample_thetas(m: int, seed: int, dim: int = 2) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=(m, dim))


def run_setting1(n: int = 50, seed: int = 0, lambda_grid=DEFAULT_LAMBDA_GRID,
                 gamma: float = DEFAULT_GAMMA_X) -> list[dict]:
    """KRR around the relative-volatility reference on (x, y) data."""
    train = xy_dataset(n, seed)
    val = xy_dataset(n, seed + 1)
    kernel = KernelSpec(gamma=gamma)

    def one(lam):
        model = hybrid_static.fit_reference_krr(train, relative_volatility_reference,
                                                kernel, lam)
        return {"lambda": float(lam),
                "train_rmse": hybrid_static.rmse(model, train),
                "val_rmse": hybrid_static.rmse(model, val)}

    return _map_grid(one, list(lambda_grid))


def run_setting2(n: int = 50, seed: int = 0, lambda_grid=DEFAULT_LAMBDA_GRID,
                 gamma: float = DEFAULT_GAMMA_X,
                 lambda_theta: float = DEFAULT_LAMBDA_THETA) -> dict:
    """Reference hybrid vs Margules-subspace hybrid on Gibbs-energy data."""
    train = gex_dataset(n, seed)
    val = gex_dataset(n, seed + 1)
    kernel = KernelSpec(gamma=gamma)

    def one(lam):
        ref = hybrid_static.fit_reference_krr(train, gex_reference, kernel, lam)
        sub = hybrid_static.fit_subspace(train, thermo_vle.margules_features, kernel,
                                         lambda_theta=lambda_theta, lambda_r=lam)
        return (
            {"lambda": float(lam),
             "train_rmse": hybrid_static.rmse(ref, train),
             "val_rmse": hybrid_static.rmse(ref, val)},
            {"lambda": float(lam),
             "train_rmse": hybrid_static.rmse(sub, train),
             "val_rmse": hybrid_static.rmse(sub, val),
             "theta_star": ";".join(repr(float(t)) for t in sub.theta)},
        )

    rows = _map_grid(one, list(lambda_grid))
    return {"reference": [r[0] for r in rows], "margules": [r[1] for r in rows]}


def run_setting3(n: int = 50, seed: int = 0, m: int = 25,
                 lambda_grid=DEFAULT_LAMBDA_GRID, gamma_x: float = DEFAULT_GAMMA_X,
                 gamma_theta: float = DEFAULT_GAMMA_THETA,
                 lambda_omega: float = 0.0, theta_seed: int = None) -> list[dict]:
    """Wilson-manifold mixture fit on Gibbs-energy data."""
    if theta_seed is None:
        theta_seed = seed + 1000
    train = gex_dataset(n, seed)
    val = gex_dataset(n, seed + 1)
    thetas = sample_thetas(m, theta_seed)
    kx = KernelSpec(gamma=gamma_x)
    kt = KernelSpec(gamma=gamma_theta)

    def one(lam):
        model = hybrid_static.fit_mixture(train, wilson_family, thetas, kx, kt,
                                          lambda_omega=lambda_omega, lambda_r=lam)
        theta_star = model.effective_parameter()
        return {"lambda": float(lam),
                "train_rmse": hybrid_static.rmse(model, train),
                "val_rmse": hybrid_static.rmse(model, val),
                "theta_star": ";".join(repr(float(t)) for t in theta_star),
                "weights": model.weights,
                "theta_samples": thetas}

    return _map_grid(one, list(lambda_grid))


def koopman_setup(n: int = 200, seed: int = 0, m: int = 25, theta_seed: int = None,
                  q: int = 3):
    if theta_seed is None:
        theta_seed = seed + 1000
    basis = koopman.MonomialBasis(q=q)
    f0_true, f1, family = koopman.cstr_fields()
    train = koopman.make_drift_sample(n, seed, f0_true)
    val = koopman.make_drift_sample(n, seed + 1, f0_true)
    thetas = sample_thetas(m, theta_seed)
    return basis, f0_true, f1, family, train, val, thetas


def run_koopman(n: int = 200, seed: int = 0, m: int = 25,
                lambda_grid=DEFAULT_LAMBDA_R_GRID, lambda_b: float = DEFAULT_LAMBDA_B,
                q: int = 3, theta_seed: int = None) -> list[dict]:
    """Hybrid generator identification sweep over lambda_R."""
    basis, _, _, family, train, val, thetas = koopman_setup(n, seed, m, theta_seed, q)

    def one(lam):
        b, R, _ = koopman.fit_hybrid_generator(train, family, thetas, basis,
                                               lambda_b=lambda_b, lambda_R=lam)
        return {"lambda_R": float(lam),
                "train_rmse": koopman.hybrid_prediction_rmse(train, family, thetas,
                                                             basis, b, R),
                "val_rmse": koopman.hybrid_prediction_rmse(val, family, thetas,
                                                           basis, b, R),
                "frob_R": float(np.linalg.norm(R, "fro")),
                "b": b, "R": R}

    return _map_grid(one, list(lambda_grid))


def build_hybrid_model(b, R, thetas, basis: koopman.MonomialBasis,
                       family=None, f1=None) -> koopman.KoopmanHybridModel:
    """Assemble the bilinear lifted model from fitted (b, R) and closures."""
    if family is None or f1 is None:
        _, f1_def, fam_def = koopman.cstr_fields()
        family = family or fam_def
        f1 = f1 or f1_def
    closure_As = [koopman.closure_fit(lambda x, th=th: family(x, th), basis)[1]
                  for th in np.asarray(thetas)]
    beta1, gamma1 = koopman.closure_fit(f1, basis, affine=True)
    return koopman.assemble_bilinear(b, R, closure_As, [(beta1, gamma1)], basis,
                                     theta_samples=thetas)


def run_control(seed: int = 0, n: int = 200, m: int = 25,
                lambda_grid=DEFAULT_LAMBDA_R_GRID, lambda_b: float = DEFAULT_LAMBDA_B,
                q: int = 3, n_states: int = 5, dt: float = 0.01,
                horizon: float = 10.0, state_seed: int = None,
                keep_trajectories: bool = False) -> list[dict]:
    """Closed-loop comparison: ground-truth CLF controller vs hybrid-model one.

    Both controllers drive the true plant (certainty equivalence); reported per
    (lambda_R, initial state): max state deviation and whether V decreased
    monotonically (1e-6 per-step tolerance) along both trajectories.
    """
    if state_seed is None:
        state_seed = seed + 2000
    basis, f0_true, f1, family, train, _, thetas = koopman_setup(n, seed, m, q=q)
    x0s = koopman.sample_states(n_states, state_seed)

    def plant(x, u):
        return f0_true(x) + u * f1(x)

    truth_ctrl = control.make_truth_controller(basis, f0_true, f1)

    def v_monotone(traj):
        vals = np.array([control.clf_value(basis, x) for x in traj.states])
        return bool(np.all(np.diff(vals) <= 1e-6))

    rows = []
    for lam in lambda_grid:
        b, R, _ = koopman.fit_hybrid_generator(train, family, thetas, basis,
                                               lambda_b=lambda_b, lambda_R=lam)
        model = build_hybrid_model(b, R, thetas, basis, family, f1)
        model_ctrl = control.make_model_controller(model)
        for i, x0 in enumerate(x0s):
            t_truth = control.simulate(plant, truth_ctrl, x0, dt, horizon)
            t_model = control.simulate(plant, model_ctrl, x0, dt, horizon)
            row = {
                "lambda_R": float(lam),
                "x0_index": i,
                "max_deviation": control.compare_trajectories(t_truth, t_model),
                "v_monotone_truth": v_monotone(t_truth),
                "v_monotone_model": v_monotone(t_model),
            }
            if keep_trajectories:
                row["trajectory_truth"] = t_truth
                row["trajectory_model"] = t_model
            rows.append(row)
    return rows
