"""Lyapunov-based control with the bounded Lin-Sontag formula, RK4 closed-loop
simulation, and trajectory comparison for the reactor case study.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, GridMismatch, NonFinite
from .koopman import KoopmanHybridModel, MonomialBasis

B_DEADBAND = 1e-12


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.states, dtype=float)
        u = np.asarray(self.controls, dtype=float)
        if x.shape[0] != t.size or u.size not in (t.size, t.size - 1):
            raise DimensionMismatch("trajectory arrays have inconsistent lengths")
        if not np.all(np.isfinite(x)):
            raise NonFinite("trajectory contains non-finite states")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", x)
        object.__setattr__(self, "controls", u)

    def save_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "x1", "x2", "u"])
            for i, t in enumerate(self.times):
                u = self.controls[i] if i < self.controls.size else ""
                writer.writerow([repr(float(t)), repr(float(self.states[i, 0])),
                                 repr(float(self.states[i, 1])), repr(float(u)) if u != "" else ""])


def clf_value(basis: MonomialBasis, x) -> float:
    """V(x) = ||psi(x)||^2."""
    psi = basis.eval(np.asarray(x, dtype=float))
    return float(psi @ psi)


def clf_value_closed_form(basis: MonomialBasis, x) -> float:
    """Equivalent closed form ||x||^2 (1 - x1^{2q}) / (1 - x1^2)."""
    x = np.asarray(x, dtype=float).ravel()
    x1sq = x[0] * x[0]
    norm_sq = x @ x
    if abs(1.0 - x1sq) < 1e-14:
        return float(norm_sq * basis.q)
    return float(norm_sq * (1.0 - x1sq ** basis.q) / (1.0 - x1sq))


def clf_rates_fields(basis: MonomialBasis, f0: Callable, f1: Callable, x) -> tuple[float, float]:
    """Lie derivatives of V along drift and input channel of the true plant."""
    x = np.asarray(x, dtype=float).ravel()
    psi = basis.eval(x)
    J = basis.jacobian(x)
    a = 2.0 * float(psi @ (J @ np.asarray(f0(x), dtype=float).ravel()))
    b = 2.0 * float(psi @ (J @ np.asarray(f1(x), dtype=float).ravel()))
    return a, b


def clf_rates_model(model: KoopmanHybridModel, x, channel: int = 0) -> tuple[float, float]:
    """Lie derivatives of V computed on the bilinear lifted model at z = psi(x)."""
    z = model.basis.eval(np.asarray(x, dtype=float).ravel())
    a = 2.0 * float(z @ (model.drift_matrix @ z))
    b = 2.0 * float(z @ (model.input_betas[channel] + model.input_gammas[channel] @ z))
    return a, b


def lin_sontag(a: float, b: float, bound: float = 1.0) -> float:
    """Bounded-control universal CLF formula, clamped to [-bound, bound]."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    if abs(b) < B_DEADBAND:
        return 0.0
    u = -(a + np.sqrt(a * a + b ** 4)) / (b * (1.0 + np.sqrt(1.0 + b * b)))
    return float(np.clip(u, -bound, bound))


def simulate(dynamics: Callable, controller: Callable, x0, dt: float,
             horizon: float) -> Trajectory:
    """Classical RK4 with zero-order-hold control over each step."""
    if dt <= 0 or horizon < dt:
        raise ValueError("need dt > 0 and horizon >= dt")
    steps = int(round(horizon / dt))
    x = np.asarray(x0, dtype=float).ravel()
    times = [0.0]
    states = [x.copy()]
    controls = []
    for step in range(steps):
        u = float(controller(x))
        k1 = np.asarray(dynamics(x, u), dtype=float)
        k2 = np.asarray(dynamics(x + 0.5 * dt * k1, u), dtype=float)
        k3 = np.asarray(dynamics(x + 0.5 * dt * k2, u), dtype=float)
        k4 = np.asarray(dynamics(x + dt * k3, u), dtype=float)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NonFinite(f"state became non-finite at step {step}")
        controls.append(u)
        times.append((step + 1) * dt)
        states.append(x.copy())
    return Trajectory(times=np.array(times), states=np.stack(states),
                      controls=np.array(controls))


def compare_trajectories(t1: Trajectory, t2: Trajectory) -> float:
    """Max over time of the Euclidean state distance; requires shared time grids."""
    if t1.times.size != t2.times.size or np.max(np.abs(t1.times - t2.times)) > 1e-12:
        raise GridMismatch("trajectories are on different time grids")
    return float(np.max(np.linalg.norm(t1.states - t2.states, axis=1)))


def make_truth_controller(basis: MonomialBasis, f0: Callable, f1: Callable,
                          bound: float = 1.0) -> Callable:
    def controller(x):
        a, b = clf_rates_fields(basis, f0, f1, x)
        return lin_sontag(a, b, bound)
    return controller


def make_model_controller(model: KoopmanHybridModel, bound: float = 1.0,
                          channel: int = 0) -> Callable:
    def controller(x):
        a, b = clf_rates_model(model, x, channel)
        return lin_sontag(a, b, bound)
    return controller
