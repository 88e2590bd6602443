"""Static hybrid models: KRR around a reference, joint subspace fit, and
simplex-constrained mixtures over a nonlinearly parameterized family.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import pdist

from . import simplex_qp
from .errors import DimensionMismatch, DomainError
from .kernels import KernelSpec, cross_gram, gram
from .linalg import solve_spd

DUPLICATE_TOL = 1e-9


@dataclass(frozen=True)
class Dataset:
    """Paired (input, target) sample; inputs are stored as an (n, d) array."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.targets, dtype=float).ravel()
        if X.shape[0] != y.size:
            raise DimensionMismatch(f"{X.shape[0]} inputs vs {y.size} targets")
        if X.shape[0] == 0:
            raise DimensionMismatch("empty dataset")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DomainError("dataset contains NaN/Inf")
        if X.shape[0] > 1 and pdist(X).min() < DUPLICATE_TOL:
            raise DomainError("duplicate inputs (pairwise distance < 1e-9)")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)

    @property
    def size(self) -> int:
        return self.inputs.shape[0]


def _residual_term(anchors: np.ndarray, coeffs: np.ndarray, kernel: KernelSpec, x) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    squeeze = X.ndim == 0
    pts = np.atleast_1d(X)
    K = cross_gram(kernel, pts if pts.ndim > 1 else pts[:, None], anchors)
    out = K @ coeffs
    return float(out[0]) if squeeze else out


@dataclass(frozen=True)
class ReferenceKrrModel:
    """h(x) = h_ref(x) + sum_i c_i k(x_i, x)."""

    reference: Callable
    anchors: np.ndarray
    coeffs: np.ndarray
    kernel: KernelSpec
    lam: float

    def predict(self, x):
        base = np.asarray(self.reference(np.asarray(x, dtype=float)), dtype=float)
        return base + _residual_term(self.anchors, self.coeffs, self.kernel, x)

    def to_json(self) -> str:
        return json.dumps({
            "model": "reference_krr",
            "kernel": self.kernel.to_dict(),
            "anchors": self.anchors.tolist(),
            "coeffs": self.coeffs.tolist(),
            "lambda": self.lam,
        })


@dataclass(frozen=True)
class SubspaceModel:
    """h(x) = phi(x)' theta + sum_i c_i k(x_i, x)."""

    theta: np.ndarray
    feature_map: Callable
    anchors: np.ndarray
    coeffs: np.ndarray
    kernel: KernelSpec
    lambda_theta: float
    lambda_r: float

    def predict(self, x):
        feats = np.asarray(self.feature_map(np.asarray(x, dtype=float)), dtype=float)
        base = feats @ self.theta
        return base + _residual_term(self.anchors, self.coeffs, self.kernel, x)

    def to_json(self) -> str:
        return json.dumps({
            "model": "subspace",
            "kernel": self.kernel.to_dict(),
            "anchors": self.anchors.tolist(),
            "coeffs": self.coeffs.tolist(),
            "theta": self.theta.tolist(),
            "lambda_theta": self.lambda_theta,
            "lambda_r": self.lambda_r,
        })


@dataclass(frozen=True)
class MixtureModel:
    """h(x) = sum_j b_j h(x | theta_j) + sum_i c_i k(x_i, x), b on the simplex."""

    family: Callable  # (x, theta) -> real(s)
    theta_samples: np.ndarray
    weights: np.ndarray
    anchors: np.ndarray
    coeffs: np.ndarray
    kernel_x: KernelSpec
    kernel_theta: KernelSpec
    lambda_omega: float
    lambda_r: float
    qp: simplex_qp.QpSolution = field(repr=False, default=None)

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        cols = np.stack([np.atleast_1d(np.asarray(self.family(x, th), dtype=float))
                         for th in self.theta_samples], axis=-1)
        base = cols @ self.weights
        if x.ndim == 0:
            base = float(base[0])
        return base + _residual_term(self.anchors, self.coeffs, self.kernel_x, x)

    def effective_parameter(self) -> np.ndarray:
        """Weighted average of the sampled parameters; lies in their convex hull."""
        return self.weights @ self.theta_samples

    def to_json(self) -> str:
        return json.dumps({
            "model": "mixture",
            "kernel_x": self.kernel_x.to_dict(),
            "kernel_theta": self.kernel_theta.to_dict(),
            "anchors": self.anchors.tolist(),
            "coeffs": self.coeffs.tolist(),
            "theta_samples": self.theta_samples.tolist(),
            "weights": self.weights.tolist(),
            "lambda_omega": self.lambda_omega,
            "lambda_r": self.lambda_r,
        })


def fit_reference_krr(data: Dataset, reference: Callable, kernel: KernelSpec,
                      lam: float) -> ReferenceKrrModel:
    """Closed-form ridge fit of the residual around a fixed reference model."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    X = data.inputs
    eta = data.targets - np.asarray(reference(X.squeeze(-1) if X.shape[1] == 1 else X),
                                    dtype=float).ravel()
    G = gram(kernel, X)
    c = solve_spd(G + lam * np.eye(data.size), eta)
    return ReferenceKrrModel(reference=reference, anchors=X, coeffs=c,
                             kernel=kernel, lam=lam)


def fit_subspace(data: Dataset, feature_map: Callable, kernel: KernelSpec,
                 lambda_theta: float, lambda_r: float) -> SubspaceModel:
    """Joint fit of linear parameters theta and the kernel residual.

    Solves the stacked system
        ([Phi'; G'] [Phi G] + diag(l_theta I, l_r G)) [theta; c] = [Phi'; G'] y
    symmetrized and solved with the jittered SPD path.
    """
    if lambda_theta <= 0 or lambda_r <= 0:
        raise DomainError("regularization weights must be positive")
    X = data.inputs
    y = data.targets
    Phi = np.asarray(feature_map(X.squeeze(-1) if X.shape[1] == 1 else X), dtype=float)
    if Phi.ndim == 1:
        Phi = Phi[:, None]
    n, N = data.size, Phi.shape[1]
    G = gram(kernel, X)
    D = np.hstack([Phi, G])
    M = D.T @ D
    M[:N, :N] += lambda_theta * np.eye(N)
    M[N:, N:] += lambda_r * G
    M = 0.5 * (M + M.T)
    sol = solve_spd(M, D.T @ y)
    return SubspaceModel(theta=sol[:N], feature_map=feature_map, anchors=X,
                         coeffs=sol[N:], kernel=kernel,
                         lambda_theta=lambda_theta, lambda_r=lambda_r)


def subspace_objective(data: Dataset, feature_map: Callable, kernel: KernelSpec,
                       lambda_theta: float, lambda_r: float,
                       theta, coeffs) -> float:
    """Direct evaluation of the joint-fit objective at a given (theta, c)."""
    X = data.inputs
    Phi = np.asarray(feature_map(X.squeeze(-1) if X.shape[1] == 1 else X), dtype=float)
    if Phi.ndim == 1:
        Phi = Phi[:, None]
    G = gram(kernel, X)
    theta = np.asarray(theta, dtype=float).ravel()
    c = np.asarray(coeffs, dtype=float).ravel()
    resid = Phi @ theta + G @ c - data.targets
    return float(resid @ resid + lambda_theta * (theta @ theta) + lambda_r * (c @ G @ c))


def fit_mixture(data: Dataset, family: Callable, theta_samples,
                kernel_x: KernelSpec, kernel_theta: KernelSpec,
                lambda_omega: float, lambda_r: float,
                tol: float = simplex_qp.DEFAULT_TOL,
                max_iter: int = simplex_qp.DEFAULT_MAX_ITER) -> MixtureModel:
    """Simplex-constrained QP fit of mixture weights plus kernel residual.

    Objective: ||H b + G_x c - y||^2 + l_omega b'G_theta b + l_r c'G_x c.
    """
    if lambda_omega < 0 or lambda_r <= 0:
        raise DomainError("need lambda_omega >= 0 and lambda_r > 0")
    theta_samples = np.asarray(theta_samples, dtype=float)
    if theta_samples.ndim == 1:
        theta_samples = theta_samples[:, None]
    m = theta_samples.shape[0]
    X = data.inputs
    y = data.targets
    n = data.size
    xs = X.squeeze(-1) if X.shape[1] == 1 else X
    H = np.column_stack([np.asarray(family(xs, th), dtype=float).ravel()
                         for th in theta_samples])
    Gx = gram(kernel_x, X)
    Gt = gram(kernel_theta, theta_samples)
    D = np.hstack([H, Gx])
    Q = D.T @ D
    Q[:m, :m] += lambda_omega * Gt
    Q[m:, m:] += lambda_r * Gx
    Q = 0.5 * (Q + Q.T)
    q_lin = -2.0 * (D.T @ y)
    problem = simplex_qp.SimplexQpProblem(Q=Q, q_lin=q_lin, m_simplex=m, n_free=n)
    sol = simplex_qp.solve(problem, tol=tol, max_iter=max_iter)
    return MixtureModel(family=family, theta_samples=theta_samples, weights=sol.b,
                        anchors=X, coeffs=sol.c_free, kernel_x=kernel_x,
                        kernel_theta=kernel_theta, lambda_omega=lambda_omega,
                        lambda_r=lambda_r, qp=sol)


def mixture_objective(data: Dataset, family: Callable, theta_samples,
                      kernel_x: KernelSpec, kernel_theta: KernelSpec,
                      lambda_omega: float, lambda_r: float, weights, coeffs) -> float:
    """Direct evaluation of the mixture objective at a given (b, c)."""
    theta_samples = np.asarray(theta_samples, dtype=float)
    if theta_samples.ndim == 1:
        theta_samples = theta_samples[:, None]
    X = data.inputs
    xs = X.squeeze(-1) if X.shape[1] == 1 else X
    H = np.column_stack([np.asarray(family(xs, th), dtype=float).ravel()
                         for th in theta_samples])
    Gx = gram(kernel_x, X)
    Gt = gram(kernel_theta, theta_samples)
    b = np.asarray(weights, dtype=float).ravel()
    c = np.asarray(coeffs, dtype=float).ravel()
    resid = H @ b + Gx @ c - data.targets
    return float(resid @ resid + lambda_omega * (b @ Gt @ b) + lambda_r * (c @ Gx @ c))


def predict(model, x):
    """Interpretable part plus kernel residual, for any fitted model."""
    return model.predict(x)


def rmse(model, data: Dataset) -> float:
    xs = data.inputs.squeeze(-1) if data.inputs.shape[1] == 1 else data.inputs
    pred = np.asarray(model.predict(xs), dtype=float).ravel()
    return float(np.sqrt(np.mean((pred - data.targets) ** 2)))
