"""Gaussian-kernel nu-SVM in ball form (support vector data description).

The dual is::

    minimize    a'Ka - sum_i a_i k(x_i, x_i)
    subject to  0 <= a_i <= 1/(nu m),  sum_i a_i = 1

With a Gaussian kernel ``k(x, x) = 1`` so the linear term is the constant 1.
Feature vectors here are LBP histograms whose pairwise distances are tiny
compared to the bandwidth, which puts every kernel entry within ~1e-3 of 1.
All internal arithmetic therefore works with ``Q = K - 1`` (computed with
``expm1``); on the feasible set ``a'Ka = 1 + a'Qa`` and the squared
feature-space distance to the center reduces to ``a'Qa - 2 (Qa)_i`` without
the catastrophic cancellation of the textbook expansion.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceWarning, InvalidConfig, NuTooSmall, TooFew

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelSpec:
    bandwidth: float
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise InvalidConfig(f"unsupported kernel {self.kind!r}")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise InvalidConfig(f"kernel bandwidth must be positive, got {self.bandwidth}")

    @classmethod
    def auto(cls, m: int) -> "KernelSpec":
        """Bandwidth 1/m for m training samples."""
        return cls(bandwidth=1.0 / m)


@dataclass(frozen=True)
class QpSettings:
    nu: float = 0.4
    max_iters: int = 20000
    tolerance: float = 1e-8
    # The solver is deterministic; the seed is carried for provenance only.
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.nu < 1.0:
            raise InvalidConfig(f"nu must lie in (0, 1), got {self.nu}")
        if self.max_iters < 1 or not self.tolerance > 0:
            raise InvalidConfig("max_iters must be >= 1 and tolerance > 0")

    def to_dict(self) -> dict:
        return {"nu": self.nu, "max_iters": self.max_iters, "tolerance": self.tolerance, "rng_seed": self.rng_seed}


def _features(x) -> np.ndarray:
    x = np.array([getattr(v, "bins", v) for v in x], dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return x


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def gram(features, kernel: KernelSpec) -> np.ndarray:
    """Gaussian Gram matrix ``exp(-||x_i - x_j||^2 / s)``."""
    x = _features(features)
    return np.exp(-_sqdist(x, x) / kernel.bandwidth)


def gram_minus_one(a, b, kernel: KernelSpec) -> np.ndarray:
    """``k(a_i, b_j) - 1`` evaluated without cancellation."""
    return np.expm1(-_sqdist(_features(a), _features(b)) / kernel.bandwidth)


def project_bounded_simplex(y: np.ndarray, upper: float, total: float = 1.0) -> np.ndarray:
    """Euclidean projection onto ``{0 <= a <= upper, sum(a) = total}``.

    The projection is ``clip(y - tau, 0, upper)`` for the unique ``tau`` that
    meets the sum; the sum is piecewise linear and non-increasing in ``tau``
    with kinks at ``y_i`` and ``y_i - upper``, so ``tau`` is found exactly by
    scanning the sorted kinks.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.size * upper < total:
        raise ValueError("bounded simplex is empty")
    kinks = np.unique(np.concatenate([y - upper, y]))
    sums = np.clip(y[None, :] - kinks[:, None], 0.0, upper).sum(axis=1)
    # sums decreases along kinks; find the bracketing pair
    k = np.searchsorted(-sums, -total, side="right") - 1
    if k < 0:
        tau = kinks[0]
    elif k >= kinks.size - 1:
        tau = kinks[-1]
    else:
        lo, hi = kinks[k], kinks[k + 1]
        s_lo, s_hi = sums[k], sums[k + 1]
        tau = lo if s_lo == s_hi else lo + (s_lo - total) * (hi - lo) / (s_lo - s_hi)
    return np.clip(y - tau, 0.0, upper)


def kkt_residual(Q: np.ndarray, alpha: np.ndarray, upper: float) -> float:
    """Sup-norm of the projected-gradient step ``a - P(a - grad)``; zero exactly at optimum."""
    grad = 2.0 * Q @ alpha
    return float(np.max(np.abs(alpha - project_bounded_simplex(alpha - grad, upper))))


def _polish(Q, alpha, upper, margin):
    """Solve the equality-constrained problem on the face identified by ``alpha``."""
    m = alpha.size
    at_upper = alpha >= upper - margin
    free = (alpha > margin) & ~at_upper
    nf = int(free.sum())
    if nf == 0:
        return None
    rest = 1.0 - at_upper.sum() * upper
    A = np.zeros((nf + 1, nf + 1))
    A[:nf, :nf] = 2.0 * Q[np.ix_(free, free)]
    A[:nf, nf] = -1.0
    A[nf, :nf] = 1.0
    rhs = np.zeros(nf + 1)
    rhs[:nf] = -2.0 * upper * Q[np.ix_(free, at_upper)].sum(axis=1)
    rhs[nf] = rest
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    candidate = np.zeros(m)
    candidate[at_upper] = upper
    candidate[free] = sol[:nf]
    if np.any(candidate < -1e-12) or np.any(candidate > upper + 1e-12):
        return None
    return np.clip(candidate, 0.0, upper)


def solve_ball_dual(Q: np.ndarray, upper: float, tolerance: float = 1e-8, max_iters: int = 20000):
    """Minimize ``a'Qa`` over the bounded simplex by spectral projected gradient.

    Steps use a Barzilai-Borwein length, Armijo backtracking along the
    projected direction, and a final exact solve on the identified face.
    Returns ``(alpha, kkt_residual, iterations, converged)``.
    """
    m = Q.shape[0]
    alpha = project_bounded_simplex(np.full(m, 1.0 / m), upper)
    grad = 2.0 * Q @ alpha
    scale = float(np.abs(2.0 * Q).sum(axis=1).max())
    step = 1.0 / scale if scale > 0 else 1.0
    residual = kkt_residual(Q, alpha, upper)
    it = 0
    while it < max_iters and residual > tolerance:
        it += 1
        d = project_bounded_simplex(alpha - step * grad, upper) - alpha
        gd = float(grad @ d)
        if gd >= 0.0:
            # rounding noise only; shrink and retry from the same point
            step *= 0.5
            if step < 1e-300:
                break
            continue
        dQd = max(float(d @ Q @ d), 0.0)
        t = 1.0
        # exact quadratic change: t*gd + t^2*dQd
        while t * gd + t * t * dQd > 1e-4 * t * gd:
            t *= 0.5
        new_alpha = alpha + t * d
        new_grad = 2.0 * Q @ new_alpha
        s, y = new_alpha - alpha, new_grad - grad
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else 1e12
        step = min(max(step, 1e-12), 1e12)
        alpha, grad = new_alpha, new_grad
        residual = kkt_residual(Q, alpha, upper)

    for margin in (1e-10, 1e-8, 1e-6):
        polished = _polish(Q, alpha, upper, margin)
        if polished is None:
            continue
        r = kkt_residual(Q, polished, upper)
        if r <= residual:
            alpha, residual = polished, r
            break
    return alpha, residual, it, residual <= tolerance


@dataclass(frozen=True)
class BallModel:
    alphas: np.ndarray = field(repr=False)
    training_features: np.ndarray = field(repr=False)
    kernel: KernelSpec
    nu: float
    center_norm_sq: float
    radius_sq: float
    boundary_sv_indices: tuple[int, ...]
    kkt_residual: float = 0.0
    iterations: int = 0
    converged: bool = True

    @property
    def m(self) -> int:
        return self.alphas.size

    @property
    def upper(self) -> float:
        return 1.0 / (self.nu * self.m)

    @property
    def objective(self) -> float:
        """Dual objective in its stated form, ``a'Ka - sum a_i k(x_i, x_i)``."""
        return self.center_norm_sq - float(self.alphas.sum())

    def _quad(self) -> float:
        q = gram_minus_one(self.training_features, self.training_features, self.kernel)
        return float(self.alphas @ q @ self.alphas)

    def distances_sq(self, features) -> np.ndarray:
        kc = gram_minus_one(features, self.training_features, self.kernel)
        a_sum = float(self.alphas.sum())
        d = (1.0 - a_sum) ** 2 - 2.0 * kc @ self.alphas + self._quad()
        return np.maximum(d, 0.0)

    def to_dict(self) -> dict:
        return {
            "kernel": {"kind": self.kernel.kind, "bandwidth": self.kernel.bandwidth},
            "nu": self.nu,
            "alphas": self.alphas.tolist(),
            "training_features": self.training_features.tolist(),
            "center_norm_sq": self.center_norm_sq,
            "radius_sq": self.radius_sq,
            "boundary_sv_indices": list(self.boundary_sv_indices),
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BallModel":
        return cls(
            alphas=np.array(data["alphas"], dtype=np.float64),
            training_features=np.array(data["training_features"], dtype=np.float64),
            kernel=KernelSpec(bandwidth=data["kernel"]["bandwidth"], kind=data["kernel"]["kind"]),
            nu=data["nu"],
            center_norm_sq=data["center_norm_sq"],
            radius_sq=data["radius_sq"],
            boundary_sv_indices=tuple(data["boundary_sv_indices"]),
            kkt_residual=data.get("kkt_residual", 0.0),
            iterations=data.get("iterations", 0),
            converged=data.get("converged", True),
        )

    def to_json(self) -> str:
        # json writes floats with repr, the shortest string that round-trips
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BallModel":
        return cls.from_dict(json.loads(text))


def train(features, settings: QpSettings | None = None, kernel: KernelSpec | None = None) -> BallModel:
    """Fit the ball to all ``features`` (m vectors); bandwidth defaults to 1/m."""
    settings = settings or QpSettings()
    x = _features(features)
    m = x.shape[0]
    if m < 3:
        raise TooFew(f"need at least 3 training vectors, got {m}")
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    if not settings.nu * m > 2:
        raise NuTooSmall(f"nu must exceed 2/m = {2 / m:.4g} for m={m} samples (got nu={settings.nu})")
    kernel = kernel or KernelSpec.auto(m)
    upper = 1.0 / (settings.nu * m)

    Q = gram_minus_one(x, x, kernel)
    alpha, residual, iters, converged = solve_ball_dual(Q, upper, settings.tolerance, settings.max_iters)
    if not converged:
        warnings.warn(
            f"QP stopped after {iters} iterations with KKT residual {residual:.3g} > {settings.tolerance:g}",
            ConvergenceWarning,
            stacklevel=2,
        )

    quad = float(alpha @ Q @ alpha)
    a_sum = float(alpha.sum())
    dist = np.maximum((1.0 - a_sum) ** 2 - 2.0 * Q @ alpha + quad, 0.0)
    tol = settings.tolerance
    boundary = np.flatnonzero((alpha > tol) & (alpha < upper - tol))
    if boundary.size:
        radius_sq = float(dist[boundary].mean())
    else:
        radius_sq = float(dist[alpha > tol].max())
    log.debug("trained ball: m=%d iters=%d residual=%.3g R2=%.6g", m, iters, residual, radius_sq)
    return BallModel(
        alphas=alpha,
        training_features=x,
        kernel=kernel,
        nu=settings.nu,
        center_norm_sq=a_sum**2 + quad,
        radius_sq=radius_sq,
        boundary_sv_indices=tuple(int(i) for i in boundary),
        kkt_residual=residual,
        iterations=iters,
        converged=converged,
    )


def distance_sq(model: BallModel, x) -> float:
    """Squared kernel-space distance from ``x`` to the ball center, clamped at 0."""
    return float(model.distances_sq([x])[0])


def decide(model: BallModel, x) -> tuple[int, float]:
    """``(+1 inside / -1 outside, margin)`` with margin ``R^2 - distance_sq``; the boundary counts as inside."""
    margin = model.radius_sq - distance_sq(model, x)
    return (1 if margin >= 0 else -1), margin


def rank_by_margin(model: BallModel, features) -> list[tuple[int, float]]:
    """Indices of ``features`` ordered from most to least outlying.

    Ascending margin; exact ties go to the lower index.
    """
    margins = model.radius_sq - model.distances_sq(features)
    return sorted(((i, float(mg)) for i, mg in enumerate(margins)), key=lambda t: (t[1], t[0]))
