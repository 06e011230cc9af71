"""Small dense linear algebra, activations, seeded randomness and a
finite-difference gradient check.

Everything works in float64. Matrices are plain 2-D ``numpy.ndarray``.
"""
from __future__ import annotations

import zlib
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import DecompositionError, NumericalError, ShapeError

#: Bit generator used everywhere; recorded in model files so seeds are portable.
RNG_ALGORITHM = "PCG64"


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive definite ``a`` via Cholesky."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
        raise ShapeError(f"cannot solve system {a.shape} with rhs {b.shape}")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise DecompositionError(f"Cholesky factorization failed: {exc}") from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def spd_inverse_trace(a: np.ndarray) -> float:
    """Trace of ``inv(a)`` for SPD ``a``, computed from its Cholesky factor."""
    try:
        lower = scipy.linalg.cholesky(a, lower=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise DecompositionError(f"Cholesky factorization failed: {exc}") from exc
    # tr(A^-1) = ||L^-1||_F^2
    linv = scipy.linalg.solve_triangular(lower, np.eye(a.shape[0]), lower=True)
    return float(np.sum(linv * linv))


def tanh_act(x):
    return np.tanh(x)


def tanh_deriv(x):
    t = np.tanh(x)
    return 1.0 - t * t


def linear_act(x):
    return x


def linear_deriv(x):
    return np.ones_like(x) if isinstance(x, np.ndarray) else 1.0


def finite_diff_grad(
    f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    x = np.array(x, dtype=np.float64)
    grad = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = h
        hi = float(f(x + step))
        lo = float(f(x - step))
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericalError(f"non-finite function value at coordinate {i}")
        grad.flat[i] = (hi - lo) / (2.0 * h)
    return grad


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(root: int, purpose: str, *indices: int) -> int:
    """Child seed for one purpose (``"folds"``, ``"init"``, ...) of a root seed.

    The derivation is ``SeedSequence(root, spawn_key=(crc32(purpose), *indices))``
    so adding a new consumer never perturbs the streams of existing ones.
    """
    key = (zlib.crc32(purpose.encode("utf-8")), *(int(i) for i in indices))
    ss = np.random.SeedSequence(int(root), spawn_key=key)
    return int(ss.generate_state(1, dtype=np.uint64)[0])
