"""Measured analysis quantities: P-norms, PL ratio, coupling ratio, the
minimax noise level, and the finite-difference gradient checker.

The norm convention here is Frobenius: ||M||_P = ||M P^(1/2)||_F and
||M||_P* = ||M P^(-1/2)||_F with P = gram + eta I. The Frobenius choice is
deliberate (vectorized identities such as <G, M> = <G P^(-1/2), M P^(1/2)>
and the Cauchy-Schwarz pairing hold exactly in it) and is documented here
because a spectral reading of the same symbols is also common.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DefinitenessError,
    FactorPair,
    SymFactor,
    make_ground_truth,
    make_rng,
    phase_ground_truth,
)
from .measurements import (
    MeasurementModel,
    clean_model,
    entry_ensemble,
    gaussian_ensemble,
    loss_and_grad_asym,
    loss_and_grad_sym,
    onebit_ensemble,
    phase_ensemble,
)


@dataclass(frozen=True)
class PGeometry:
    """The local metric P = gram + eta I (gram is X^T X or V^T V)."""

    gram: np.ndarray
    eta: float


def _p_roots(geom: PGeometry):
    """(P^(1/2), P^(-1/2)) via the r x r symmetric eigendecomposition."""
    w, v = np.linalg.eigh(geom.gram)
    w = w + geom.eta
    if w.min() <= 0:
        raise DefinitenessError("gram + eta*I is not positive definite")
    root = np.sqrt(w)
    return (v * root) @ v.conj().T, (v / root) @ v.conj().T


def p_norm(m: np.ndarray, geom: PGeometry) -> float:
    return float(np.linalg.norm(m @ _p_roots(geom)[0]))


def dual_p_norm(m: np.ndarray, geom: PGeometry) -> float:
    return float(np.linalg.norm(m @ _p_roots(geom)[1]))


def pl_ratio(model: MeasurementModel, x: SymFactor, eta: float) -> float:
    """Measured gradient-dominance ratio ||grad f_c(X)||_P*^2 / f_c(X).

    The clean gradient is taken against noiseless observations. Undefined at
    an exact fit (f_c = 0).
    """
    f_c, g_c = loss_and_grad_sym(clean_model(model), x)
    if f_c <= 0:
        raise ValueError("pl_ratio undefined at an exact fit (clean loss is zero)")
    geom = PGeometry(x.x.conj().T @ x.x, eta)
    return dual_p_norm(g_c, geom) ** 2 / f_c


def coupling_ratio(entry) -> float:
    """sqrt(f_clean) / eta for one trace record."""
    if entry.f_clean is None:
        raise ValueError("trace record carries no clean loss")
    if entry.eta <= 0:
        raise ValueError("coupling ratio needs eta > 0")
    return math.sqrt(entry.f_clean) / entry.eta


def minimax_level(sigma: float, n: int, r: int, m: int) -> float:
    """Noise floor sigma^2 * n * r * log(n) / m (natural log)."""
    return sigma**2 * n * r * math.log(n) / m


# ---------------------------------------------------------------------------
# finite-difference gradient checking


def fd_gradient(fun, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of a matrix.

    Complex inputs are differentiated in their real and imaginary parts
    separately and recombined as g_re + 1j * g_im, matching the
    conjugate-gradient convention of the analytic gradients.
    """
    if np.iscomplexobj(x):
        re = fd_gradient(lambda v: fun(v + 1j * x.imag), x.real.copy(), step)
        im = fd_gradient(lambda v: fun(x.real + 1j * v), x.imag.copy(), step)
        return re + 1j * im
    g = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        f_plus = fun(x)
        x[idx] = orig - step
        f_minus = fun(x)
        x[idx] = orig
        g[idx] = (f_plus - f_minus) / (2 * step)
    return g


def _rel_err(analytic: np.ndarray, fd: np.ndarray) -> float:
    return float(np.linalg.norm(analytic - fd) / max(np.linalg.norm(fd), 1e-300))


def gradient_check(points: int = 50, seed: int = 7, step: float = 1e-5) -> dict[str, float]:
    """Max norm-wise relative error, analytic vs finite differences, per family.

    Small noisy instances, ``points`` random evaluation points each.
    """
    rng = make_rng(seed)
    out: dict[str, float] = {}

    truth = make_ground_truth(6, 2, 10.0, seed=seed)
    model = MeasurementModel(gaussian_ensemble(truth, 40, 1e-3, seed + 1), truth)
    worst = 0.0
    for _ in range(points):
        x = rng.standard_normal((6, 3))
        _, g = loss_and_grad_sym(model, SymFactor(x))
        fd = fd_gradient(lambda v: loss_and_grad_sym(model, SymFactor(v))[0], x, step)
        worst = max(worst, _rel_err(g, fd))
    out["gaussian-sensing"] = worst

    truth2 = make_ground_truth(12, 3, 5.0, symmetric=False, seed=seed + 2)
    es = entry_ensemble(truth2.mstar[:, :9], 40, 1e-3, seed + 3)
    model2 = MeasurementModel(es)
    worst = 0.0
    for _ in range(points):
        u, v = rng.standard_normal((12, 3)), rng.standard_normal((9, 3))
        _, gu, gv = loss_and_grad_asym(model2, FactorPair(u, v))
        fd_u = fd_gradient(lambda w: loss_and_grad_asym(model2, FactorPair(w, v))[0], u, step)
        fd_v = fd_gradient(lambda w: loss_and_grad_asym(model2, FactorPair(u, w))[0], v, step)
        worst = max(worst, _rel_err(gu, fd_u), _rel_err(gv, fd_v))
    out["entry-sampling"] = worst

    truth3 = make_ground_truth(5, 2, 3.0, seed=seed + 4)
    model3 = MeasurementModel(onebit_ensemble(truth3, 200, 0.01, seed + 5), truth3)
    worst = 0.0
    for _ in range(points):
        x = 0.7 * rng.standard_normal((5, 2))
        _, g = loss_and_grad_sym(model3, SymFactor(x))
        fd = fd_gradient(lambda v: loss_and_grad_sym(model3, SymFactor(v))[0], x, step)
        worst = max(worst, _rel_err(g, fd))
    out["one-bit"] = worst

    truth4 = phase_ground_truth(6, seed + 6)
    model4 = MeasurementModel(phase_ensemble(truth4, 30, 1e-3, seed + 7), truth4)
    worst = 0.0
    for _ in range(points):
        x = rng.standard_normal((6, 1)) + 1j * rng.standard_normal((6, 1))
        _, g = loss_and_grad_sym(model4, SymFactor(x))
        fd = fd_gradient(lambda v: loss_and_grad_sym(model4, SymFactor(v))[0], x, step)
        worst = max(worst, _rel_err(g, fd))
    out["phase-retrieval"] = worst

    return out
