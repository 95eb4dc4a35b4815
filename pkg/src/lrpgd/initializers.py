"""Initialization schemes: oracle spectral, data-driven spectral, small random."""

from __future__ import annotations

import numpy as np

from .core import FactorPair, GroundTruth, Iterate, SymFactor, make_rng, svd_top_r
from .measurements import EntrySampling, GaussianSensing, MeasurementModel


def _fit_rank(factor: np.ndarray, r: int) -> np.ndarray:
    """Zero-pad (or truncate to the leading columns) to n x r."""
    n, r_have = factor.shape
    if r <= r_have:
        return factor[:, :r].copy()
    out = np.zeros((n, r), dtype=factor.dtype)
    out[:, :r_have] = factor
    return out


def _gauss_like(rng: np.random.Generator, shape, complex_: bool) -> np.ndarray:
    if complex_:
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return rng.standard_normal(shape)


def spectral_oracle(
    truth: GroundTruth, r: int, perturb_scale: float = 0.1, seed: int = 0
) -> Iterate:
    """Exact factor of the truth (padded to rank r) plus a Gaussian perturbation.

    With perturb_scale = 0 and r >= true rank the product reproduces the
    target exactly. Complex truths get complex perturbations; the
    perturbation draw is not orthonormalized.
    """
    rng = make_rng(seed)
    complex_ = np.iscomplexobj(truth.factor)
    base = _fit_rank(truth.factor, r)
    if truth.symmetric:
        return SymFactor(base + perturb_scale * _gauss_like(rng, base.shape, complex_))
    right = _fit_rank(truth.factor_right, r)
    return FactorPair(
        base + perturb_scale * _gauss_like(rng, base.shape, complex_),
        right + perturb_scale * _gauss_like(rng, right.shape, complex_),
    )


def spectral_data(model: MeasurementModel, r: int) -> Iterate:
    """Top-r spectral factor of a measurement-derived surrogate matrix.

    Gaussian sensing: surrogate (1/m) sum_i y_i (A_i + A_i^T)/2, eigenvalues
    clamped at zero. Entry sampling: the zero-filled rescaled matrix
    (1/p) P_omega(Y). Deterministic given the model. The 1-bit and phaseless
    families have no spectral surrogate here and are rejected.
    """
    data = model.data
    if isinstance(data, GaussianSensing):
        m = len(data.y)
        s = np.einsum("m,mij->ij", data.y, data.a) / m
        s = (s + s.T) / 2
        w, v = np.linalg.eigh(s)
        top = np.argsort(w)[::-1][:r]
        lam = np.maximum(w[top], 0.0)
        return SymFactor(v[:, top] * np.sqrt(lam))
    if isinstance(data, EntrySampling):
        n1, n2 = data.shape
        p = data.count / (n1 * n2)
        filled = np.zeros((n1, n2))
        filled[data.rows, data.cols] = data.y_obs / p
        q, sigma, s = svd_top_r(filled, r)
        root = np.sqrt(sigma)
        return FactorPair(q * root, s * root)
    raise ValueError(f"no spectral surrogate for family {model.family}")


def small_init(n: int, r: int, scale: float, seed: int = 0, complex_: bool = False) -> SymFactor:
    """Tiny random start scale * Qhat with standard-normal Qhat."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    rng = make_rng(seed)
    return SymFactor(scale * _gauss_like(rng, (n, r), complex_))
