"""Measurement families and their losses/gradients.

Four families are supported: linear Gaussian sensing, entry sampling
(completion) with a sparse residual path, 1-bit sensing with logistic loss,
and complex phase retrieval. Each exposes the observed loss, the clean
(noiseless-observation) loss, and analytic gradients with respect to the
factors.

Gradient conventions
--------------------
* Gaussian sensing stores the raw (unsymmetrized) sensing matrices; the
  symmetric-factor gradient uses the symmetrized form (A_i + A_i^T), which is
  the correct derivative of <A_i, X X^T> for arbitrary A_i.
* Complex factors use the conjugate-gradient convention: the returned matrix
  G is the direction such that X - alpha * G decreases the loss to first
  order (equivalently twice the Wirtinger derivative with respect to conj(X)).

All reductions over measurements are sequential numpy reductions and
deterministic for a fixed input.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse
from scipy.special import expit

from .core import FactorPair, GroundTruth, Iterate, SymFactor, make_rng

LOG_FLOOR = 1e-300  # clamp for logistic log arguments; avoids -inf at saturation


class MissingGroundTruthError(Exception):
    """Clean-loss diagnostics require a model with ground truth attached."""


# ---------------------------------------------------------------------------
# family data


@dataclass(frozen=True)
class GaussianSensing:
    """m dense sensing matrices a[i] (n x n) and observations y."""

    a: np.ndarray  # (m, n, n)
    y: np.ndarray  # (m,)
    sigma: float
    seed: int

    def __post_init__(self):
        if self.a.ndim != 3 or self.a.shape[1] != self.a.shape[2]:
            raise ValueError(f"sensing matrices must be (m, n, n), got {self.a.shape}")
        if self.a.shape[0] != self.y.shape[0] or self.a.shape[0] < 1:
            raise ValueError("need one observation per sensing matrix, m >= 1")


@dataclass(frozen=True)
class EntrySampling:
    """Observed entries (rows[k], cols[k]) -> y_obs[k] of an n1 x n2 matrix."""

    rows: np.ndarray  # (|omega|,) int
    cols: np.ndarray
    y_obs: np.ndarray
    shape: tuple[int, int]
    sigma: float
    seed: int

    def __post_init__(self):
        n1, n2 = self.shape
        if len(self.rows) != len(self.cols) or len(self.rows) != len(self.y_obs):
            raise ValueError("rows, cols, y_obs must have equal length")
        if self.rows.min() < 0 or self.rows.max() >= n1 or self.cols.min() < 0 or self.cols.max() >= n2:
            raise ValueError("observed indices out of range")
        flat = self.rows.astype(np.int64) * n2 + self.cols
        if len(np.unique(flat)) != len(flat):
            raise ValueError("duplicate observed entries")

    @property
    def count(self) -> int:
        return len(self.y_obs)

    @functools.cached_property
    def _csr_structure(self):
        # row-major ordering and index pointer, computed once; makes each
        # sparse-residual build a plain O(|omega|) fill with no sorting
        order = np.lexsort((self.cols, self.rows))
        indptr = np.zeros(self.shape[0] + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.rows, minlength=self.shape[0]), out=indptr[1:])
        return order, self.cols[order], indptr


@dataclass(frozen=True)
class OneBitData:
    """Empirical 1-frequencies per entry; trials=None is the population limit."""

    alpha_hat: np.ndarray  # (n, n) in [0, 1]
    trials: int | None
    sigma: float
    seed: int

    def __post_init__(self):
        if self.alpha_hat.min() < 0 or self.alpha_hat.max() > 1:
            raise ValueError("alpha_hat entries must lie in [0, 1]")
        if self.trials is not None and self.trials < 1:
            raise ValueError("trials must be >= 1 (or None for the population limit)")


@dataclass(frozen=True)
class PhaseRetrievalData:
    """m complex measurement vectors a[i] (rows of ``a``) and magnitudes y."""

    a: np.ndarray  # (m, n) complex
    y: np.ndarray  # (m,)
    sigma: float
    seed: int

    def __post_init__(self):
        if self.a.ndim != 2 or self.a.shape[0] != self.y.shape[0]:
            raise ValueError("need one observation per measurement vector")


FamilyData = GaussianSensing | EntrySampling | OneBitData | PhaseRetrievalData

_FAMILY_TAGS = {
    GaussianSensing: "gaussian-sensing",
    EntrySampling: "entry-sampling",
    OneBitData: "one-bit",
    PhaseRetrievalData: "phase-retrieval",
}


@dataclass(frozen=True)
class MeasurementModel:
    """One active measurement family, optionally with its generating truth."""

    data: FamilyData
    truth: GroundTruth | None = None

    @property
    def family(self) -> str:
        return _FAMILY_TAGS[type(self.data)]

    @property
    def m(self) -> int:
        if isinstance(self.data, OneBitData):
            return self.data.alpha_hat.size
        if isinstance(self.data, EntrySampling):
            return self.data.count
        return len(self.data.y)


# ---------------------------------------------------------------------------
# ensembles


def gaussian_ensemble(truth: GroundTruth, m: int, sigma: float, seed: int) -> GaussianSensing:
    """i.i.d. standard-normal sensing matrices; y_i = <A_i, M*> + N(0, sigma^2).

    Draw order (fixed for reproducibility): all sensing matrices, then the
    noise vector.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = make_rng(seed)
    n = truth.n
    a = rng.standard_normal((m, n, n))
    eps = rng.standard_normal(m)
    y = np.einsum("mij,ij->m", a, truth.mstar) + sigma * eps
    return GaussianSensing(a, y, float(sigma), int(seed))


def entry_ensemble(mstar: np.ndarray, count: int, sigma: float, seed: int) -> EntrySampling:
    """Sample ``count`` entries of mstar without replacement, plus noise."""
    n1, n2 = mstar.shape
    if not 1 <= count <= n1 * n2:
        raise ValueError(f"count must be in [1, {n1 * n2}]")
    rng = make_rng(seed)
    flat = rng.choice(n1 * n2, size=count, replace=False)
    rows, cols = (flat // n2).astype(np.int64), (flat % n2).astype(np.int64)
    y = mstar[rows, cols] + sigma * rng.standard_normal(count)
    return EntrySampling(rows, cols, y, (n1, n2), float(sigma), int(seed))


def onebit_ensemble(truth: GroundTruth, trials: int, sigma: float, seed: int) -> OneBitData:
    """Average of ``trials`` Bernoulli draws with success sigmoid(M* + eps).

    The Gaussian perturbation eps is drawn once per entry, not per trial;
    alpha_hat[i, j] is the observed frequency of ones.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = make_rng(seed)
    s = truth.mstar + sigma * rng.standard_normal(truth.mstar.shape)
    alpha = rng.binomial(trials, expit(s)) / trials
    return OneBitData(alpha, int(trials), float(sigma), int(seed))


def onebit_population(truth: GroundTruth, sigma: float = 0.0, seed: int = 0) -> OneBitData:
    """Infinite-trials limit: alpha_hat = sigmoid(M* + eps) exactly."""
    rng = make_rng(seed)
    s = truth.mstar + sigma * rng.standard_normal(truth.mstar.shape)
    return OneBitData(expit(s), None, float(sigma), int(seed))


def phase_ensemble(truth: GroundTruth, m: int, sigma: float, seed: int) -> PhaseRetrievalData:
    """Circular complex normal vectors a_i; y_i = a_i^H M* a_i + N(0, sigma^2).

    Entries are CN(0, 1): real and imaginary parts N(0, 1/2), so
    E[a a^H] = I.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = make_rng(seed)
    n = truth.n
    a = np.sqrt(0.5) * (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n)))
    y = np.real(np.einsum("mi,ij,mj->m", a.conj(), truth.mstar, a)) + sigma * rng.standard_normal(m)
    return PhaseRetrievalData(a, y, float(sigma), int(seed))


# ---------------------------------------------------------------------------
# losses and gradients


def _gaussian_inner(data: GaussianSensing, p: np.ndarray) -> np.ndarray:
    return np.einsum("mij,ij->m", data.a, p)


def loss_and_grad_sym(model: MeasurementModel, x: SymFactor):
    """Loss and n x r gradient for a symmetric iterate.

    Dispatches on the model family; entry sampling has no symmetric form and
    is rejected.
    """
    data = model.data
    if isinstance(data, GaussianSensing):
        m = len(data.y)
        res = _gaussian_inner(data, x.product()) - data.y
        g = np.einsum("m,mij->ij", res, data.a)
        grad = (2.0 / m) * ((g + g.T) @ x.x)
        return float(np.mean(res**2)), grad
    if isinstance(data, OneBitData):
        return onebit_loss_grad(data, x)
    if isinstance(data, PhaseRetrievalData):
        return phase_loss_grad(data, x.x)
    raise ValueError(f"no symmetric loss for family {model.family}")


def loss_and_grad_asym(model: MeasurementModel, fp: FactorPair):
    """Loss and (grad_u, grad_v) for an asymmetric iterate.

    Entry sampling goes through the sparse residual, costing O(r |omega|)
    time and O(|omega|) memory.
    """
    data = model.data
    if isinstance(data, GaussianSensing):
        m = len(data.y)
        res = _gaussian_inner(data, fp.product()) - data.y
        g = np.einsum("m,mij->ij", res, data.a)
        return float(np.mean(res**2)), (2.0 / m) * (g @ fp.v), (2.0 / m) * (g.T @ fp.u)
    if isinstance(data, EntrySampling):
        res = np.einsum("ij,ij->i", fp.u[data.rows], fp.v[data.cols]) - data.y_obs
        e = _residual_to_sparse(data, res)
        return float(np.mean(res**2)), e @ fp.v, e.T @ fp.u
    raise ValueError(f"no asymmetric loss for family {model.family}")


def _residual_to_sparse(data: EntrySampling, res: np.ndarray) -> scipy.sparse.csr_matrix:
    vals = (2.0 / data.count) * res
    order, sorted_cols, indptr = data._csr_structure
    return scipy.sparse.csr_matrix((vals[order], sorted_cols, indptr), shape=data.shape)


def sparse_residual(data: EntrySampling, fp: FactorPair) -> scipy.sparse.csr_matrix:
    """Sparse gradient matrix E with E_ij = (2/|omega|) ((U V^T)_ij - y_ij) on omega."""
    res = np.einsum("ij,ij->i", fp.u[data.rows], fp.v[data.cols]) - data.y_obs
    return _residual_to_sparse(data, res)


def onebit_loss_grad(data: OneBitData, x: SymFactor):
    """Logistic loss of sigmoid(X X^T) against alpha_hat, summed over entries.

    The loss is the plain sum (not the per-entry mean): the reference step
    sizes for this family are calibrated against the summed form, which is
    what makes them converge within the documented iteration budgets.
    """
    s = x.product()
    p = expit(s)
    f = np.sum(
        -data.alpha_hat * np.log(np.maximum(p, LOG_FLOOR))
        - (1.0 - data.alpha_hat) * np.log(np.maximum(1.0 - p, LOG_FLOOR))
    )
    r = p - data.alpha_hat
    return float(f), (r + r.T) @ x.x


def onebit_entropy_floor(data: OneBitData) -> float:
    """Infimum of the 1-bit loss: the entropy of alpha_hat, summed over entries."""
    a = data.alpha_hat
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = -a * np.log(np.maximum(a, LOG_FLOOR)) - (1 - a) * np.log(
            np.maximum(1 - a, LOG_FLOOR)
        )
    return float(np.sum(terms))


def phase_loss_grad(data: PhaseRetrievalData, x: np.ndarray):
    """Quartic phaseless loss; returns (f, complex gradient n x r)."""
    m = len(data.y)
    w = data.a.conj() @ x  # row i = a_i^H X
    res = np.einsum("ij,ij->i", w.conj(), w).real - data.y
    grad = (4.0 / m) * (data.a.T @ (res[:, None] * w))
    return float(np.mean(res**2)), grad


def loss_and_grad(model: MeasurementModel, iterate: Iterate):
    """Family dispatch: (f, grad) for SymFactor, (f, (gu, gv)) for FactorPair."""
    if isinstance(iterate, SymFactor):
        f, g = loss_and_grad_sym(model, iterate)
        return f, g
    f, gu, gv = loss_and_grad_asym(model, iterate)
    return f, (gu, gv)


# ---------------------------------------------------------------------------
# clean (noiseless-observation) diagnostics


def clean_observations(model: MeasurementModel) -> np.ndarray:
    """Observations the model would carry with zero noise (needs truth)."""
    if model.truth is None:
        raise MissingGroundTruthError("model has no ground truth attached")
    mstar, data = model.truth.mstar, model.data
    if isinstance(data, GaussianSensing):
        return _gaussian_inner(data, mstar)
    if isinstance(data, EntrySampling):
        return mstar[data.rows, data.cols]
    if isinstance(data, PhaseRetrievalData):
        return np.real(np.einsum("mi,ij,mj->m", data.a.conj(), mstar, data.a))
    return expit(mstar)  # one-bit: population frequencies


def clean_model(model: MeasurementModel) -> MeasurementModel:
    """Copy of the model with noiseless observations (same measurements)."""
    clean = clean_observations(model)
    if isinstance(model.data, OneBitData):
        data = replace(model.data, alpha_hat=clean, sigma=0.0)
    elif isinstance(model.data, EntrySampling):
        data = replace(model.data, y_obs=clean, sigma=0.0)
    else:
        data = replace(model.data, y=clean, sigma=0.0)
    return MeasurementModel(data, model.truth)


def clean_loss(model: MeasurementModel, iterate: Iterate) -> float:
    """(1/m) ||A(product - M*)||^2 for the quadratic families; for completion
    the same restricted to omega. For 1-bit this is the loss at the population
    frequencies sigmoid(M*) (plotting diagnostic only, never used to step)."""
    f, _ = loss_and_grad(clean_model(model), iterate)
    return f


# ---------------------------------------------------------------------------
# serialization: one-line JSON header + core text matrices


def _write_block(fh, m: np.ndarray) -> None:
    fh.write(f"{m.shape[0]} {m.shape[1]}\n")
    for row in np.atleast_2d(m):
        fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def _read_block(fh) -> np.ndarray:
    rows, cols = map(int, fh.readline().split())
    out = np.empty((rows, cols))
    for i in range(rows):
        out[i] = np.array(fh.readline().split(), dtype=np.float64)
    return out


def save_model(path, model: MeasurementModel) -> None:
    """Serialize the measurement data (not the truth) to a text file.

    Line 1 is a JSON header naming the family, m, sigma, and seed; matrix
    blocks in the core text format follow. Floats round-trip exactly.
    """
    data = model.data
    header = {"family": model.family, "m": model.m, "sigma": data.sigma, "seed": data.seed}
    if isinstance(data, EntrySampling):
        header["shape"] = list(data.shape)
    if isinstance(data, OneBitData):
        header["trials"] = data.trials
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        if isinstance(data, GaussianSensing):
            m, n, _ = data.a.shape
            _write_block(fh, data.a.reshape(m * n, n))
            _write_block(fh, data.y.reshape(1, -1))
        elif isinstance(data, EntrySampling):
            _write_block(fh, data.rows.reshape(1, -1).astype(np.float64))
            _write_block(fh, data.cols.reshape(1, -1).astype(np.float64))
            _write_block(fh, data.y_obs.reshape(1, -1))
        elif isinstance(data, OneBitData):
            _write_block(fh, data.alpha_hat)
        else:
            _write_block(fh, data.a.real)
            _write_block(fh, data.a.imag)
            _write_block(fh, data.y.reshape(1, -1))


def load_model(path) -> MeasurementModel:
    with open(path) as fh:
        header = json.loads(fh.readline())
        family, sigma, seed = header["family"], header["sigma"], header["seed"]
        if family == "gaussian-sensing":
            a_flat = _read_block(fh)
            y = _read_block(fh)[0]
            n = a_flat.shape[1]
            data = GaussianSensing(a_flat.reshape(-1, n, n), y, sigma, seed)
        elif family == "entry-sampling":
            rows = _read_block(fh)[0].astype(np.int64)
            cols = _read_block(fh)[0].astype(np.int64)
            y = _read_block(fh)[0]
            data = EntrySampling(rows, cols, y, tuple(header["shape"]), sigma, seed)
        elif family == "one-bit":
            data = OneBitData(_read_block(fh), header["trials"], sigma, seed)
        elif family == "phase-retrieval":
            re, im = _read_block(fh), _read_block(fh)
            y = _read_block(fh)[0]
            data = PhaseRetrievalData(re + 1j * im, y, sigma, seed)
        else:
            raise ValueError(f"unknown family {family!r}")
    return MeasurementModel(data)
