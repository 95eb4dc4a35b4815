"""Matrix primitives: factor types, ground truths, randomness, and the small
dense linear-algebra kernels (top-r SVD, SPD solves) everything else uses.

Conventions
-----------
* Matrices are numpy float64 (or complex128) arrays in row-major (C) layout.
* Randomness comes from ``make_rng``: a PCG64 generator whose standard-normal
  sampling (numpy's ziggurat) is reproducible bit-for-bit for a fixed seed.
* All operations here are pure; types are frozen and safe to share across
  threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class DefinitenessError(Exception):
    """A factorization that requires positive definiteness hit a nonpositive
    pivot (e.g. spd_solve with eta = 0 and a rank-deficient Gram matrix)."""


class SvdConvergenceError(Exception):
    """The iterative SVD backend failed to converge.

    The backend is LAPACK's divide-and-conquer solver (``gesdd``), whose QR
    iteration is internally capped at roughly 30 sweeps per singular value;
    non-convergence within that cap is reported here instead of crashing.
    """


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator: PCG64 stream seeded with ``seed``.

    Identical seeds produce identical sample streams across platforms.
    ``standard_normal`` draws use numpy's ziggurat implementation, which is
    part of the stable Generator API (bit-reproducible for a fixed numpy
    major version).
    """
    return np.random.Generator(np.random.PCG64(int(seed)))


# ---------------------------------------------------------------------------
# iterate types


@dataclass(frozen=True)
class SymFactor:
    """Symmetric-case iterate: estimate is x @ x^T (x^H for complex x)."""

    x: np.ndarray

    def __post_init__(self):
        if self.x.ndim != 2 or self.x.shape[1] < 1:
            raise ValueError(f"factor must be n x r with r >= 1, got {self.x.shape}")

    @property
    def r(self) -> int:
        return self.x.shape[1]

    def product(self) -> np.ndarray:
        return self.x @ self.x.conj().T


@dataclass(frozen=True)
class FactorPair:
    """Asymmetric iterate (u, v): estimate is u @ v^T."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.u.ndim != 2 or self.v.ndim != 2 or self.u.shape[1] != self.v.shape[1]:
            raise ValueError(
                f"factors must share a column count, got {self.u.shape} and {self.v.shape}"
            )

    @property
    def r(self) -> int:
        return self.u.shape[1]

    def product(self) -> np.ndarray:
        return self.u @ self.v.T


Iterate = SymFactor | FactorPair


@dataclass(frozen=True)
class GroundTruth:
    """Synthetic target matrix with known factorization and spectrum.

    ``factor`` satisfies mstar = factor @ factor^T (resp. ^H) in the symmetric
    case; asymmetric truths carry ``factor_right`` with
    mstar = factor @ factor_right^T.
    """

    mstar: np.ndarray
    true_rank: int
    kappa: float
    factor: np.ndarray
    spectrum: np.ndarray
    symmetric: bool = True
    factor_right: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.mstar.shape[0]

    def exact_iterate(self) -> Iterate:
        if self.symmetric:
            return SymFactor(self.factor)
        return FactorPair(self.factor, self.factor_right)


def log_spaced_spectrum(r_star: int, kappa: float) -> np.ndarray:
    """Singular values kappa**(-(i-1)/(r_star-1)), i = 1..r_star.

    Interpolates log-uniformly from 1 down to 1/kappa; for r_star = 2 this is
    exactly (1, 1/kappa), and kappa = 1 gives a flat unit spectrum.
    """
    if r_star == 1:
        return np.array([1.0])
    exponents = -np.arange(r_star) / (r_star - 1)
    return np.power(kappa, exponents)


def make_ground_truth(
    n: int, r_star: int, kappa: float, symmetric: bool = True, seed: int = 0
) -> GroundTruth:
    """Draw a rank-``r_star`` target with log-spaced spectrum 1 .. 1/kappa.

    The column basis is the QR factor of a standard-normal draw; symmetric
    truths are q @ diag(s) @ q^T (positive semidefinite), asymmetric ones use
    an independent right basis.
    """
    if not 1 <= r_star <= n:
        raise ValueError(f"need 1 <= r_star <= n, got r_star={r_star}, n={n}")
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    rng = make_rng(seed)
    spectrum = log_spaced_spectrum(r_star, kappa)
    q, _ = np.linalg.qr(rng.standard_normal((n, r_star)))
    root = q * np.sqrt(spectrum)
    if symmetric:
        mstar = (q * spectrum) @ q.T
        return GroundTruth(mstar, r_star, float(kappa), root, spectrum, True)
    s, _ = np.linalg.qr(rng.standard_normal((n, r_star)))
    mstar = (q * spectrum) @ s.T
    right = s * np.sqrt(spectrum)
    return GroundTruth(mstar, r_star, float(kappa), root, spectrum, False, right)


def phase_ground_truth(n: int, seed: int = 0) -> GroundTruth:
    """Rank-1 Hermitian truth z z^H for phaseless recovery.

    Real and imaginary parts of z are independent standard normals; the
    single nonzero eigenvalue is ||z||^2.
    """
    rng = make_rng(seed)
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    z = z.reshape(n, 1)
    mstar = z @ z.conj().T
    lam = float(np.linalg.norm(z) ** 2)
    return GroundTruth(mstar, 1, 1.0, z, np.array([lam]), True)


# ---------------------------------------------------------------------------
# linear-algebra kernels


def svd_top_r(m: np.ndarray, r: int):
    """Best rank-r factorization (q, sigma, s) with m ~ q @ diag(sigma) @ s^T.

    sigma is nonincreasing; q, s have orthonormal columns. Backed by a full
    dense LAPACK SVD, which is cheap at the matrix sizes this package forms
    (a few thousand per side at most).
    """
    if r > min(m.shape):
        raise ValueError(f"rank {r} exceeds min{m.shape}")
    try:
        q, sigma, st = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(str(exc)) from exc
    return q[:, :r], sigma[:r], st[:r].T


def spd_solve(g: np.ndarray, eta: float, b: np.ndarray) -> np.ndarray:
    """Return b @ (g + eta * I)^-1 via a Cholesky factorization.

    ``g`` must be symmetric (Hermitian in the complex case) and g + eta*I
    positive definite. A nonpositive pivot, which can only occur at eta = 0
    with a rank-deficient g, raises DefinitenessError.
    """
    reg = g + eta * np.eye(g.shape[0], dtype=g.dtype)
    try:
        factor = scipy.linalg.cho_factor(reg, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise DefinitenessError(f"g + {eta}*I is not positive definite") from exc
    # (b @ reg^-1)^H = reg^-1 @ b^H because reg is Hermitian
    return scipy.linalg.cho_solve(factor, b.conj().T, check_finite=False).conj().T


def fro_error(iterate: Iterate, truth: GroundTruth) -> float:
    """Frobenius distance between the iterate's product and the target."""
    return float(np.linalg.norm(iterate.product() - truth.mstar))


def fro_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def spec_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


# ---------------------------------------------------------------------------
# text matrix format (test fixtures, doppler panels)


def save_matrix(path, m: np.ndarray) -> None:
    """Write a real matrix as text: "rows cols" then one row per line.

    Entries use 17 significant digits, which round-trips float64 exactly.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("save_matrix expects a 2-d array")
    with open(path, "w") as fh:
        fh.write(f"{m.shape[0]} {m.shape[1]}\n")
        for row in m:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def load_matrix(path) -> np.ndarray:
    with open(path) as fh:
        rows, cols = map(int, fh.readline().split())
        data = np.loadtxt(fh, ndmin=2)
    if data.shape != (rows, cols):
        raise ValueError(f"expected {rows}x{cols}, file holds {data.shape}")
    return data
