"""Iteration rules and the trace-producing run loop.

Four methods share one loop:

* ``GD``: plain factored gradient descent.
* ``DECAY_PRECGD``: right-preconditioned steps with geometrically decaying
  regularization, eta_t = eta0 * beta**t.
* ``PRECGD``: preconditioned steps with eta_t = sqrt(|f(X_t) - sigma_proxy^2|).
* ``SCALEDGD_LAMBDA``: preconditioned steps with constant eta = lambda.

Preconditioners are applied as right products with (V^T V + eta I)^-1 /
(U^T U + eta I)^-1 (X^H X + eta I in the symmetric/complex case), with Gram
matrices read from the pre-update factors. Runs never raise on divergence or
numerical failure; both are reported in the result's termination reason.
"""

from __future__ import annotations

import csv
import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics
from .core import DefinitenessError, FactorPair, Iterate, SymFactor, fro_error, spd_solve
from .measurements import MeasurementModel, clean_loss, loss_and_grad


class MethodKind(enum.Enum):
    GD = "gd"
    DECAY_PRECGD = "decay_precgd"
    PRECGD = "precgd"
    SCALEDGD_LAMBDA = "scaledgd_lambda"


AUTO = "auto"  # eta0 sentinel: eta0 = sqrt(f(X_0))


@dataclass(frozen=True)
class StepConfig:
    """Method choice plus hyperparameters; unused fields may stay None."""

    method: MethodKind
    alpha: float
    max_iters: int
    beta: float | None = None  # DECAY_PRECGD only
    eta0: float | str = AUTO  # DECAY_PRECGD only
    lambda_fixed: float | None = None  # SCALEDGD_LAMBDA only
    sigma_proxy: float | None = None  # PRECGD only
    grad_tol: float | None = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.method is MethodKind.DECAY_PRECGD:
            if self.beta is None or not 0.0 <= self.beta < 1.0:
                raise ValueError("DECAY_PRECGD needs 0 <= beta < 1")
            if self.eta0 != AUTO and (not np.isscalar(self.eta0) or self.eta0 < 0):
                raise ValueError("eta0 must be 'auto' or a nonnegative real")
        if self.method is MethodKind.PRECGD and (self.sigma_proxy is None or self.sigma_proxy < 0):
            raise ValueError("PRECGD needs sigma_proxy >= 0")
        if self.method is MethodKind.SCALEDGD_LAMBDA and (
            self.lambda_fixed is None or self.lambda_fixed < 0
        ):
            raise ValueError("SCALEDGD_LAMBDA needs lambda_fixed >= 0")


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    eta: float
    f: float
    f_clean: float | None
    err_fro: float | None
    grad_fro: float
    grad_dualp: float | None
    elapsed_ms: float


@dataclass
class RunResult:
    final_iterate: Iterate
    trace: list[TraceRecord] = field(default_factory=list)
    termination_reason: str = "budget"  # budget | tolerance | divergence | numerical


# ---------------------------------------------------------------------------
# single steps


def gd_step(iterate: Iterate, grads, alpha: float) -> Iterate:
    """Plain step: factor minus alpha times its gradient."""
    if isinstance(iterate, SymFactor):
        return SymFactor(iterate.x - alpha * grads)
    gu, gv = grads
    return FactorPair(iterate.u - alpha * gu, iterate.v - alpha * gv)


def precond_step(iterate: Iterate, grads, alpha: float, eta: float) -> Iterate:
    """Right-preconditioned step with regularization eta.

    Gram matrices come from the current (pre-update) factors; both halves of
    an asymmetric update read the same snapshot.
    """
    if isinstance(iterate, SymFactor):
        gram = iterate.x.conj().T @ iterate.x
        return SymFactor(iterate.x - alpha * spd_solve(gram, eta, grads))
    gu, gv = grads
    gram_v = iterate.v.T @ iterate.v
    gram_u = iterate.u.T @ iterate.u
    return FactorPair(
        iterate.u - alpha * spd_solve(gram_v, eta, gu),
        iterate.v - alpha * spd_solve(gram_u, eta, gv),
    )


def eta_schedule(config: StepConfig, t: int, eta0: float, f_current: float) -> float:
    """Regularization in force at iterate t.

    DECAY_PRECGD uses the closed form eta0 * beta**t, which matches the
    recurrence eta <- beta * eta exactly in exact arithmetic and keeps the
    trace within 2 ulps of eta0 * beta**t for any horizon (repeated
    multiplication would drift by hundreds of ulps over 1e4 iterations).
    """
    if config.method is MethodKind.DECAY_PRECGD:
        return eta0 * config.beta**t
    if config.method is MethodKind.PRECGD:
        return math.sqrt(abs(f_current - config.sigma_proxy**2))
    if config.method is MethodKind.SCALEDGD_LAMBDA:
        return config.lambda_fixed
    return 0.0


def _grad_fro(grads) -> float:
    if isinstance(grads, tuple):
        return math.hypot(np.linalg.norm(grads[0]), np.linalg.norm(grads[1]))
    return float(np.linalg.norm(grads))


def _grad_dualp(iterate: Iterate, grads, eta: float, method: MethodKind) -> float | None:
    # dual P-norm of the gradient; defined for preconditioned symmetric runs
    if not isinstance(iterate, SymFactor) or method is MethodKind.GD:
        return None
    geom = diagnostics.PGeometry(iterate.x.conj().T @ iterate.x, eta)
    try:
        return diagnostics.dual_p_norm(grads, geom)
    except DefinitenessError:
        return None


DIVERGENCE_FACTOR = 1e12


def run(model: MeasurementModel, init: Iterate, config: StepConfig) -> RunResult:
    """Iterate the configured rule, recording one TraceRecord per iterate.

    Record 0 describes the initial point; record t carries the regularization
    eta_t used for the step t -> t+1. Clean loss and Frobenius error are
    filled only when the model has ground truth attached. The loop stops on
    budget, on grad_tol, when f exceeds DIVERGENCE_FACTOR times f(X_0) (or
    goes non-finite), or on a preconditioner definiteness failure; the last
    two are reported, never raised.
    """
    t_start = time.perf_counter()
    iterate = init
    f, grads = loss_and_grad(model, iterate)
    eta0 = math.sqrt(f) if config.eta0 == AUTO else float(config.eta0)
    f_limit = DIVERGENCE_FACTOR * max(f, np.finfo(np.float64).tiny)
    result = RunResult(iterate)

    for t in range(config.max_iters + 1):
        eta_t = eta_schedule(config, t, eta0, f)
        record = TraceRecord(
            iter=t,
            eta=eta_t,
            f=f,
            f_clean=clean_loss(model, iterate) if model.truth is not None else None,
            err_fro=fro_error(iterate, model.truth) if model.truth is not None else None,
            grad_fro=_grad_fro(grads),
            grad_dualp=_grad_dualp(iterate, grads, eta_t, config.method),
            elapsed_ms=(time.perf_counter() - t_start) * 1e3,
        )
        result.trace.append(record)
        result.final_iterate = iterate

        if not math.isfinite(f) or f > f_limit:
            result.termination_reason = "divergence"
            break
        if config.grad_tol is not None and record.grad_fro <= config.grad_tol:
            result.termination_reason = "tolerance"
            break
        if t == config.max_iters:
            result.termination_reason = "budget"
            break
        if config.method is MethodKind.GD:
            iterate = gd_step(iterate, grads, config.alpha)
        else:
            try:
                iterate = precond_step(iterate, grads, config.alpha, eta_t)
            except DefinitenessError:
                result.termination_reason = "numerical"
                break
        f, grads = loss_and_grad(model, iterate)

    return result


# ---------------------------------------------------------------------------
# trace CSV

TRACE_HEADER = "iter,eta,f,f_clean,err_fro,grad_fro,grad_dualp,elapsed_ms"


def _cell(v) -> str:
    return "" if v is None else format(v, ".17g")


def write_trace_csv(path, trace: list[TraceRecord], include_timing: bool = True) -> None:
    """Write the exact documented trace format (17 significant digits).

    ``include_timing=False`` leaves the elapsed_ms column empty, which makes
    the file byte-reproducible for a fixed seed; scenario runs use that mode.
    """
    with open(path, "w", newline="") as fh:
        fh.write(TRACE_HEADER + "\n")
        for r in trace:
            cells = [
                str(r.iter),
                _cell(r.eta),
                _cell(r.f),
                _cell(r.f_clean),
                _cell(r.err_fro),
                _cell(r.grad_fro),
                _cell(r.grad_dualp),
                _cell(r.elapsed_ms if include_timing else None),
            ]
            fh.write(",".join(cells) + "\n")


def read_trace_csv(path) -> list[TraceRecord]:
    def opt(cell: str) -> float | None:
        return None if cell == "" else float(cell)

    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if ",".join(header) != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {header}")
        for row in reader:
            out.append(
                TraceRecord(
                    iter=int(row[0]),
                    eta=float(row[1]),
                    f=float(row[2]),
                    f_clean=opt(row[3]),
                    err_fro=opt(row[4]),
                    grad_fro=float(row[5]),
                    grad_dualp=opt(row[6]),
                    elapsed_ms=opt(row[7]) or 0.0,
                )
            )
    return out
