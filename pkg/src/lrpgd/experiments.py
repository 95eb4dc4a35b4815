"""Scenario registry, the trace-emitting runner, and the synthetic
space-time denoising pipeline.

Every scenario is reproducible from one integer seed: the ground truth uses
``seed``, the measurement draw ``seed + 1``, and initialization ``seed + 2``.
All arms of a scenario share one model and one default initial point; a few
scenarios deliberately override the initializer per arm (small-init studies).

Scenario CSVs are written with empty elapsed_ms cells so that re-running
with the same seed reproduces the files byte for byte; wall time goes into
manifest.json instead.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    GroundTruth,
    Iterate,
    make_ground_truth,
    make_rng,
    phase_ground_truth,
    save_matrix,
    svd_top_r,
)
from .initializers import small_init, spectral_data, spectral_oracle
from .measurements import (
    MeasurementModel,
    entry_ensemble,
    gaussian_ensemble,
    onebit_ensemble,
    onebit_population,
    phase_ensemble,
)
from .optimizers import AUTO, MethodKind, RunResult, StepConfig, run, write_trace_csv

SCALED_LAMBDA_GRID = (1e-2, 1e-4, 1e-6, 1e-9)


@dataclass(frozen=True)
class InitSpec:
    kind: str  # "spectral-oracle" | "spectral-data" | "small"
    scale: float = 0.1  # perturbation scale (oracle) or draw scale (small)


@dataclass(frozen=True)
class Arm:
    label: str
    config: StepConfig
    init: InitSpec | None = None  # None: use the scenario-wide init
    sampling_rate: float | None = None  # completion scenarios only


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    family: str  # gaussian-sensing | one-bit | phase-retrieval | synth-ultrasound
    n: int
    r_star: int
    kappa: float
    r: int
    sigma: float
    init: InitSpec
    arms: tuple[Arm, ...]
    m: int | None = None  # gaussian / phase measurement count
    onebit_trials: int | None = None  # None: population frequencies
    stack_dims: tuple[int, int, int] | None = None  # (h, w, frames), ultrasound only
    snr_db: float | None = None  # ultrasound: sigma derived from SNR instead


def _lbl(v: float) -> str:
    return format(v, ".0e")


def _gaussian_arms(alpha, beta, sigma_proxies, lambdas, iters):
    arms = [
        Arm("decay_precgd", StepConfig(MethodKind.DECAY_PRECGD, alpha, iters, beta=beta))
    ]
    for sp in sigma_proxies:
        arms.append(
            Arm(
                f"precgd__sig{_lbl(sp)}",
                StepConfig(MethodKind.PRECGD, alpha, iters, sigma_proxy=sp),
            )
        )
    for lam in lambdas:
        arms.append(
            Arm(
                f"scaledgd__lam{_lbl(lam)}",
                StepConfig(MethodKind.SCALEDGD_LAMBDA, alpha, iters, lambda_fixed=lam),
            )
        )
    arms.append(Arm("gd", StepConfig(MethodKind.GD, alpha, iters)))
    return tuple(arms)


def builtin_scenarios() -> list[Scenario]:
    """The desk-scale study registry."""
    spectral = InitSpec("spectral-oracle", 0.1)
    scenarios = [
        Scenario(
            name="gauss-illcond-noiseless",
            description="10x10 sensing, rank 2, condition 1e2, search rank 8, noiseless",
            family="gaussian-sensing",
            n=10, r_star=2, kappa=1e2, r=8, m=160, sigma=0.0,
            init=spectral,
            arms=_gaussian_arms(0.1, 0.85, (0.0,), SCALED_LAMBDA_GRID, 300),
        ),
        Scenario(
            name="gauss-illcond-noisy",
            description="as noiseless variant but sigma=1e-6, decay rate 0.5",
            family="gaussian-sensing",
            n=10, r_star=2, kappa=1e2, r=8, m=160, sigma=1e-6,
            init=spectral,
            arms=_gaussian_arms(0.1, 0.5, (1e-6, 1e-3), SCALED_LAMBDA_GRID, 300),
        ),
        Scenario(
            name="gauss-wellcond",
            description="exactly parameterized, condition 1, noiseless, 500 iterations",
            family="gaussian-sensing",
            n=10, r_star=2, kappa=1.0, r=2, m=80, sigma=0.0,
            init=spectral,
            arms=_gaussian_arms(0.1, 0.1, (0.0,), (0.0,), 500),
        ),
        Scenario(
            name="gauss-smallinit",
            description="spectral decay arm vs small-init (1e-12) baselines",
            family="gaussian-sensing",
            n=10, r_star=2, kappa=1e2, r=8, m=160, sigma=0.0,
            init=InitSpec("small", 1e-12),
            arms=(
                Arm(
                    "decay_precgd",
                    StepConfig(MethodKind.DECAY_PRECGD, 0.1, 500, beta=0.5),
                    init=spectral,
                ),
                Arm(
                    "scaledgd__lam1e-02",
                    StepConfig(MethodKind.SCALEDGD_LAMBDA, 0.1, 500, lambda_fixed=1e-2),
                ),
                Arm("gd", StepConfig(MethodKind.GD, 0.1, 500)),
            ),
        ),
        Scenario(
            name="gauss-highnoise",
            description="sigma=1e-1, search rank 8, decay 0.97 vs proxy-variance grid",
            family="gaussian-sensing",
            n=10, r_star=2, kappa=1.0, r=8, m=80, sigma=1e-1,
            init=spectral,
            arms=(
                Arm("decay_precgd", StepConfig(MethodKind.DECAY_PRECGD, 0.01, 500, beta=0.97)),
                *(
                    Arm(
                        f"precgd__sig{_lbl(sp)}",
                        StepConfig(MethodKind.PRECGD, 0.01, 500, sigma_proxy=sp),
                    )
                    for sp in (1.0, 0.7, 0.5, 0.1)
                ),
            ),
        ),
        Scenario(
            name="onebit-noiseless",
            description="1-bit sensing, exactly parameterized, population frequencies",
            family="one-bit",
            n=10, r_star=2, kappa=1.0, r=2, sigma=0.0,
            init=spectral,
            arms=_gaussian_arms(1.0, 0.4, (0.0,), (0.0,), 200),
        ),
        Scenario(
            name="onebit-noisy",
            description="1-bit sensing, over-parameterized, per-entry noise, population freqs",
            family="one-bit",
            n=10, r_star=2, kappa=1.0, r=4, sigma=1e-6, onebit_trials=None,
            init=spectral,
            arms=_gaussian_arms(1.0, 0.4, (1e-5,), (1e-2,), 200),
        ),
        Scenario(
            name="phase-noiseless",
            description="phaseless recovery of a length-10 complex vector, rank 1",
            family="phase-retrieval",
            n=10, r_star=1, kappa=1.0, r=1, m=80, sigma=0.0,
            init=spectral,
            arms=_gaussian_arms(0.02, 0.1, (0.0,), (0.0,), 1000),
        ),
        Scenario(
            name="phase-noisy",
            description="phaseless recovery, over-parameterized rank 2, sigma=1e-6",
            family="phase-retrieval",
            n=10, r_star=1, kappa=1.0, r=2, m=80, sigma=1e-6,
            init=spectral,
            arms=_gaussian_arms(0.02, 0.1, (1e-5,), (1e-2,), 1000),
        ),
        Scenario(
            name="synth-ultrasound",
            description="synthetic space-time stack (2000x200, rank 10), completion sweep",
            family="synth-ultrasound",
            n=2000, r_star=10, kappa=10.0, r=10, sigma=0.0, snr_db=20.0,
            stack_dims=(50, 40, 200),
            init=InitSpec("spectral-data"),
            arms=tuple(
                Arm(
                    f"decay_precgd__p{rate:.2f}",
                    StepConfig(MethodKind.DECAY_PRECGD, 0.15 * 2000 * 200, 30, beta=0.05),
                    sampling_rate=rate,
                )
                for rate in (0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2)
            ),
        ),
    ]
    return scenarios


def get_scenario(name: str) -> Scenario:
    for s in builtin_scenarios():
        if s.name == name:
            return s
    raise KeyError(f"unknown scenario {name!r}")


# ---------------------------------------------------------------------------
# frame stacks and the denoising pipeline


@dataclass(frozen=True)
class FrameStack:
    """Image sequence; the space-time matrix stacks vec'd frames as columns.

    Frames are vectorized column-major (classic vec operator), so
    ``to_matrix()[:, j]`` is frames[j] flattened in Fortran order.
    """

    data: np.ndarray  # (frames, h, w)

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError("frame stack must be (frames, h, w)")

    @property
    def frame_count(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]

    def to_matrix(self) -> np.ndarray:
        t, h, w = self.data.shape
        return self.data.reshape(t, h * w, order="F").T.copy()

    @classmethod
    def from_matrix(cls, m: np.ndarray, h: int, w: int) -> "FrameStack":
        return cls(m.T.reshape(-1, h, w, order="F").copy())


def _gaussian_blob(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    cy, cx = rng.uniform(0.2, 0.8) * h, rng.uniform(0.2, 0.8) * w
    width = rng.uniform(0.08, 0.25) * min(h, w)
    return np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width**2))


def synth_frame_stack(
    h: int, w: int, frames: int, rank: int, sigma: float, seed: int = 0
) -> tuple[FrameStack, GroundTruth]:
    """Smooth synthetic space-time stack plus its exact low-rank truth.

    Spatial factors are Gaussian blobs, temporal factors low-frequency
    sinusoids; both are orthonormalized and combined with a log-spaced
    spectrum (condition number 10). i.i.d. N(0, sigma^2) noise is added to
    every entry of the space-time matrix.
    """
    n1, n2 = h * w, frames
    if rank > min(n1, n2):
        raise ValueError(f"rank {rank} exceeds min({n1}, {n2})")
    rng = make_rng(seed)
    spatial = np.column_stack(
        [_gaussian_blob(h, w, rng).reshape(-1, order="F") for _ in range(rank)]
    )
    t = np.arange(frames) / frames
    temporal = np.column_stack(
        [
            np.sin(2 * np.pi * rng.uniform(0.5, 4.0) * t + rng.uniform(0, 2 * np.pi))
            for _ in range(rank)
        ]
    )
    q, _ = np.linalg.qr(spatial)
    s, _ = np.linalg.qr(temporal)
    kappa = 10.0
    spectrum = np.power(kappa, -np.arange(rank) / max(rank - 1, 1))
    mstar = (q * spectrum) @ s.T
    truth = GroundTruth(
        mstar, rank, kappa, q * np.sqrt(spectrum), spectrum, False, s * np.sqrt(spectrum)
    )
    noisy = mstar + sigma * rng.standard_normal(mstar.shape)
    return FrameStack.from_matrix(noisy, h, w), truth


def snr_sigma(mstar: np.ndarray, snr_db: float) -> float:
    """Noise std giving the requested input SNR (power ratio, in dB)."""
    return float(np.linalg.norm(mstar) / (math.sqrt(mstar.size) * 10 ** (snr_db / 20)))


def default_completion_config(n1: int, n2: int, max_iters: int = 30) -> StepConfig:
    """Pilot-derived completion defaults; alpha scales with the matrix size.

    The 1/|omega| loss normalization makes raw gradients shrink with problem
    size, so the step size must grow with it: 0.15 * n1 * n2 keeps the
    effective step constant across scales.
    """
    return StepConfig(
        MethodKind.DECAY_PRECGD, 0.15 * n1 * n2, max_iters, beta=0.05, eta0=AUTO
    )


def denoise_pipeline(
    stack: FrameStack,
    r: int,
    sampling_rate: float,
    config: StepConfig | None = None,
    seed: int = 0,
    truth: GroundTruth | None = None,
) -> tuple[FrameStack, RunResult]:
    """Low-rank completion denoiser over a sampled space-time matrix.

    Samples ceil(rate * n1 * n2) entries without replacement, starts from the
    data-driven spectral point, runs the decaying-eta preconditioned method,
    and reshapes U V^T back to frames. At full sampling and convergence this
    coincides with the rank-r truncated SVD of the stack.
    """
    if not 0 < sampling_rate <= 1:
        raise ValueError("sampling_rate must be in (0, 1]")
    h, w = stack.dims
    y = stack.to_matrix()
    n1, n2 = y.shape
    count = math.ceil(sampling_rate * n1 * n2)
    data = entry_ensemble(y, count, 0.0, seed)
    model = MeasurementModel(data, truth)
    init = spectral_data(model, r)
    if config is None:
        config = default_completion_config(n1, n2)
    result = run(model, init, config)
    denoised = FrameStack.from_matrix(result.final_iterate.product(), h, w)
    return denoised, result


def truncated_svd_denoise(stack: FrameStack, r: int) -> FrameStack:
    """Classic rank-r truncated-SVD denoiser of the space-time matrix."""
    h, w = stack.dims
    q, sigma, s = svd_top_r(stack.to_matrix(), r)
    return FrameStack.from_matrix((q * sigma) @ s.T, h, w)


def power_doppler(stack: FrameStack) -> np.ndarray:
    """Per-pixel 20*log10 of normalized temporal energy, max pinned at 0 dB.

    Pixels with zero energy would map to -inf and are clamped to the finite
    minimum of the image minus 60 dB. A degenerate all-zero stack returns an
    all-zero image.
    """
    energy = np.sum(stack.data.astype(np.float64) ** 2, axis=0)
    peak = energy.max()
    if peak == 0:
        return np.zeros_like(energy)
    with np.errstate(divide="ignore"):
        img = 20.0 * np.log10(energy / peak)
    finite = img[np.isfinite(img)]
    img[~np.isfinite(img)] = finite.min() - 60.0
    return img


# ---------------------------------------------------------------------------
# scenario runner


def build_model(scenario: Scenario, seed: int) -> tuple[MeasurementModel, GroundTruth]:
    """Instantiate the scenario's truth (seed) and measurements (seed + 1)."""
    if scenario.family == "gaussian-sensing":
        truth = make_ground_truth(scenario.n, scenario.r_star, scenario.kappa, seed=seed)
        data = gaussian_ensemble(truth, scenario.m, scenario.sigma, seed + 1)
    elif scenario.family == "one-bit":
        truth = make_ground_truth(scenario.n, scenario.r_star, scenario.kappa, seed=seed)
        if scenario.onebit_trials is None:
            data = onebit_population(truth, scenario.sigma, seed + 1)
        else:
            data = onebit_ensemble(truth, scenario.onebit_trials, scenario.sigma, seed + 1)
    elif scenario.family == "phase-retrieval":
        truth = phase_ground_truth(scenario.n, seed)
        data = phase_ensemble(truth, scenario.m, scenario.sigma, seed + 1)
    else:
        raise ValueError(f"build_model does not handle family {scenario.family!r}")
    return MeasurementModel(data, truth), truth


def build_instance(scenario: Scenario, seed: int = 0):
    """(model, shared default init) exactly as run_scenario would draw them."""
    model, truth = build_model(scenario, seed)
    init = _build_init(scenario.init, scenario, truth, model, seed + 2)
    return model, init


def _build_init(spec: InitSpec, scenario: Scenario, truth, model, seed: int) -> Iterate:
    if spec.kind == "spectral-oracle":
        return spectral_oracle(truth, scenario.r, spec.scale, seed)
    if spec.kind == "spectral-data":
        return spectral_data(model, scenario.r)
    if spec.kind == "small":
        return small_init(
            scenario.n,
            scenario.r,
            spec.scale,
            seed,
            complex_=scenario.family == "phase-retrieval",
        )
    raise ValueError(f"unknown initializer kind {spec.kind!r}")


def _apply_overrides(config: StepConfig, overrides: dict | None) -> StepConfig:
    if not overrides:
        return config
    fields = {f.name for f in dataclasses.fields(StepConfig)}
    unknown = set(overrides) - fields
    if unknown:
        raise ValueError(f"unknown StepConfig fields in override: {sorted(unknown)}")
    return dataclasses.replace(config, **overrides)


def _config_json(config: StepConfig) -> dict:
    d = dataclasses.asdict(config)
    d["method"] = config.method.value
    return d


def run_scenario(
    scenario: Scenario,
    seed: int = 0,
    out_dir="runs",
    overrides: dict | None = None,
) -> dict:
    """Run every arm, write one CSV per arm plus manifest.json.

    Returns the manifest. Arm divergence is recorded there, never raised.
    ``overrides`` maps StepConfig field names to replacement values and is
    applied to every arm.
    """
    t0 = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "scenario": scenario.name,
        "description": scenario.description,
        "seed": seed,
        "params": {
            "family": scenario.family,
            "n": scenario.n,
            "r_star": scenario.r_star,
            "kappa": scenario.kappa,
            "r": scenario.r,
            "m": scenario.m,
            "sigma": scenario.sigma,
            "init": dataclasses.asdict(scenario.init),
            "onebit_trials": scenario.onebit_trials,
            "stack_dims": scenario.stack_dims,
            "snr_db": scenario.snr_db,
        },
        "arms": [],
        "images": [],
    }

    if scenario.family == "synth-ultrasound":
        _run_ultrasound(scenario, seed, out, overrides, manifest)
    else:
        model, shared_init = build_instance(scenario, seed)
        truth = model.truth
        for arm in scenario.arms:
            init = (
                shared_init
                if arm.init is None
                else _build_init(arm.init, scenario, truth, model, seed + 2)
            )
            config = _apply_overrides(arm.config, overrides)
            result = run(model, init, config)
            csv_name = f"{scenario.name}__{arm.label}.csv"
            write_trace_csv(out / csv_name, result.trace, include_timing=False)
            last = result.trace[-1]
            manifest["arms"].append(
                {
                    "label": arm.label,
                    "method": config.method.value,
                    "csv": csv_name,
                    "config": _config_json(config),
                    "termination": result.termination_reason,
                    "iterations": last.iter,
                    "final_f": last.f,
                    "final_err_fro": last.err_fro,
                }
            )

    manifest["wall_time_s"] = time.perf_counter() - t0
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def _run_ultrasound(scenario, seed, out: Path, overrides, manifest) -> None:
    h, w, frames = scenario.stack_dims
    sigma = scenario.sigma
    if scenario.snr_db is not None:
        # derive sigma from the clean stack at the requested SNR
        _, truth_probe = synth_frame_stack(h, w, frames, scenario.r_star, 0.0, seed)
        sigma = snr_sigma(truth_probe.mstar, scenario.snr_db)
    stack, truth = synth_frame_stack(h, w, frames, scenario.r_star, sigma, seed)
    manifest["params"]["sigma"] = sigma

    input_img = out / f"{scenario.name}__doppler__input.txt"
    save_matrix(input_img, power_doppler(stack))
    manifest["images"].append(input_img.name)
    manifest["input_err_fro"] = float(
        np.linalg.norm(stack.to_matrix() - truth.mstar)
    )

    for arm in scenario.arms:
        config = _apply_overrides(arm.config, overrides)
        denoised, result = denoise_pipeline(
            stack, scenario.r, arm.sampling_rate, config, seed + 2, truth
        )
        csv_name = f"{scenario.name}__{arm.label}.csv"
        write_trace_csv(out / csv_name, result.trace, include_timing=False)
        img_name = f"{scenario.name}__doppler__{arm.label}.txt"
        save_matrix(out / img_name, power_doppler(denoised))
        manifest["images"].append(img_name)
        last = result.trace[-1]
        manifest["arms"].append(
            {
                "label": arm.label,
                "method": config.method.value,
                "csv": csv_name,
                "config": _config_json(config),
                "sampling_rate": arm.sampling_rate,
                "termination": result.termination_reason,
                "iterations": last.iter,
                "final_f": last.f,
                "final_err_fro": last.err_fro,
            }
        )
