"""Synthetic low-rank completion problems with impulsive (GMM) noise.

Every generator takes an explicit integer seed. Trials derive independent
streams from ``(seed, trial, stream)`` through :class:`numpy.random.SeedSequence`
so a trial can be regenerated on its own.
"""

import time
from dataclasses import asdict, dataclass

import numpy as np

from .estimators import LossSpec
from .masked_linalg import FactorPair, ObservedMatrix
from . import solver

_TRUTH, _MASK, _NOISE, _INIT = range(4)

METHODS = ("rmc-how", "rmc-hoc", "rmc-hop", "fnorm-baseline")


@dataclass(frozen=True)
class ExperimentSpec:
    m: int = 300
    n: int = 200
    r: int = 5
    observe_fraction: float = 0.3
    snr_db: float = 10.0
    tau: float = 0.1
    variance_ratio: float = 100.0
    trials: int = 10
    seed: int = 0

    def __post_init__(self):
        if min(self.m, self.n, self.r) < 1 or self.r > min(self.m, self.n):
            raise ValueError(f"need 1 <= r <= min(m, n), got m={self.m} n={self.n} r={self.r}")
        if not 0 < self.observe_fraction <= 1:
            raise ValueError("observe_fraction must lie in (0, 1]")
        if mask_size(self.m, self.n, self.observe_fraction) < 1:
            raise ValueError("observation mask would be empty")
        if not 0 <= self.tau < 1:
            raise ValueError("tau must lie in [0, 1)")
        if not self.variance_ratio > 0:
            raise ValueError("variance_ratio must be positive")
        if self.trials < 1:
            raise ValueError("trials must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class TrialResult:
    method: str
    trial: int
    rmse: float
    iterations: int
    wall_time_seconds: float
    stop_reason: str


def stream_seed(seed, trial, stream):
    """Deterministic 64-bit seed for one (trial, stream) pair."""
    ss = np.random.SeedSequence([int(seed), int(trial), int(stream)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def gen_ground_truth(m, n, r, seed):
    """``X = U V`` with i.i.d. standard normal factors. Returns ``(X, U, V)``."""
    if r > min(m, n):
        raise ValueError(f"rank {r} exceeds min({m}, {n})")
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((m, r))
    V = rng.standard_normal((r, n))
    return U @ V, U, V


def mask_size(m, n, fraction):
    return int(round(fraction * m * n))


def gen_mask(m, n, fraction, seed):
    """Uniformly random observed cells, ``round(fraction * m * n)`` of them.

    Returns ``(rows, cols)`` in row-major order.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    k = mask_size(m, n, fraction)
    if k < 1:
        raise ValueError("observation mask would be empty")
    rng = np.random.default_rng(seed)
    lin = np.sort(rng.choice(m * n, size=k, replace=False))
    return lin // n, lin % n


def calibrate_gmm(energy, omega_size, snr_db, tau=0.1, ratio=100.0):
    """Component variances hitting the target SNR.

    ``SNR = energy / (|omega| ((1 - tau) s1 + tau s2))`` with ``s2 = ratio * s1``;
    ``energy`` is the squared Frobenius norm of the clean observations.
    """
    if not energy > 0:
        raise ValueError("observed energy must be positive")
    snr = 10.0 ** (snr_db / 10.0)
    s1 = energy / (omega_size * snr * ((1.0 - tau) + tau * ratio))
    return s1, ratio * s1


def achieved_snr_db(energy, noise):
    noise = np.asarray(noise, dtype=float)
    return 10.0 * np.log10(energy / np.dot(noise, noise))


def add_gmm_noise(x_omega, sigma1_sq, sigma2_sq, tau, seed):
    """Add two-component Gaussian mixture noise entrywise.

    Returns ``(noisy_values, outlier_mask)``.
    """
    x_omega = np.asarray(x_omega, dtype=float)
    rng = np.random.default_rng(seed)
    outlier = rng.random(x_omega.shape) < tau
    scale = np.where(outlier, np.sqrt(sigma2_sq), np.sqrt(sigma1_sq))
    return x_omega + scale * rng.standard_normal(x_omega.shape), outlier


def rmse(x_true, m_hat):
    """``||X - M||_F / sqrt(m n)`` over the full matrix."""
    x_true = np.asarray(x_true, dtype=float)
    M = m_hat.product() if isinstance(m_hat, FactorPair) else np.asarray(m_hat, dtype=float)
    if M.shape != x_true.shape:
        raise ValueError(f"shape mismatch {x_true.shape} vs {M.shape}")
    return float(np.linalg.norm(x_true - M) / np.sqrt(x_true.size))


def make_trial(spec, trial):
    """Ground truth and noisy observed matrix for one trial.

    Returns ``(X, observed)`` where ``observed`` is an :class:`ObservedMatrix`.
    """
    X, _, _ = gen_ground_truth(spec.m, spec.n, spec.r, stream_seed(spec.seed, trial, _TRUTH))
    rows, cols = gen_mask(
        spec.m, spec.n, spec.observe_fraction, stream_seed(spec.seed, trial, _MASK)
    )
    clean = X[rows, cols]
    s1, s2 = calibrate_gmm(
        float(np.dot(clean, clean)), clean.size, spec.snr_db, spec.tau, spec.variance_ratio
    )
    noisy, _ = add_gmm_noise(clean, s1, s2, spec.tau, stream_seed(spec.seed, trial, _NOISE))
    return X, ObservedMatrix(spec.m, spec.n, rows, cols, noisy)


def method_config(method, rank, seed, p=0.6, sigma=None, gamma=None, **overrides):
    """Solver configuration for one of :data:`METHODS`."""
    losses = {
        "rmc-how": LossSpec("how", sigma=sigma),
        "rmc-hoc": LossSpec("hoc", gamma=gamma),
        "rmc-hop": LossSpec("hop", p=p),
        "fnorm-baseline": LossSpec("how"),
    }
    if method not in losses:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return solver.SolverConfig(rank=rank, loss=losses[method], seed=seed, **overrides)


def run_method(method, X, observed, cfg):
    t0 = time.perf_counter()
    if method == "fnorm-baseline":
        report = solver.solve_fnorm_baseline(observed, cfg)
    else:
        report = solver.solve(observed, cfg)
    elapsed = time.perf_counter() - t0
    return report, rmse(X, report.factors), elapsed


def run_trial(spec, trial, methods=METHODS, **overrides):
    """Solve one generated trial with every method; all methods share the
    data and the initial factors."""
    X, observed = make_trial(spec, trial)
    init_seed = stream_seed(spec.seed, trial, _INIT)
    out = []
    for method in methods:
        cfg = method_config(method, spec.r, init_seed, **overrides)
        report, err, elapsed = run_method(method, X, observed, cfg)
        out.append(
            TrialResult(
                method=method,
                trial=trial,
                rmse=err,
                iterations=report.warmup_iterations + report.iterations,
                wall_time_seconds=elapsed,
                stop_reason=report.stop_reason,
            )
        )
    return out
