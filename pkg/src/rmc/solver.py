"""Robust matrix completion by alternating shrinkage and SASD sweeps.

Each outer iteration

1. forms the observed residual ``D = X - U V``,
2. lowers the knot ``c`` to ``xi * IQR(D) / 1.349`` if that is smaller,
3. sets the outlier estimate ``S = shrink(D)``,
4. runs one SASD sweep on ``0.5 * ||X - S - U V||^2`` over the observed cells,

and stops once the hybrid-loss objective changes by less than ``zeta``
relative to its previous value.
"""

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import estimators as est
from .estimators import LossSpec
from .masked_linalg import (
    FactorPair,
    RankDeficiencyError,
    frob_norm_sq_omega,
    residual,
    sasd_sweep,
)

IQR_GAUSS = 1.349

STOP_TOLERANCE = "tolerance"
STOP_MAX_ITERS = "max_iters"
STOP_RANK = "rank_deficiency"


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``fixed_c`` disables the IQR schedule and holds the knot constant.
    ``sweeps`` is the number of SASD sweeps per outer iteration.

    ``warmup_iters`` caps a warm start that holds the knot at its first
    value while the robust iterations settle; it ends as soon as the
    relative change of the objective drops below ``zeta``. Set it to 0 to
    let the schedule run from the first iteration. Warm-up iterations
    count against ``max_iters``.
    """

    rank: int
    loss: LossSpec = field(default_factory=lambda: LossSpec("how"))
    xi: float = 2.0
    zeta: float = 1e-4
    max_iters: int = 500
    min_iters: int = 2
    seed: int = 0
    c_floor: float = 1e-12
    fixed_c: Optional[float] = None
    sweeps: int = 1
    warmup_iters: int = 100

    def __post_init__(self):
        if int(self.rank) < 1:
            raise ValueError(f"rank must be positive, got {self.rank}")
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}")
        if not self.zeta > 0:
            raise ValueError(f"zeta must be positive, got {self.zeta}")
        if int(self.max_iters) < 1 or int(self.sweeps) < 1:
            raise ValueError("max_iters and sweeps must be positive")
        if int(self.min_iters) < 0 or int(self.warmup_iters) < 0:
            raise ValueError("min_iters and warmup_iters must be nonnegative")
        if not self.c_floor >= 0:
            raise ValueError(f"c_floor must be nonnegative, got {self.c_floor}")
        if self.fixed_c is not None and not self.fixed_c > 0:
            raise ValueError(f"fixed_c must be positive, got {self.fixed_c}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def to_dict(self):
        return {
            "rank": int(self.rank),
            "loss": {
                "kind": self.loss.kind,
                "sigma": self.loss.sigma,
                "gamma": self.loss.gamma,
                "p": self.loss.p,
            },
            "xi": self.xi,
            "zeta": self.zeta,
            "max_iters": int(self.max_iters),
            "min_iters": int(self.min_iters),
            "seed": int(self.seed),
            "c_floor": self.c_floor,
            "fixed_c": self.fixed_c,
            "sweeps": int(self.sweeps),
            "warmup_iters": int(self.warmup_iters),
        }


@dataclass
class SolverState:
    factors: FactorPair
    s: np.ndarray
    c: float = math.inf
    objective_history: List[float] = field(default_factory=list)
    surrogate_history: List[float] = field(default_factory=list)
    c_history: List[float] = field(default_factory=list)
    iter: int = 0
    warmup: int = 0


@dataclass(frozen=True)
class SolveReport:
    factors: FactorPair
    s: np.ndarray
    iterations: int
    stop_reason: str
    objective_history: List[float]
    surrogate_history: List[float]
    c_history: List[float]
    wall_time: float
    warmup_iterations: int = 0
    message: str = ""

    def product(self):
        return self.factors.product()

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "warmup_iterations": self.warmup_iterations,
            "stop_reason": self.stop_reason,
            "message": self.message,
            "objective_history": list(self.objective_history),
            "surrogate_history": list(self.surrogate_history),
            "c_history": list(self.c_history),
            "wall_time_seconds": self.wall_time,
        }


def init_factors(x, r, seed):
    """Gaussian factors scaled so that ``E[(UV)_ij^2]`` equals the mean
    squared observation."""
    r = int(r)
    if r < 1 or r > min(x.m, x.n):
        raise ValueError(f"rank {r} must lie in [1, {min(x.m, x.n)}]")
    energy = frob_norm_sq_omega(x.values) / x.nnz
    if energy == 0.0:
        energy = 1.0
    scale = (energy / r) ** 0.25
    rng = np.random.default_rng(int(seed))
    U = scale * rng.standard_normal((x.m, r))
    V = scale * rng.standard_normal((r, x.n))
    return FactorPair(U, V)


def normalized_iqr(values):
    """Interquartile range divided by 1.349, a robust estimate of a Gaussian
    standard deviation. Quartiles use linear interpolation between order
    statistics."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2:
        raise ValueError("need at least two values for an interquartile range")
    q1, q3 = np.percentile(values, [25.0, 75.0])
    return float(q3 - q1) / IQR_GAUSS


def update_c(state, d_values, cfg):
    """Knot schedule ``c <- max(c_floor, min(xi * IQR(D)/1.349, c))``."""
    if cfg.fixed_c is not None:
        state.c = float(cfg.fixed_c)
    else:
        proposal = cfg.xi * normalized_iqr(d_values)
        state.c = float(max(cfg.c_floor, min(proposal, state.c)))
        if not state.c > 0:
            # c_floor = 0 and a perfect fit; any positive knot leaves S = 0
            state.c = float(np.finfo(float).tiny)
    return state.c


def s_step(x, factors, loss, c):
    """Outlier estimate ``S = shrink(X - U V)`` on the observed cells."""
    return est.shrink(loss, c, residual(x, factors))


def uv_step(x, s, factors, sweeps=1):
    """SASD sweep(s) on ``0.5 * ||(X - S) - (U V)||^2`` over the observed cells."""
    h = x.values - s
    for _ in range(int(sweeps)):
        factors = sasd_sweep(h, factors, x)
    return factors


def objective(x, factors, loss, c):
    """Sum of the hybrid loss over the observed residuals."""
    return float(np.sum(est.loss_value(loss, c, residual(x, factors))))


def surrogate(x, factors, s, d, loss, c):
    """Split objective ``0.5 ||X - UV - S||^2 + phi(S)``.

    ``S`` must be ``shrink(d)``; the regulariser is evaluated through ``d``.
    """
    _, phi = est.dual_at_image(loss, c, d)
    return 0.5 * frob_norm_sq_omega(residual(x, factors, s)) + float(np.sum(phi))


def _relative_change(E, E_prev):
    return abs(E - E_prev) / max(E_prev, np.finfo(float).eps)


def _warm_start(x, cfg, state):
    """Robust iterations with the knot held at its first value ``c1``.

    The schedule only ever lowers ``c``. Started from random factors it
    follows the shrinking residuals down before the fit has settled, and
    entries that are still badly fit get written off as outliers for good.
    Holding ``c1`` until the objective settles avoids that.
    """
    budget = min(int(cfg.warmup_iters), int(cfg.max_iters) - 1)
    if budget < 1:
        return
    d = residual(x, state.factors)
    c = update_c(state, d, cfg)
    prev = None
    while state.warmup < budget:
        state.s = est.shrink(cfg.loss, c, d)
        state.factors = uv_step(x, state.s, state.factors, cfg.sweeps)
        state.warmup += 1
        d = residual(x, state.factors)
        E = float(np.sum(est.loss_value(cfg.loss, c, d)))
        if prev is not None and _relative_change(E, prev) < cfg.zeta:
            break
        prev = E


def _run(x, cfg, robust):
    t0 = time.perf_counter()
    state = SolverState(factors=init_factors(x, cfg.rank, cfg.seed), s=np.zeros(x.nnz))
    stop, message = STOP_MAX_ITERS, ""
    try:
        if robust:
            _warm_start(x, cfg, state)
        while state.warmup + state.iter < cfg.max_iters:
            if robust:
                d = residual(x, state.factors)
                c = update_c(state, d, cfg)
                state.s = est.shrink(cfg.loss, c, d)
                state.factors = uv_step(x, state.s, state.factors, cfg.sweeps)
                E = objective(x, state.factors, cfg.loss, c)
                L = surrogate(x, state.factors, state.s, d, cfg.loss, c)
                state.c_history.append(c)
            else:
                state.factors = uv_step(x, state.s, state.factors, cfg.sweeps)
                E = 0.5 * frob_norm_sq_omega(residual(x, state.factors))
                L = E
            state.iter += 1
            state.objective_history.append(E)
            state.surrogate_history.append(L)
            if state.iter >= cfg.min_iters:
                hist = state.objective_history
                rel = _relative_change(hist[-1], hist[-2]) if len(hist) > 1 else math.inf
                if rel < cfg.zeta or math.isinf(cfg.zeta):
                    stop = STOP_TOLERANCE
                    break
    except RankDeficiencyError as exc:
        stop, message = STOP_RANK, str(exc)
    return SolveReport(
        factors=state.factors,
        s=state.s,
        iterations=state.iter,
        stop_reason=stop,
        objective_history=state.objective_history,
        surrogate_history=state.surrogate_history,
        c_history=state.c_history,
        wall_time=time.perf_counter() - t0,
        warmup_iterations=state.warmup,
        message=message,
    )


def solve(x, cfg):
    """Robust completion of ``x`` (an :class:`ObservedMatrix`)."""
    return _run(x, cfg, robust=True)


def solve_fnorm_baseline(x, cfg):
    """Plain least-squares completion: the same loop with ``S`` pinned at 0."""
    return _run(x, cfg, robust=False)


def stationarity(x, report):
    """Norms of the partial gradients of the smooth term at the final iterate."""
    f = report.factors
    R = residual(x, f, report.s)
    csr = x.to_csr(R)
    return (
        float(np.linalg.norm(csr @ f.V.T)),
        float(np.linalg.norm(np.asarray(csr.T @ f.U))),
    )
