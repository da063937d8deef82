"""Smoothed, accelerated, homotopy-driven randomized block coordinate descent.

Two interchangeable formulations are provided. The reference form keeps the
full averaged, prox and extrapolated iterates and costs ``O(p + nnz)`` per
step. The efficient form keeps ``u`` and ``z`` with ``xhat = c_k u + z`` and
maintains ``Mu, Mz, Au, Az`` so that a step only touches the nonzeros of
the sampled column block.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._backend import kernels
from .functions import grad_f_block, prox_g_block
from .problems import ProblemSpec
from .schedule import (CONSTRAINED, LIPSCHITZ, Sampler, Schedule, build_sampler,
                       make_rng)
from .smoothing import SmoothingContext, smoothed_dual, smoothed_dual_rows

__all__ = [
    "SolverError",
    "SolverDiverged",
    "DegenerateCombination",
    "SolverConfig",
    "Setup",
    "ReferenceState",
    "EfficientState",
    "Trace",
    "initialize",
    "reference_state",
    "efficient_state",
    "reference_step",
    "efficient_step",
    "g_zero_step",
    "constrained_dual_step",
    "restart",
    "advance",
    "run",
]

REFERENCE = "reference"
EFFICIENT = "efficient"

# Relative drift of the maintained residuals tolerated before a refresh.
DRIFT_TOL = 1e-8


class SolverError(RuntimeError):
    pass


class SolverDiverged(SolverError):
    def __init__(self, k):
        super().__init__(f"iterates became nonfinite at iteration {k}")
        self.k = k


class DegenerateCombination(SolverError):
    pass


@dataclass
class SolverConfig:
    beta1: float = 1.0
    alpha: float = 0.0
    variant: str = EFFICIENT
    regime: str = LIPSCHITZ
    g_zero_mode: bool = False
    max_iterations: int = 1000
    restart_period: Optional[int] = None
    seed: int = 0
    checkpoint_every: Optional[int] = None
    use_kernels: bool = True

    def validate(self, problem: Optional[ProblemSpec] = None) -> None:
        if not self.beta1 > 0:
            raise ValueError(f"beta1 must be positive, got {self.beta1}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.variant not in (REFERENCE, EFFICIENT):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.regime not in (LIPSCHITZ, CONSTRAINED):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.restart_period is not None and self.restart_period < 1:
            raise ValueError("restart_period must be >= 1")
        if self.checkpoint_every is not None and self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")
        if self.g_zero_mode and self.variant != REFERENCE:
            raise ValueError("g_zero_mode runs only in the reference variant")
        if problem is not None:
            if self.regime == CONSTRAINED and problem.h.kind != "equality":
                raise ValueError("constrained regime needs an equality-constraint h")
            if self.regime == LIPSCHITZ and not np.isfinite(problem.h.d_hstar()):
                raise ValueError("lipschitz regime needs h with bounded conjugate domain")
            if self.g_zero_mode and not problem.g.is_zero:
                raise ValueError("g_zero_mode requires g = 0")


@dataclass(frozen=True)
class Setup:
    """Quantities fixed at iteration 0: ``B_i^0``, ``q``, ``tau_0``."""

    Lhat: np.ndarray
    normA2: np.ndarray
    B0: np.ndarray
    sampler: Sampler
    tau0: float
    beta1: float
    regime: str

    def B(self, i, beta):
        return self.Lhat[i] + self.normA2[i] / beta


def initialize(problem: ProblemSpec, config: SolverConfig) -> Setup:
    Lhat = problem.f.Lhat
    normA2 = problem.A.norms**2
    B0 = Lhat + normA2 / config.beta1
    sampler = build_sampler(B0, config.alpha)
    tau0 = 1.0 if config.g_zero_mode else sampler.tau0
    return Setup(Lhat, normA2, B0, sampler, tau0, config.beta1, config.regime)


# -- reference formulation --------------------------------------------------

@dataclass
class ReferenceState:
    xbar: np.ndarray
    xtilde: np.ndarray
    schedule: Schedule
    ydot: np.ndarray
    xhat: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None

    @property
    def k(self):
        return self.schedule.k


def reference_state(problem: ProblemSpec, setup: Setup, ydot=None) -> ReferenceState:
    ydot = np.zeros(problem.m) if ydot is None else np.asarray(ydot, dtype=float).copy()
    return ReferenceState(
        xbar=problem.x0.astype(float).copy(), xtilde=problem.x0.astype(float).copy(),
        schedule=Schedule(setup.regime, setup.tau0, setup.beta1), ydot=ydot,
    )


def constrained_dual_step(ydot, beta: float, Ax, c) -> np.ndarray:
    """Dual point for ``h`` the indicator of ``{c}``: ``ydot + (Ax - c)/beta``."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return ydot + (np.asarray(Ax) - c) / beta


def _reference_common(state, problem, setup, i):
    sch = state.schedule
    tau, beta = sch.tau, sch.beta_next
    xhat = (1.0 - tau) * state.xbar + tau * state.xtilde
    y = smoothed_dual(SmoothingContext(beta, state.ydot, problem.h), problem.A.matvec(xhat))
    rows, _ = problem.A.block(i)
    grad = grad_f_block(problem.f, problem.f.image(xhat), i) + problem.A.block_t(i) @ y[rows]
    state.xhat, state.y = xhat, y
    return tau, beta, xhat, grad


def _check_finite(vec, k):
    if not np.all(np.isfinite(vec)):
        raise SolverDiverged(k)


def reference_step(state: ReferenceState, problem: ProblemSpec, setup: Setup, i: int):
    """One full-vector iteration on block ``i``; updates ``state`` in place."""
    tau, beta, xhat, grad = _reference_common(state, problem, setup, i)
    sl = problem.partition.slice(i)
    step = setup.tau0 / (tau * setup.B(i, beta))
    old = state.xtilde[sl].copy()
    new = prox_g_block(problem.g, i, old - step * grad, step)
    _check_finite(new, state.k)
    xbar = xhat.copy()
    xbar[sl] += (tau / setup.tau0) * (new - old)
    state.xtilde[sl] = new
    state.xbar = xbar
    state.schedule.advance()
    return state


def g_zero_step(state: ReferenceState, problem: ProblemSpec, setup: Setup, i: int):
    """Iteration for ``g = 0``: explicit block gradient step with step size
    ``q_i / (tau_k B_i^k)`` and averaging weight ``tau_k / q_i``."""
    if not problem.g.is_zero:
        raise ValueError("g_zero_step requires g = 0")
    tau, beta, xhat, grad = _reference_common(state, problem, setup, i)
    sl = problem.partition.slice(i)
    qi = setup.sampler.q[i]
    delta = -(qi / (tau * setup.B(i, beta))) * grad
    _check_finite(delta, state.k)
    xbar = xhat.copy()
    xbar[sl] += (tau / qi) * delta
    state.xtilde[sl] += delta
    state.xbar = xbar
    state.schedule.advance()
    return state


def _restart_reference(state: ReferenceState, problem, setup):
    sch = state.schedule
    xhat = (1.0 - sch.tau) * state.xbar + sch.tau * state.xtilde
    state.ydot = smoothed_dual(SmoothingContext(sch.beta_next, state.ydot, problem.h),
                               problem.A.matvec(xhat))
    state.xbar = state.xtilde.copy()
    sch.tau, sch.beta_next = setup.tau0, setup.beta1
    return state


# -- efficient formulation --------------------------------------------------

@dataclass
class EfficientState:
    """``xhat = c u + z``, ``xbar = c_prev u + z``, ``xtilde = z``."""

    u: np.ndarray
    z: np.ndarray
    r_uf: np.ndarray
    r_zf: np.ndarray
    r_uh: np.ndarray
    r_zh: np.ndarray
    c: float
    c_prev: float
    schedule: Schedule
    ydot: np.ndarray
    ops: int = 0
    refreshes: int = 0

    @property
    def k(self):
        return self.schedule.k

    @property
    def xbar(self):
        return self.c_prev * self.u + self.z

    @property
    def xhat(self):
        return self.c * self.u + self.z

    @property
    def xtilde(self):
        return self.z


def efficient_state(problem: ProblemSpec, setup: Setup, ydot=None) -> EfficientState:
    if setup.tau0 >= 1.0:
        raise DegenerateCombination(
            "tau_0 = 1 makes c_k vanish; use the reference variant for a single block")
    z = problem.x0.astype(float).copy()
    ydot = np.zeros(problem.m) if ydot is None else np.asarray(ydot, dtype=float).copy()
    return EfficientState(
        u=np.zeros_like(z), z=z,
        r_uf=np.zeros(problem.f.image_dim), r_zf=problem.f.image(z).astype(float),
        r_uh=np.zeros(problem.m), r_zh=problem.A.matvec(z).astype(float),
        c=1.0 - setup.tau0, c_prev=1.0,
        schedule=Schedule(setup.regime, setup.tau0, setup.beta1), ydot=ydot,
    )


def efficient_step(state: EfficientState, problem: ProblemSpec, setup: Setup, i: int):
    """One residual-maintaining iteration on block ``i``; touches only the
    nonzeros of column block ``i`` of ``A`` and ``M``."""
    sch = state.schedule
    tau, beta, c = sch.tau, sch.beta_next, state.c
    f, h = problem.f, problem.h
    sl = problem.partition.slice(i)
    rows, dense = problem.A.block(i)
    y = smoothed_dual_rows(h, state.ydot, beta, c * state.r_uh[rows] + state.r_zh[rows], rows)
    grad = problem.A.block_t(i) @ y
    if f.M is not None:
        mrows, mdense = f.M.block(i)
        grad = grad + f.M.block_t(i) @ (c * state.r_uf[mrows] + state.r_zf[mrows] - f.b[mrows])
    if f.w is not None:
        grad = grad + f.w[sl]
    step = setup.tau0 / (tau * setup.B(i, beta))
    zi = state.z[sl]
    t = prox_g_block(problem.g, i, zi - step * grad, step) - zi
    _check_finite(t, state.k)
    numer = 1.0 - tau / setup.tau0
    if c == 0.0:
        if numer != 0.0:
            raise DegenerateCombination(f"c_k = 0 at iteration {state.k}")
        coef = 0.0
    else:
        coef = numer / c
    state.z[sl] += t
    state.u[sl] -= coef * t
    dt = dense @ t
    state.r_zh[rows] += dt
    state.r_uh[rows] -= coef * dt
    ops = len(rows)
    if f.M is not None:
        dt = mdense @ t
        state.r_zf[mrows] += dt
        state.r_uf[mrows] -= coef * dt
        ops += len(mrows)
    state.ops += ops
    state.c_prev = c
    sch.advance()
    state.c = c * (1.0 - sch.tau)
    return state


def restart(state: EfficientState, problem: ProblemSpec, setup: Setup) -> EfficientState:
    """Reset momentum and move the smoothing center to the current dual point.

    ``c`` restarts at ``1 - tau_0`` rather than 1 so that a restart of a fresh
    state is a no-op; with ``u = 0`` the overall scale of ``c`` cancels.
    """
    sch = state.schedule
    state.ydot = smoothed_dual(SmoothingContext(sch.beta_next, state.ydot, problem.h),
                               state.c * state.r_uh + state.r_zh)
    state.u[:] = 0.0
    state.r_uf[:] = 0.0
    state.r_uh[:] = 0.0
    sch.tau, sch.beta_next = setup.tau0, setup.beta1
    state.c = 1.0 - setup.tau0
    state.c_prev = 1.0
    return state


def _refresh_residuals(state: EfficientState, problem: ProblemSpec) -> bool:
    fresh = {
        "r_uf": problem.f.image(state.u), "r_zf": problem.f.image(state.z),
        "r_uh": problem.A.matvec(state.u), "r_zh": problem.A.matvec(state.z),
    }
    drifted = False
    for name, true in fresh.items():
        cur = getattr(state, name)
        scale = max(np.linalg.norm(true), np.finfo(float).tiny)
        if np.linalg.norm(cur - true) > DRIFT_TOL * scale:
            setattr(state, name, np.asarray(true, dtype=float))
            drifted = True
    state.refreshes += drifted
    return drifted


class _KernelRunner:
    """Flattened arrays for the scalar-block compiled loop."""

    def __init__(self, problem: ProblemSpec, setup: Setup):
        self.setup = setup
        p = problem.partition.p
        A = problem.A.csc
        self.A = (A.indptr.astype(np.int32), A.indices.astype(np.int32), A.data)
        f = problem.f
        if f.M is not None:
            M = f.M.csc
            self.M = (M.indptr.astype(np.int32), M.indices.astype(np.int32), M.data)
            self.bvec = f.b.astype(float)
        else:
            self.M = (np.zeros(p + 1, np.int32), np.zeros(0, np.int32), np.zeros(0))
            self.bvec = np.zeros(0)
        self.w = np.zeros(p) if f.w is None else f.w.astype(float)
        self.normA2 = np.ascontiguousarray(setup.normA2, dtype=float)
        self.Lhat = np.ascontiguousarray(setup.Lhat, dtype=float)
        g = problem.g
        self.g = (g.l1, g.lo, g.hi)
        h = problem.h
        self.h_kind = 0 if h.kind == "l1" else 1
        self.h_lam = float(h.lam)
        self.cvec = np.zeros(problem.m) if h.c is None else h.c.astype(float)
        self.regime = 0 if setup.regime == LIPSCHITZ else 1
        self.tau0 = setup.tau0

    def advance(self, state: EfficientState, blocks):
        sch = state.schedule
        scal = np.array([sch.tau, sch.beta_next, state.c, state.c_prev])
        done, ops = kernels.efficient_loop(
            np.ascontiguousarray(blocks, dtype=np.int64), *self.A, *self.M,
            self.normA2, self.Lhat, self.w, self.bvec, *self.g,
            self.h_kind, self.h_lam, self.cvec, state.ydot, self.regime, self.tau0,
            state.u, state.z, state.r_uf, state.r_zf, state.r_uh, state.r_zh, scal)
        sch.tau, sch.beta_next, state.c, state.c_prev = (float(v) for v in scal)
        sch.k += done
        state.ops += ops
        if done < len(blocks):
            raise SolverDiverged(sch.k)


# -- driver -----------------------------------------------------------------

TRACE_COLUMNS = ("k", "epoch", "F", "subopt", "feas", "tau", "beta", "wall_ms")


@dataclass
class Trace:
    records: list = field(default_factory=list)
    n: int = 1
    timing: bool = True

    def add(self, **rec):
        if self.records and rec["k"] <= self.records[-1]["k"]:
            raise ValueError("trace iterations must increase")
        self.records.append(rec)

    def column(self, name):
        return np.array([np.nan if r[name] is None else r[name] for r in self.records])

    def to_csv(self, fh=None) -> str:
        out = io.StringIO() if fh is None else fh
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in self.records:
            row = []
            for col in TRACE_COLUMNS:
                v = r[col]
                if col == "wall_ms" and not self.timing:
                    v = None
                if v is None:
                    row.append("")
                elif col == "k":
                    row.append(str(int(v)))
                else:
                    row.append(format(float(v), ".17g"))
            writer.writerow(row)
        return out.getvalue() if fh is None else ""


def advance(state, problem: ProblemSpec, setup: Setup, blocks, g_zero: bool = False,
            use_kernels: bool = True):
    """Apply one iteration per entry of ``blocks`` with no checkpointing.

    Efficient states on scalar blocks with built-in g run in the compiled
    loop (or its numpy twin); everything else steps in Python.
    """
    if isinstance(state, EfficientState):
        if use_kernels and problem.partition.scalar and problem.g.builtin:
            runner = problem.extras.get("_runner")
            if runner is None or runner.setup is not setup:
                runner = _KernelRunner(problem, setup)
                problem.extras["_runner"] = runner
            runner.advance(state, blocks)
            return state
        step = efficient_step
    else:
        step = g_zero_step if g_zero else reference_step
    for i in blocks:
        step(state, problem, setup, int(i))
    return state


def run(problem: ProblemSpec, config: SolverConfig,
        callback: Optional[Callable] = None, ydot=None):
    """Solve ``problem``; returns ``(xbar, trace)``.

    ``callback(k, xbar, state)`` fires at every checkpoint.
    """
    config.validate(problem)
    setup = initialize(problem, config)
    rng = make_rng(config.seed)
    n = problem.n
    every = config.checkpoint_every or n
    efficient = config.variant == EFFICIENT
    state = (efficient_state if efficient else reference_state)(problem, setup, ydot)
    trace = Trace(n=n)
    t0 = time.perf_counter()

    def checkpoint(k):
        if efficient:
            _refresh_residuals(state, problem)
        xbar = state.xbar
        _check_finite(xbar, k)
        F = problem.objective(xbar)
        sub = None if problem.known_Fstar is None else F - problem.known_Fstar
        trace.add(k=k, epoch=k / n, F=F, subopt=sub, feas=problem.feasibility(xbar),
                  tau=state.schedule.tau, beta=state.schedule.beta_next,
                  wall_ms=1e3 * (time.perf_counter() - t0))
        if callback is not None:
            callback(k, xbar, state)

    checkpoint(0)
    k = 0
    kmax = config.max_iterations
    period = config.restart_period
    while k < kmax:
        stop = min(kmax, (k // every + 1) * every)
        if period:
            stop = min(stop, (k // period + 1) * period)
        blocks = setup.sampler.draw(rng, stop - k)
        advance(state, problem, setup, blocks, config.g_zero_mode, config.use_kernels)
        k = stop
        if k % every == 0 or k == kmax:
            checkpoint(k)
        if period and k % period == 0 and k < kmax:
            if efficient:
                restart(state, problem, setup)
            else:
                _restart_reference(state, problem, setup)
    return state.xbar.copy(), trace
