"""Outer smoothing proximal gradient driver.

Each iteration linearizes the smoothed loss H~ at the current point and solves

    z+ = argmin_{z in Z} <grad H~(z_k, mu_k), z - z_k> + R(z) + (L_k/2)||z - z_k||^2

with the splitting solver.  The pair (mu, L) is kept when the smoothed
objective decreased by more than tau2 * mu / L, otherwise mu shrinks by tau1
and L grows by tau3 (ties shrink).  The loop stops once mu <= epsilon; by the
sandwich bound the smoothed and true objectives then agree to
(||X||_1 + N1*N*beta) * epsilon.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, ProblemData, Variables, relu
from .rng import stream
from .smoothing import smoothed_loss_grad, smoothed_objective
from .subproblem import SubproblemResult, SubproblemSpec, solve_subproblem
from .trace import RunTrace, TraceRow


class DivergenceError(RuntimeError):
    """Smoothed objective blew past the divergence guard; carries the trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SpgConfig:
    mu0: float = 1e-3
    tau1: float = 0.5
    tau2: float = 1e-3
    tau3: float = 1.1
    L0: float | None = None          # None -> size-based default
    epsilon: float = 1e-7
    max_outer_iters: int = 4000
    sub_tol: float = 1e-6
    sub_max_iter: int = 10000
    divergence_factor: float = 10.0
    infnorm_bound: float | None = None  # validated-L mode: assert ||z||_inf stays below

    def __post_init__(self):
        if not (0.0 < self.mu0 < 1.0):
            raise ValueError("mu0 must lie in (0, 1)")
        if not (0.0 < self.tau1 < 1.0):
            raise ValueError("tau1 must lie in (0, 1)")
        if self.tau2 <= 0.0:
            raise ValueError("tau2 must be positive")
        if self.tau3 < 1.0:
            raise ValueError("tau3 must be >= 1")
        if self.L0 is not None and self.L0 < 1.0:
            raise ValueError("L0 must be >= 1")
        if self.epsilon <= 0.0 or self.epsilon >= self.mu0:
            raise ValueError("epsilon must lie in (0, mu0)")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if self.tau1 * self.tau3 < 1.0:
            warnings.warn("tau1*tau3 < 1: mu*L may shrink, descent guarantees do not "
                          "apply (practical setting)", stacklevel=2)


def default_l0(data: ProblemData, params: ModelParams) -> float:
    """L* = max{1, sqrt(N0*N1/N), beta, N0/30}."""
    n, n0, n1 = data.dims
    return max(1.0, math.sqrt(n0 * n1 / n), params.beta, n0 / 30.0)


def init_variables(data: ProblemData, seed: int = 0) -> Variables:
    """W ~ randn/N, zero biases, V = (W X)_+ — a point of Z with zero penalty."""
    n, n0, n1 = data.dims
    W = stream(seed, "init").standard_normal((n1, n0)) / n
    V = relu(W @ data.X)
    return Variables(W=W, b1=np.zeros(n1), b2=np.zeros(n0), V=V)


def stationarity_diagnostic(z_prev: Variables, z_next: Variables, L: float,
                            params: ModelParams) -> float:
    """Computable surrogate (2*lambda2 + L) * ||z_next - z_prev||_2.

    On shrink iterations of a validated-L run this is bounded by
    2*sqrt(tau2)*sqrt(mu), tying iterate movement to the smoothing level.
    """
    return float((2.0 * params.lambda2 + L)
                 * np.linalg.norm(z_next.pack() - z_prev.pack()))


@dataclass(frozen=True)
class StepResult:
    z_next: Variables
    mu_next: float
    L_next: float
    accepted: bool            # True: sufficient decrease, (mu, L) kept
    decrease: float           # O~(z_next, mu) - O~(z, mu)
    smoothed_before: float
    smoothed_after: float
    sub: SubproblemResult


def spg_step(z: Variables, mu: float, L: float, data: ProblemData,
             params: ModelParams, config: SpgConfig) -> StepResult:
    """One proximal step plus the (mu, L) update rule."""
    grads = smoothed_loss_grad(z, mu, data, params)
    spec = SubproblemSpec(anchor=z, grads=grads, L=L, mu=mu, params=params, data=data)
    sub = solve_subproblem(spec, tol=config.sub_tol, max_iter=config.sub_max_iter)
    before = smoothed_objective(z, mu, data, params)
    after = smoothed_objective(sub.z, mu, data, params)
    decrease = after - before
    accepted = decrease < -config.tau2 * mu / L
    if accepted:
        mu_next, L_next = mu, L
    else:
        mu_next, L_next = config.tau1 * mu, config.tau3 * L
    return StepResult(z_next=sub.z, mu_next=mu_next, L_next=L_next, accepted=accepted,
                      decrease=decrease, smoothed_before=before, smoothed_after=after,
                      sub=sub)


@dataclass
class SpgResult:
    z: Variables
    trace: RunTrace
    mu: float
    L: float
    iterations: int
    b1_clamp_hits: int


def _metrics_row(z, data, params, test_X):
    # local import: the metrics live with the data tooling
    from .data import metrics
    return metrics(z, data, params, test_X=test_X)


def run(data: ProblemData, params: ModelParams, config: SpgConfig | None = None,
        z0: Variables | None = None, seed: int = 0, test_X=None,
        sink=None) -> SpgResult:
    """Iterate spg_step until mu <= epsilon (or max iterations / divergence)."""
    config = config or SpgConfig()
    z = z0.copy() if z0 is not None else init_variables(data, seed)
    mu = config.mu0
    L = config.L0 if config.L0 is not None else default_l0(data, params)
    trace = RunTrace()

    m = _metrics_row(z, data, params, test_X)
    smoothed0 = smoothed_objective(z, mu, data, params)
    trace.append(TraceRow(k=0, mu=mu, L=L, fval=m["fval"], smoothed=smoothed0,
                          feasvi=m["feasvi"], trainerr=m["trainerr"],
                          testerr=m["testerr"], sub_iters=0, wall_ms=0.0), sink)
    guard = config.divergence_factor * abs(smoothed0) + 1e-9
    clamp_hits = 0
    k = 0
    while k < config.max_outer_iters:
        k += 1
        t0 = time.perf_counter()
        step = spg_step(z, mu, L, data, params, config)
        wall_ms = 1e3 * (time.perf_counter() - t0)
        clamp_hits += step.sub.b1_clamp_hits
        trace.stationarity.append(
            stationarity_diagnostic(z, step.z_next, L, params))
        z, mu, L = step.z_next, step.mu_next, step.L_next
        m = _metrics_row(z, data, params, test_X)
        smoothed = smoothed_objective(z, mu, data, params)
        trace.append(TraceRow(k=k, mu=mu, L=L, fval=m["fval"], smoothed=smoothed,
                              feasvi=m["feasvi"], trainerr=m["trainerr"],
                              testerr=m["testerr"], sub_iters=step.sub.iters,
                              wall_ms=wall_ms), sink)
        if config.infnorm_bound is not None:
            zmax = float(np.max(np.abs(z.pack())))
            if zmax > config.infnorm_bound * (1.0 + 1e-9):
                raise RuntimeError(f"iterate left the level-set box: ||z||_inf = "
                                   f"{zmax:.6e} > {config.infnorm_bound:.6e}")
        if step.smoothed_after > guard:
            trace.termination_reason = "diverged"
            raise DivergenceError(
                f"smoothed objective {step.smoothed_after:.6e} exceeded "
                f"{config.divergence_factor}x its initial value at iteration {k}",
                trace=trace)
        if mu <= config.epsilon:
            trace.termination_reason = "mu<=eps"
            break
    else:
        trace.termination_reason = "max_iters"
    return SpgResult(z=z, trace=trace, mu=mu, L=L, iterations=k,
                     b1_clamp_hits=clamp_hits)


def _box_radius(data: ProblemData, params: ModelParams) -> float:
    """Infinity-norm bound max{alpha, 2*eta} on level-set iterates."""
    if params.lambda1 <= 0 or params.lambda2 <= 0:
        raise ValueError("validated-L mode requires positive lambda1, lambda2")
    n, n0, n1 = data.dims
    eta = max(math.sqrt(n1 * n0 * params.theta / params.lambda2),
              params.theta / params.lambda1)
    return max(params.alpha, 2.0 * eta)


def estimate_validated_l0(data: ProblemData, params: ModelParams, mu0: float,
                          seed: int = 0, n_pairs: int = 40,
                          safety: float = 10.0) -> tuple[float, float]:
    """Sampled estimate of the L0 making every step provably non-increasing.

    mu0 * L0 must dominate max{6*lambda2*N1*N0 + (2/eta)(N2*Lh + lambda1*N1*N),
    8*lambda2 + Lg} where Lh, Lg are Lipschitz moduli of mu*H~ and its gradient
    over the level-set box times (0, 1).  The moduli are estimated from random
    pairs and inflated by ``safety``; overestimation only makes steps smaller.
    Returns (L0, box_radius).
    """
    from .smoothing import smoothed_loss  # local to avoid import noise at top

    radius = _box_radius(data, params)
    n, n0, n1 = data.dims
    eta = radius / 2.0 if radius > params.alpha else max(
        math.sqrt(n1 * n0 * params.theta / params.lambda2),
        params.theta / params.lambda1)
    rng = stream(seed, "test")
    nz = data.n_packed
    lh = lg = 0.0
    for _ in range(n_pairs):
        base = rng.uniform(-radius, radius, size=nz)
        scale = 10.0 ** rng.uniform(-4, 0) * radius
        other = np.clip(base + rng.standard_normal(nz) * scale, -radius, radius)
        mu_a = float(rng.uniform(1e-4, 1.0))
        mu_b = float(np.clip(mu_a + rng.standard_normal() * 0.1, 1e-4, 1.0))
        za, zb = Variables.unpack(base, data), Variables.unpack(other, data)
        dz = float(np.linalg.norm(base - other))
        dist = math.hypot(dz, mu_a - mu_b)
        if dist < 1e-12:
            continue
        fa = mu_a * smoothed_loss(za, mu_a, data, params)
        fb = mu_b * smoothed_loss(zb, mu_b, data, params)
        lh = max(lh, abs(fa - fb) / dist)
        ga = mu_a * smoothed_loss_grad(za, mu_a, data, params).pack()
        gb = mu_b * smoothed_loss_grad(zb, mu_b, data, params).pack()
        lg = max(lg, float(np.linalg.norm(ga - gb)) / dist)
    bound = max(6.0 * params.lambda2 * n1 * n0
                + (2.0 / eta) * (nz * lh + params.lambda1 * n1 * n),
                8.0 * params.lambda2 + lg)
    l0 = min(max(safety * bound / mu0, 1.0), 1e30)
    return l0, radius


def estimate_local_l0(z0: Variables, mu0: float, data: ProblemData,
                      params: ModelParams, seed: int = 0, n_probes: int = 8,
                      safety: float = 2.0) -> float:
    """Secant estimate of the gradient-Lipschitz scale of H~ near z0.

    The proximal weight must dominate the local curvature for the first
    steps to decrease the smoothed objective; from the near-zero default
    initialization the curvature is tiny and the practical default handles
    it, but a warm start sits in a region where entries of the
    preactivations cross the smoothing band and curvature reaches
    O(max|X| / mu).  Probing secants along random directions captures that
    scale.  Floored at default_l0, so cold-ish points fall back to the
    practical setting.
    """
    rng = stream(seed, "test")
    g0 = smoothed_loss_grad(z0, mu0, data, params).pack()
    v0 = z0.pack()
    step = 1e-3 * (1.0 + float(np.max(np.abs(v0))))
    ratio = 0.0
    for _ in range(n_probes):
        d = rng.standard_normal(v0.size)
        d /= float(np.linalg.norm(d))
        zp = Variables.unpack(v0 + step * d, data)
        gp = smoothed_loss_grad(zp, mu0, data, params).pack()
        ratio = max(ratio, float(np.linalg.norm(gp - g0)) / step)
    return min(max(safety * ratio, default_l0(data, params)), 1e12)
