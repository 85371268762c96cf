"""Problem data, packed variables, objective pieces and feasibility machinery.

The training variable is z = (vec(W), b, vec(V)) with b = (b1; b2), for a
two-layer ReLU autoencoder on a nonnegative data matrix X whose columns are
samples.  The objective splits as

    O(z) = F(z) + R(z) + P(z)

with fidelity F(z) = (1/N) sum_n ||(W^T v_n + b2)_+ - x_n||^2, regularizer
R(z) = lambda1 * sum_n e^T v_n + lambda2 * ||W||_F^2, and the exact penalty
P(z) = beta * sum_n e^T (v_n - (W x_n + b1)_+) that couples the code columns
v_n to the encoder output.  Feasibility lives on

    Z = Omega2 ∩ Omega3,
    Omega2 = {v_n >= (W x_n + b1)_+},  Omega3 = {||b||_inf <= alpha},

a polyhedron {A z <= c} with nu = 2(N*N1 + N0 + N1) rows; A is only ever
applied implicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def relu(y):
    """Elementwise positive part."""
    return np.maximum(y, 0.0)


@dataclass(frozen=True)
class ProblemData:
    """Data matrix (columns are samples) plus the hidden width and cached norms."""

    X: np.ndarray       # (N0, N), entrywise nonnegative
    n_samples: int      # N
    n_visible: int      # N0
    n_hidden: int       # N1
    fro_sq: float       # ||X||_F^2
    one_norm: float     # ||X||_1 = max absolute column sum

    @classmethod
    def from_matrix(cls, X, n_hidden: int) -> "ProblemData":
        X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("X must be a nonempty 2-d matrix with sample columns")
        if int(n_hidden) < 1:
            raise ValueError("n_hidden must be a positive integer")
        if not np.all(np.isfinite(X)):
            raise ValueError("X must be finite")
        if np.any(X < 0):
            raise ValueError("X must be entrywise nonnegative")
        return cls(
            X=X,
            n_samples=X.shape[1],
            n_visible=X.shape[0],
            n_hidden=int(n_hidden),
            fro_sq=float(np.sum(X * X)),
            one_norm=float(np.max(np.sum(np.abs(X), axis=0))),
        )

    @property
    def dims(self) -> tuple[int, int, int]:
        """(N, N0, N1)."""
        return (self.n_samples, self.n_visible, self.n_hidden)

    @property
    def n_packed(self) -> int:
        """Length of the packed variable, N0*N1 + N1 + N0 + N1*N."""
        n, n0, n1 = self.n_samples, self.n_visible, self.n_hidden
        return n0 * n1 + n1 + n0 + n1 * n


def constraint_count(data: ProblemData) -> int:
    """Number nu of rows of the implicit constraint system A z <= c."""
    n, n0, n1 = data.dims
    return 2 * (n * n1 + n0 + n1)


def compute_alpha(data: ProblemData, lambda1: float, lambda2: float, theta: float) -> float:
    """Box radius for the bias, sized so the box never cuts off minimizers.

    alpha = max{ theta/lambda1 + sqrt(N1*N0*theta/lambda2) * ||X||_1,
                 theta*sqrt(N1*N0*theta)/(lambda1*sqrt(lambda2))
                 + sqrt(N*theta) + ||X||_1 }.

    Requires lambda1, lambda2 > 0 and theta > ||X||_F^2 / N.
    """
    if lambda1 <= 0 or lambda2 <= 0:
        raise ValueError("derived alpha requires lambda1 > 0 and lambda2 > 0")
    if theta <= data.fro_sq / data.n_samples:
        raise ValueError("theta must exceed ||X||_F^2 / N")
    n, n0, n1 = data.dims
    root = math.sqrt(n1 * n0 * theta / lambda2)
    branch1 = theta / lambda1 + root * data.one_norm
    branch2 = theta / lambda1 * root + math.sqrt(n * theta) + data.one_norm
    return max(branch1, branch2)


@dataclass(frozen=True)
class ModelParams:
    """Penalty weights and the bias box radius."""

    lambda1: float
    lambda2: float
    beta: float
    theta: float
    alpha: float

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be nonnegative")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    @classmethod
    def from_data(cls, data: ProblemData, lambda1: float = 1e-4, lambda2: float = 0.1,
                  beta: float | None = None, theta: float | None = None,
                  alpha: float | None = None) -> "ModelParams":
        """Fill defaults: beta = 1/N, theta = 1.1*||X||_F^2/N (or 1.1 for zero data),
        alpha derived from the level-set bound unless given explicitly."""
        if beta is None:
            beta = 1.0 / data.n_samples
        if theta is None:
            base = data.fro_sq / data.n_samples
            theta = 1.1 * base if base > 0 else 1.1
        elif theta <= data.fro_sq / data.n_samples:
            raise ValueError("theta must exceed ||X||_F^2 / N")
        if alpha is None:
            if lambda1 <= 0 or lambda2 <= 0:
                raise ValueError("lambda1, lambda2 must be positive unless alpha is given")
            alpha = compute_alpha(data, lambda1, lambda2, theta)
        return cls(lambda1=float(lambda1), lambda2=float(lambda2), beta=float(beta),
                   theta=float(theta), alpha=float(alpha))


@dataclass
class Variables:
    """Decoder weight W (N1 x N0), biases b1 (N1,), b2 (N0,), codes V (N1 x N).

    Packing is column-major: z = (vec(W), b1, b2, vec(V)).
    """

    W: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    V: np.ndarray

    @classmethod
    def zeros(cls, data: ProblemData) -> "Variables":
        n, n0, n1 = data.dims
        return cls(W=np.zeros((n1, n0)), b1=np.zeros(n1), b2=np.zeros(n0),
                   V=np.zeros((n1, n)))

    @classmethod
    def unpack(cls, vec: np.ndarray, dims) -> "Variables":
        """dims is (N, N0, N1) or anything exposing a .dims tuple."""
        if hasattr(dims, "dims"):
            dims = dims.dims
        vec = np.asarray(vec, dtype=np.float64).ravel()
        n, n0, n1 = dims
        expected = n0 * n1 + n1 + n0 + n1 * n
        if vec.size != expected:
            raise ValueError(f"packed length {vec.size} != expected {expected}")
        o = 0
        W = vec[o:o + n1 * n0].reshape((n1, n0), order="F").copy(); o += n1 * n0
        b1 = vec[o:o + n1].copy(); o += n1
        b2 = vec[o:o + n0].copy(); o += n0
        V = vec[o:o + n1 * n].reshape((n1, n), order="F").copy()
        return cls(W=W, b1=b1, b2=b2, V=V)

    def pack(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(order="F"), self.b1, self.b2,
                               self.V.ravel(order="F")])

    @property
    def b(self) -> np.ndarray:
        """Stacked bias (b1; b2)."""
        return np.concatenate([self.b1, self.b2])

    def copy(self) -> "Variables":
        return Variables(W=self.W.copy(), b1=self.b1.copy(), b2=self.b2.copy(),
                         V=self.V.copy())


def preactivations(z: Variables, data: ProblemData) -> tuple[np.ndarray, np.ndarray]:
    """Decoder and encoder pre-activations (Y, S) = (W^T V + b2 1^T, W X + b1 1^T)."""
    Y = z.W.T @ z.V + z.b2[:, None]
    S = z.W @ data.X + z.b1[:, None]
    return Y, S


def fidelity(z: Variables, data: ProblemData) -> float:
    """F(z) = (1/N) sum_n ||(W^T v_n + b2)_+ - x_n||^2."""
    Y = z.W.T @ z.V + z.b2[:, None]
    diff = relu(Y) - data.X
    return float(np.sum(diff * diff)) / data.n_samples


def regularizer(z: Variables, params: ModelParams) -> float:
    """R(z) = lambda1 * sum(V) + lambda2 * ||W||_F^2."""
    return float(params.lambda1 * np.sum(z.V) + params.lambda2 * np.sum(z.W * z.W))


def penalty(z: Variables, data: ProblemData, params: ModelParams) -> float:
    """P(z) = beta * sum_n e^T (v_n - (W x_n + b1)_+); nonnegative on Omega2."""
    S = z.W @ data.X + z.b1[:, None]
    return float(params.beta * np.sum(z.V - relu(S)))


def objective(z: Variables, data: ProblemData, params: ModelParams) -> float:
    """O(z) = F + R + P."""
    return fidelity(z, data) + regularizer(z, params) + penalty(z, data, params)


def project_bias_box(z: Variables, alpha: float) -> Variables:
    """Clamp both bias blocks into [-alpha, alpha]; W and V untouched.

    On the level set {O <= theta} ∩ Omega2 the clamp can only move bias
    entries whose pre-activations are already dead, so the objective value is
    preserved exactly.
    """
    out = z.copy()
    np.clip(out.b1, -alpha, alpha, out=out.b1)
    np.clip(out.b2, -alpha, alpha, out=out.b2)
    return out


@dataclass(frozen=True)
class FeasibilityReport:
    """Max violations of the three constraint families plus a Z membership flag."""

    omega1_violation: float   # max |v_n - (W x_n + b1)_+|
    omega2_violation: float   # max positive part of (W x_n + b1)_+ - v_n
    omega3_violation: float   # max(0, ||b||_inf - alpha)
    in_Z: bool


def feasibility(z: Variables, data: ProblemData, params: ModelParams,
                tol: float = 1e-10) -> FeasibilityReport:
    S = z.W @ data.X + z.b1[:, None]
    target = relu(S)
    om1 = float(np.max(np.abs(z.V - target))) if z.V.size else 0.0
    om2 = float(max(0.0, np.max(target - z.V))) if z.V.size else 0.0
    binf = float(np.max(np.abs(np.concatenate([z.b1, z.b2]))))
    om3 = max(0.0, binf - params.alpha)
    return FeasibilityReport(omega1_violation=om1, omega2_violation=om2,
                             omega3_violation=om3,
                             in_Z=bool(om2 <= tol and om3 <= tol))


def constraint_residuals(z: Variables, data: ProblemData, params: ModelParams) -> np.ndarray:
    """Residual vector A z - c of the implicit system, length nu.

    Block order: coupling rows (W x_n + b1 - v_n, column-major over samples),
    code nonnegativity rows (-v_n), upper box rows (b - alpha), lower box rows
    (-b - alpha).  z in Z iff every entry is <= 0.
    """
    S = z.W @ data.X + z.b1[:, None]
    b = np.concatenate([z.b1, z.b2])
    return np.concatenate([
        (S - z.V).ravel(order="F"),
        (-z.V).ravel(order="F"),
        b - params.alpha,
        -b - params.alpha,
    ])
