"""Domain types and bilinear forms for discrete linear Hamiltonian systems.

The system on the integer half-line lattice couples a state u and costate v
through coefficient sequences A, B, C and a weight W (all n x n, B, C, W
Hermitian, B >= 0, W >= 0, I - A(t) invertible):

    Delta u(t) = A(t) u(t+1) + B(t) v(t)
    Delta v(t) = (C(t) - lam W(t)) u(t+1) - A*(t) v(t)

Everything here is finite-window: coefficients are materialized per lattice
point so validation reports can cite exact t, and all operations are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError

DEFAULT_TOL = 1e-10

MatrixLike = Callable[[int], np.ndarray] | np.ndarray | complex | float


def spectral_norm(x: np.ndarray) -> float:
    x = np.atleast_2d(np.asarray(x))
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x, 2))


def hermitian_defect(x: np.ndarray) -> float:
    return spectral_norm(x - x.conj().T)


def min_eigenvalue(x: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part of ``x``."""
    h = (x + x.conj().T) / 2.0
    return float(np.linalg.eigvalsh(h)[0])


def canonical_j(n: int) -> np.ndarray:
    """The 2n x 2n canonical symplectic matrix ((0, -I), (I, 0))."""
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = -np.eye(n)
    j[n:, :n] = np.eye(n)
    return j


@dataclass(frozen=True)
class LatticeWindow:
    """Finite truncation [start, end] of the half-line lattice."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0 or self.end <= self.start:
            raise DomainError(f"invalid window [{self.start}, {self.end}]")

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def points(self) -> np.ndarray:
        return np.arange(self.start, self.end + 1)

    def contains(self, t: int) -> bool:
        return self.start <= t <= self.end

    def require(self, t: int) -> None:
        if not self.contains(t):
            raise DomainError(f"t={t} outside window [{self.start}, {self.end}]")

    def subwindow(self, start: int, end: int) -> "LatticeWindow":
        w = LatticeWindow(start, end)
        if w.start < self.start or w.end > self.end:
            raise DomainError(f"[{start}, {end}] not inside [{self.start}, {self.end}]")
        return w


def _materialize(spec: MatrixLike, n: int, window: LatticeWindow) -> np.ndarray:
    """Expand a constant / callable / stacked-array coefficient to (L, n, n)."""
    length = window.length
    if callable(spec):
        out = np.empty((length, n, n), dtype=complex)
        for i, t in enumerate(window.points()):
            out[i] = np.asarray(spec(int(t)), dtype=complex).reshape(n, n)
        return out
    arr = np.asarray(spec, dtype=complex)
    if arr.ndim == 0:
        out = np.broadcast_to(arr.reshape(1, 1) * np.eye(n) if n > 1 else arr.reshape(1, 1), (length, n, n))
        return np.ascontiguousarray(out)
    if arr.ndim == 2:
        if arr.shape != (n, n):
            raise ValueError(f"constant coefficient must be {n}x{n}, got {arr.shape}")
        return np.ascontiguousarray(np.broadcast_to(arr, (length, n, n)))
    if arr.ndim == 3:
        if arr.shape != (length, n, n):
            raise ValueError(f"coefficient stack must be ({length}, {n}, {n}), got {arr.shape}")
        return arr.copy()
    raise ValueError(f"cannot interpret coefficient of shape {arr.shape}")


class HamiltonianSystem:
    """Coefficient data of one system over a finite lattice window.

    Coefficients are stored for every t in the window; the last point is
    included so quadratic forms and inner products that look one step ahead
    stay inside the data.
    """

    def __init__(self, n: int, window: LatticeWindow,
                 A: MatrixLike, B: MatrixLike, C: MatrixLike, W: MatrixLike):
        self.n = int(n)
        self.window = window
        self.A = _materialize(A, self.n, window)
        self.B = _materialize(B, self.n, window)
        self.C = _materialize(C, self.n, window)
        self.W = _materialize(W, self.n, window)
        for arr in (self.A, self.B, self.C, self.W):
            arr.setflags(write=False)
        self._a_tilde: np.ndarray | None = None

    @classmethod
    def constant(cls, n: int, window: LatticeWindow,
                 A: MatrixLike = 0.0, B: MatrixLike = 1.0,
                 C: MatrixLike = 0.0, W: MatrixLike = 1.0) -> "HamiltonianSystem":
        def expand(x):
            arr = np.asarray(x, dtype=complex)
            return arr * np.eye(n) if arr.ndim == 0 else arr
        return cls(n, window, expand(A), expand(B), expand(C), expand(W))

    def idx(self, t: int) -> int:
        self.window.require(t)
        return t - self.window.start

    def a(self, t: int) -> np.ndarray:
        return self.A[self.idx(t)]

    def b(self, t: int) -> np.ndarray:
        return self.B[self.idx(t)]

    def c(self, t: int) -> np.ndarray:
        return self.C[self.idx(t)]

    def w(self, t: int) -> np.ndarray:
        return self.W[self.idx(t)]

    def a_tilde_all(self) -> np.ndarray:
        """(I - A(t))^{-1} for every t, computed once."""
        if self._a_tilde is None:
            eye = np.eye(self.n)
            self._a_tilde = np.linalg.solve(eye[None, :, :] - self.A,
                                            np.broadcast_to(eye, self.A.shape).copy())
            self._a_tilde.setflags(write=False)
        return self._a_tilde

    def a_tilde(self, t: int) -> np.ndarray:
        return self.a_tilde_all()[self.idx(t)]

    def c_tilde(self, t: int, lam: complex) -> np.ndarray:
        return self.c(t) - lam * self.w(t)

    def __repr__(self) -> str:
        return (f"HamiltonianSystem(n={self.n}, "
                f"window=[{self.window.start}, {self.window.end}])")


@dataclass(frozen=True)
class SpectralParameter:
    """Spectral point lam together with the real disconjugacy reference lam0."""

    lam: complex
    lam0: float

    def require_real(self) -> float:
        if abs(complex(self.lam).imag) > 0:
            raise ValueError(f"operation requires real lam, got {self.lam}")
        return float(complex(self.lam).real)


class Trajectory:
    """Vector-valued lattice function y(t) = (u(t); v(t)) in C^{2n}."""

    def __init__(self, window: LatticeWindow, values: np.ndarray):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 2 or values.shape[0] != window.length or values.shape[1] % 2:
            raise ValueError(f"trajectory values of shape {values.shape} do not fit window")
        self.window = window
        self.values = values
        self.values.setflags(write=False)
        self.n = values.shape[1] // 2

    def at(self, t: int) -> np.ndarray:
        self.window.require(t)
        return self.values[t - self.window.start]

    def u(self, t: int) -> np.ndarray:
        return self.at(t)[: self.n]

    def v(self, t: int) -> np.ndarray:
        return self.at(t)[self.n:]

    @property
    def u_all(self) -> np.ndarray:
        return self.values[:, : self.n]

    @property
    def v_all(self) -> np.ndarray:
        return self.values[:, self.n:]

    def restricted(self, window: LatticeWindow) -> "Trajectory":
        w = self.window.subwindow(window.start, window.end)
        i0 = w.start - self.window.start
        return Trajectory(w, self.values[i0: i0 + w.length].copy())


class ConjoinedBasis:
    """Matrix-valued lattice function Y(t) = (U(t); V(t)) in C^{2n x k}."""

    def __init__(self, window: LatticeWindow, values: np.ndarray):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 3 or values.shape[0] != window.length or values.shape[1] % 2:
            raise ValueError(f"basis values of shape {values.shape} do not fit window")
        self.window = window
        self.values = values
        self.values.setflags(write=False)
        self.n = values.shape[1] // 2
        self.k = values.shape[2]

    def at(self, t: int) -> np.ndarray:
        self.window.require(t)
        return self.values[t - self.window.start]

    def u(self, t: int) -> np.ndarray:
        return self.at(t)[: self.n]

    def v(self, t: int) -> np.ndarray:
        return self.at(t)[self.n:]

    @property
    def u_all(self) -> np.ndarray:
        return self.values[:, : self.n, :]

    @property
    def v_all(self) -> np.ndarray:
        return self.values[:, self.n:, :]

    def column(self, j: int) -> Trajectory:
        return Trajectory(self.window, self.values[:, :, j].copy())

    def right_multiplied(self, g: np.ndarray) -> "ConjoinedBasis":
        return ConjoinedBasis(self.window, self.values @ g)

    def restricted(self, window: LatticeWindow) -> "ConjoinedBasis":
        w = self.window.subwindow(window.start, window.end)
        i0 = w.start - self.window.start
        return ConjoinedBasis(w, self.values[i0: i0 + w.length].copy())

    @classmethod
    def from_trajectory(cls, y: Trajectory) -> "ConjoinedBasis":
        return cls(y.window, y.values[:, :, None].copy())


@dataclass(frozen=True)
class Violation:
    t: int
    kind: str
    magnitude: float
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, t: int, kind: str, magnitude: float, message: str) -> None:
        self.violations.append(Violation(t, kind, magnitude, message))

    def summary(self) -> str:
        if self.ok:
            return "system valid"
        return "; ".join(f"t={v.t}: {v.message}" for v in self.violations[:20])


def validate_system(sys: HamiltonianSystem, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check Hermiticity/PSD of B, W, Hermiticity of C, invertibility of I - A.

    Violations are collected per lattice point, never raised: a system
    failing one constraint somewhere is still propagatable for diagnostics.
    """
    report = ValidationReport()
    eye = np.eye(sys.n)
    for i, t in enumerate(sys.window.points()):
        t = int(t)
        for name, mat, psd in (("B", sys.B[i], True), ("W", sys.W[i], True),
                               ("C", sys.C[i], False)):
            scale = max(1.0, spectral_norm(mat))
            defect = hermitian_defect(mat)
            if defect > tol * scale:
                report.add(t, f"{name}_not_hermitian", defect,
                           f"{name} not Hermitian (defect {defect:.3e})")
            elif psd:
                lo = min_eigenvalue(mat)
                if lo < -tol * scale:
                    report.add(t, f"{name}_not_psd", -lo,
                               f"{name} not positive semidefinite (min eig {lo:.3e})")
        ia = eye - sys.A[i]
        smin = float(np.linalg.svd(ia, compute_uv=False)[-1])
        if smin <= tol * max(1.0, spectral_norm(ia)):
            report.add(t, "I_minus_A_singular", smin,
                       f"I - A singular (smallest singular value {smin:.3e})")
    return report


def symplectic_form(y1: Trajectory, y2: Trajectory, t: int) -> complex:
    """(y1, y2)(t) := y2*(t) J y1(t); constant in t for two solutions at real lam."""
    j = canonical_j(y1.n)
    return complex(y2.at(t).conj() @ j @ y1.at(t))


def conjoined_form(y1: ConjoinedBasis | Trajectory, y2: ConjoinedBasis | Trajectory,
                   t: int) -> np.ndarray:
    """Matrix form Y2*(t) J Y1(t) for matrix or vector arguments."""
    a1 = y1.at(t)
    a2 = y2.at(t)
    if a1.ndim == 1:
        a1 = a1[:, None]
    if a2.ndim == 1:
        a2 = a2[:, None]
    j = canonical_j(a1.shape[0] // 2)
    return a2.conj().T @ j @ a1


def _l1_l2(sys: HamiltonianSystem, y: Trajectory | ConjoinedBasis,
           t_lo: int, t_hi: int) -> tuple[np.ndarray, np.ndarray]:
    """Stacked L1(y)(t), L2(y)(t) for t in [t_lo, t_hi]; needs y on [t_lo, t_hi+1].

    L1(y)(t) = -Delta v(t) + C(t) u(t+1) - A*(t) v(t)
    L2(y)(t) =  Delta u(t) - A(t) u(t+1) - B(t) v(t)
    """
    i0 = y.window.start
    sl = slice(t_lo - i0, t_hi + 1 - i0)
    sl1 = slice(t_lo + 1 - i0, t_hi + 2 - i0)
    u0, v0 = y.u_all[sl], y.v_all[sl]
    u1, v1 = y.u_all[sl1], y.v_all[sl1]
    a0 = sys.window.start
    csl = slice(t_lo - a0, t_hi + 1 - a0)
    A, B, C = sys.A[csl], sys.B[csl], sys.C[csl]
    if y.u_all.ndim == 2:  # vector trajectory: use matmul-friendly shapes
        l1 = -(v1 - v0) + np.einsum("tij,tj->ti", C, u1) - np.einsum("tij,tj->ti", A.conj().transpose(0, 2, 1), v0)
        l2 = (u1 - u0) - np.einsum("tij,tj->ti", A, u1) - np.einsum("tij,tj->ti", B, v0)
    else:
        l1 = -(v1 - v0) + C @ u1 - A.conj().transpose(0, 2, 1) @ v0
        l2 = (u1 - u0) - A @ u1 - B @ v0
    return l1, l2


def operator_residuals(sys: HamiltonianSystem, lam: complex,
                       y: Trajectory | ConjoinedBasis) -> tuple[np.ndarray, np.ndarray]:
    """Residuals r1(t) = L1(y)(t) - lam W(t) u(t+1), r2(t) = L2(y)(t).

    Both vanish identically exactly when y solves the system at lam.  Arrays
    cover t in [window.start, window.end - 1].
    """
    t_lo, t_hi = y.window.start, y.window.end - 1
    l1, l2 = _l1_l2(sys, y, t_lo, t_hi)
    i0 = y.window.start
    u1 = y.u_all[t_lo + 1 - i0: t_hi + 2 - i0]
    a0 = sys.window.start
    Wc = sys.W[t_lo - a0: t_hi + 1 - a0]
    if u1.ndim == 2:
        r1 = l1 - lam * np.einsum("tij,tj->ti", Wc, u1)
    else:
        r1 = l1 - lam * (Wc @ u1)
    return r1, l2


def solution_residual(sys: HamiltonianSystem, lam: complex,
                      y: Trajectory | ConjoinedBasis) -> float:
    r1, r2 = operator_residuals(sys, lam, y)
    return max(float(np.max(np.abs(r1))), float(np.max(np.abs(r2))))


def lagrange_identity_check(sys: HamiltonianSystem, y1: Trajectory, y2: Trajectory,
                            s: int, k: int) -> float:
    """Defect of the summed Lagrange identity on [s, k].

    | sum_{t=s}^{k} [R(y2)*(t) L(y1)(t) - L(y2)*(t) R(y1)(t)]
      - ((y1, y2)(k+1) - (y1, y2)(s)) |

    with R(y)(t) = (u(t+1); v(t)) and L = (L1; L2).  The identity is
    algebraic: it holds for arbitrary lattice functions, not only solutions.
    """
    if not (s < k):
        raise DomainError(f"need s < k, got s={s}, k={k}")
    for y in (y1, y2):
        if y.window.start > s or y.window.end < k + 1:
            raise DomainError("trajectories must cover [s, k+1]")
    l1a, l2a = _l1_l2(sys, y1, s, k)
    l1b, l2b = _l1_l2(sys, y2, s, k)
    i1 = y1.window.start
    i2 = y2.window.start
    u1n = y1.u_all[s + 1 - i1: k + 2 - i1]
    v1 = y1.v_all[s - i1: k + 1 - i1]
    u2n = y2.u_all[s + 1 - i2: k + 2 - i2]
    v2 = y2.v_all[s - i2: k + 1 - i2]
    lhs = np.sum(np.conj(u2n) * l1a) + np.sum(np.conj(v2) * l2a) \
        - np.sum(np.conj(l1b) * u1n) - np.sum(np.conj(l2b) * v1)
    rhs = symplectic_form(y1, y2, k + 1) - symplectic_form(y1, y2, s)
    return abs(lhs - rhs)


def weighted_inner(sys: HamiltonianSystem, y1: Trajectory, y2: Trajectory,
                   window: LatticeWindow) -> complex:
    """Truncated semi-inner product sum_{t in window} u2*(t+1) W(t) u1(t+1)."""
    for y in (y1, y2):
        if y.window.start > window.start or y.window.end < window.end + 1:
            raise DomainError("trajectories must cover the window shifted by one")
    a0 = sys.window.start
    W = sys.W[window.start - a0: window.end + 1 - a0]
    u1 = y1.u_all[window.start + 1 - y1.window.start: window.end + 2 - y1.window.start]
    u2 = y2.u_all[window.start + 1 - y2.window.start: window.end + 2 - y2.window.start]
    return complex(np.einsum("ti,tij,tj->", np.conj(u2), W, u1))


def w_norm(sys: HamiltonianSystem, y: Trajectory, window: LatticeWindow) -> float:
    val = weighted_inner(sys, y, y, window)
    return float(np.sqrt(max(val.real, 0.0)))


def green_identity_check(sys: HamiltonianSystem, lam: complex, y1: Trajectory,
                         y2: Trajectory, window: LatticeWindow,
                         pre_tol: float = 1e-8) -> float:
    """Defect of the truncated Green identity for a solution y1 at lam.

    With y1 solving the system at lam (right side lam*y1) and y2 admissible
    (L2(y2) = 0), the identity reads

        lam <y1, y2>_W = sum { u2* C u1(t+1) + v2* B v1 } - u2* v1 |_a^{b+1}.
    """
    from .errors import MembershipPreconditionError

    res1 = solution_residual(sys, lam, y1.restricted(
        LatticeWindow(window.start, window.end + 1)))
    if res1 > pre_tol:
        raise MembershipPreconditionError(
            f"y1 does not solve the system at lam={lam} (residual {res1:.3e})")
    _, l2b = _l1_l2(sys, y2, window.start, window.end)
    if float(np.max(np.abs(l2b))) > pre_tol:
        raise MembershipPreconditionError("y2 is not admissible (L2(y2) != 0)")

    lhs = lam * weighted_inner(sys, y1, y2, window)
    a, b = window.start, window.end
    a0 = sys.window.start
    B = sys.B[a - a0: b + 1 - a0]
    C = sys.C[a - a0: b + 1 - a0]
    u1 = y1.u_all[a + 1 - y1.window.start: b + 2 - y1.window.start]
    v1 = y1.v_all[a - y1.window.start: b + 1 - y1.window.start]
    u2 = y2.u_all[a + 1 - y2.window.start: b + 2 - y2.window.start]
    v2 = y2.v_all[a - y2.window.start: b + 1 - y2.window.start]
    bulk = np.einsum("ti,tij,tj->", np.conj(u2), C, u1) \
        + np.einsum("ti,tij,tj->", np.conj(v2), B, v1)
    boundary = complex(y2.u(b + 1).conj() @ y1.v(b + 1)) \
        - complex(y2.u(a).conj() @ y1.v(a))
    return abs(lhs - (bulk - boundary))


@dataclass
class DefinitenessResult:
    holds: bool
    gram: np.ndarray
    min_eigenvalue: float
    window: LatticeWindow


def definiteness_check(sys: HamiltonianSystem, window: LatticeWindow,
                       lam: float = 0.0, tol: float = DEFAULT_TOL) -> DefinitenessResult:
    """Positive definiteness of the windowed W-Gram over all solutions.

    Builds G = sum_{t in window} Phi_u*(t+1) W(t) Phi_u(t+1) from the
    fundamental solution matrix with Phi(window.start) = I.  The condition is
    lam-independent, so one real lam suffices.
    """
    from .propagate import fundamental_matrix

    phi = fundamental_matrix(sys, lam, window.start, window.end + 1)
    a0 = sys.window.start
    W = sys.W[window.start - a0: window.end + 1 - a0]
    i0 = phi.window.start
    phi_u = phi.u_all[window.start + 1 - i0: window.end + 2 - i0]
    g = np.einsum("tli,tlm,tmj->ij", np.conj(phi_u), W, phi_u)
    g = (g + g.conj().T) / 2.0
    lo = float(np.linalg.eigvalsh(g)[0])
    holds = lo > tol * max(1.0, spectral_norm(g))
    return DefinitenessResult(holds=holds, gram=g, min_eigenvalue=lo, window=window)
