"""Reductions of scalar and vector difference equations to Hamiltonian form.

Two source models are supported.  The formally self-adjoint scalar equation
of order 2n with real coefficients p_0..p_n, q_1..q_n and weight w,

    sum_{j=0}^{n} (-1)^j Delta^j (p_j nabla^j z)(t)
      + i sum_{k=1}^{n} [(-1)^{k+1} Delta^k (q_k z)(t) + q_k(t) nabla^k z(t)]
      = lam w(t) z(t),

maps to block coefficients via u_j(t) = Delta^{j-1} z(t-j).  The vector
Sturm-Liouville equation -nabla(P Delta u)(t) + Q(t) u(t) = lam W(t) u(t)
maps via v = P Delta u, which shifts Q and W forward by one lattice point.

Direct-substitution residual evaluators are provided for both models so a
converted system can be checked against its source equation independently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import HamiltonianSystem, LatticeWindow, Trajectory


def _scalar_series(values, window: LatticeWindow, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return np.full(window.length, float(arr))
    if arr.shape != (window.length,):
        raise ValueError(f"{name} must be scalar or length {window.length}, got {arr.shape}")
    return arr.copy()


@dataclass
class ScalarEquationSpec:
    """Coefficients of the order-2n scalar equation over a lattice window.

    p holds p_0..p_n (n+1 sequences), q holds q_1..q_n (n sequences, may be
    empty for n real self-adjoint equations with all q = 0), w the weight.
    """

    n: int
    window: LatticeWindow
    p: list[np.ndarray]
    q: list[np.ndarray]
    w: np.ndarray

    @classmethod
    def from_values(cls, n: int, window: LatticeWindow, p: Sequence, q: Sequence,
                    w) -> "ScalarEquationSpec":
        if len(p) != n + 1:
            raise ValueError(f"need n+1={n + 1} p-coefficients, got {len(p)}")
        if len(q) != n:
            raise ValueError(f"need n={n} q-coefficients, got {len(q)}")
        obj = cls(
            n=n,
            window=window,
            p=[_scalar_series(pj, window, f"p{j}") for j, pj in enumerate(p)],
            q=[_scalar_series(qk, window, f"q{k + 1}") for k, qk in enumerate(q)],
            w=_scalar_series(w, window, "w"),
        )
        obj.validate()
        return obj

    def validate(self) -> None:
        if np.any(np.abs(self.p[self.n]) == 0.0):
            raise ValueError("leading coefficient p_n vanishes on the window")
        if np.any(self.w < 0.0):
            raise ValueError("weight w must be nonnegative")


def from_scalar(spec: ScalarEquationSpec) -> HamiltonianSystem:
    """Block coefficients of the scalar equation in Hamiltonian form.

    A = ((0, I_{n-1}), (i q_n / p_n, 0)),  B = diag(0, ..., 0, 1/p_n),
    C = ((p_0 + q_n/p_n, alpha^T), (conj(alpha), diag(p_1..p_{n-1}))),
    W = diag(w, 0, ..., 0), with alpha = i (q_{n-1}, ..., q_1)^T.

    The state maps back to the scalar unknown by u_1(t) = z(t-1).
    """
    spec.validate()
    n = spec.n
    length = spec.window.length
    A = np.zeros((length, n, n), dtype=complex)
    B = np.zeros((length, n, n), dtype=complex)
    C = np.zeros((length, n, n), dtype=complex)
    W = np.zeros((length, n, n), dtype=complex)
    pn = spec.p[n]
    qn = spec.q[n - 1]
    if n > 1:
        A[:, : n - 1, 1:] = np.eye(n - 1)
    A[:, n - 1, 0] = 1j * qn / pn
    B[:, n - 1, n - 1] = 1.0 / pn
    C[:, 0, 0] = spec.p[0] + qn / pn
    for k in range(1, n):
        alpha_k = 1j * spec.q[n - 1 - k]
        C[:, 0, k] = alpha_k
        C[:, k, 0] = np.conj(alpha_k)
        C[:, k, k] = spec.p[k]
    W[:, 0, 0] = spec.w
    return HamiltonianSystem(n, spec.window, A, B, C, W)


@dataclass
class SturmLiouvilleSpec:
    """Coefficients P > 0, Q Hermitian, W >= 0 of the vector equation."""

    n: int
    window: LatticeWindow
    P: np.ndarray
    Q: np.ndarray
    W: np.ndarray

    @classmethod
    def from_values(cls, n: int, window: LatticeWindow, P, Q, W) -> "SturmLiouvilleSpec":
        def mat(x, name):
            arr = np.asarray(x, dtype=complex)
            if arr.ndim == 0:
                arr = arr * np.eye(n)
            if arr.ndim == 2:
                arr = np.broadcast_to(arr, (window.length, n, n)).copy()
            if arr.shape != (window.length, n, n):
                raise ValueError(f"{name} must broadcast to ({window.length},{n},{n})")
            return arr
        obj = cls(n=n, window=window, P=mat(P, "P"), Q=mat(Q, "Q"), W=mat(W, "W"))
        obj.validate()
        return obj

    def validate(self) -> None:
        for t in range(self.window.length):
            if np.linalg.eigvalsh((self.P[t] + self.P[t].conj().T) / 2)[0] <= 0:
                raise ValueError(f"P not positive definite at offset {t}")


def from_sturm_liouville(spec: SturmLiouvilleSpec) -> HamiltonianSystem:
    """Hamiltonian form with A = 0, B = P^{-1}, C(t) = Q(t+1), W(t) = W(t+1).

    The one-step shift of Q and W trims the output window to end - 1.
    """
    spec.validate()
    window = LatticeWindow(spec.window.start, spec.window.end - 1)
    length = window.length
    B = np.linalg.inv(spec.P[:length])
    C = spec.Q[1: length + 1]
    W = spec.W[1: length + 1]
    A = np.zeros((length, spec.n, spec.n), dtype=complex)
    return HamiltonianSystem(spec.n, window, A, B, C, W)


def _forward_diff(seq: np.ndarray, order: int) -> np.ndarray:
    """Delta^order along axis 0; output shrinks by order points at the end."""
    out = seq
    for _ in range(order):
        out = out[1:] - out[:-1]
    return out


def scalar_equation_residual(spec: ScalarEquationSpec, z: np.ndarray,
                             z_start: int, lam: complex) -> np.ndarray:
    """Residual of the scalar equation for a sequence z given at z_start..

    Valid lattice points are those where every shifted term stays inside the
    data; the returned array covers t = z_start + n .. z_end - n.
    """
    n = spec.n
    z = np.asarray(z, dtype=complex)
    z_end = z_start + len(z) - 1
    ts = np.arange(z_start + n, z_end - n + 1)
    if len(ts) == 0:
        raise ValueError("sequence too short for residual evaluation")
    res = np.zeros(len(ts), dtype=complex)

    def coeff(series: np.ndarray, t_arr: np.ndarray) -> np.ndarray:
        return series[t_arr - spec.window.start]

    for j in range(0, n + 1):
        # g_j(t) = p_j(t) * nabla^j z(t); nabla^j z(t) = Delta^j z (t-j)
        g_start = z_start + j
        nab = _forward_diff(z, j)  # value at index i is Delta^j z(z_start + i)
        g_ts = np.arange(g_start, z_end + 1)
        g = coeff(spec.p[j], g_ts) * nab[: len(g_ts)]
        dg = _forward_diff(g, j)  # Delta^j g at t = g_start .. z_end - j
        lo = ts[0] - g_start
        res += (-1) ** j * dg[lo: lo + len(ts)]
    for k in range(1, n + 1):
        qk = spec.q[k - 1]
        # Delta^k (q_k z)(t)
        g_ts = np.arange(z_start, z_end + 1)
        g = coeff(qk, g_ts) * z
        dg = _forward_diff(g, k)
        lo = ts[0] - z_start
        res += 1j * (-1) ** (k + 1) * dg[lo: lo + len(ts)]
        # q_k(t) nabla^k z(t)
        nab = _forward_diff(z, k)  # Delta^k z at z_start + i, nabla^k z(t) = Delta^k z(t-k)
        lo = ts[0] - k - z_start
        res += 1j * coeff(qk, ts) * nab[lo: lo + len(ts)]
    lo = ts[0] - z_start
    res -= lam * coeff(spec.w, ts) * z[lo: lo + len(ts)]
    return res


def scalar_residual_of_solution(spec: ScalarEquationSpec, sys: HamiltonianSystem,
                                y: Trajectory, lam: complex) -> np.ndarray:
    """Substitute u_1 of a converted-system trajectory back into the equation."""
    z = y.u_all[:, 0]
    z_start = y.window.start - 1  # u_1(t) = z(t-1)
    return scalar_equation_residual(spec, z, z_start, lam)


def sturm_liouville_residual(spec: SturmLiouvilleSpec, u: np.ndarray,
                             u_start: int, lam: complex) -> np.ndarray:
    """Residual -nabla(P Delta u)(t) + Q(t) u(t) - lam W(t) u(t).

    u has shape (length, n); the result covers t = u_start+1 .. u_end-1.
    """
    u = np.asarray(u, dtype=complex)
    u_end = u_start + u.shape[0] - 1
    ts = np.arange(u_start + 1, u_end)
    du = u[1:] - u[:-1]  # Delta u at u_start + i
    a0 = spec.window.start
    P = spec.P[np.arange(u_start, u_end) - a0]
    g = np.einsum("tij,tj->ti", P, du)  # (P Delta u)(t), t = u_start .. u_end-1
    ng = g[1:] - g[:-1]  # nabla(P Delta u)(t) at t = u_start+1 .. u_end-1
    Q = spec.Q[ts - a0]
    W = spec.W[ts - a0]
    mid = u[1:-1]
    return -ng + np.einsum("tij,tj->ti", Q - lam * W, mid)
