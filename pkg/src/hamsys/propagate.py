"""One-step transfer matrices and initial/boundary value solvers.

The first-order form of the system is y(t+1) = M(t, lam) y(t) with

    M = ( At        At B  )        At = (I - A)^{-1}
        ( Ct At     D     )        Ct = C - lam W
                                   D  = Ct At B + I - A*

For real lam, M is symplectic (M* J M = J), which keeps long products
well conditioned and makes the backward step explicit: M^{-1} = -J M* J.

Dominant solution growth can overflow raw values over long ranges, so the
boundary-value machinery includes a segment-renormalized backward sweep that
stores orthonormalized frames plus stitch factors; decaying solution values
are then reproduced down to (and gracefully past) the underflow threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (ConjoinedBasis, HamiltonianSystem, LatticeWindow, Trajectory,
                   canonical_j, spectral_norm)
from .errors import DomainError, ShootingSingularError, SingularTransferError

SIGMA_MIN_FACTOR = 1e-10
RAW_NORM_GUARD = 1e140


@dataclass(frozen=True)
class TransferMatrix:
    """One-step map y(t+1) = M y(t) at lattice point t and spectral point lam."""

    t: int
    lam: complex
    matrix: np.ndarray


def transfer_matrix(sys: HamiltonianSystem, t: int, lam: complex) -> np.ndarray:
    n = sys.n
    at = sys.a_tilde(t)
    ct = sys.c_tilde(t, lam)
    m = np.empty((2 * n, 2 * n), dtype=complex)
    m[:n, :n] = at
    m[:n, n:] = at @ sys.b(t)
    m[n:, :n] = ct @ at
    m[n:, n:] = ct @ at @ sys.b(t) + np.eye(n) - sys.a(t).conj().T
    return m


def transfer(sys: HamiltonianSystem, t: int, lam: complex) -> TransferMatrix:
    return TransferMatrix(t=t, lam=lam, matrix=transfer_matrix(sys, t, lam))


def transfer_all(sys: HamiltonianSystem, lam: complex, t_lo: int, t_hi: int) -> np.ndarray:
    """Stacked transfer matrices for t in [t_lo, t_hi]."""
    sys.window.require(t_lo)
    sys.window.require(t_hi)
    a0 = sys.window.start
    sl = slice(t_lo - a0, t_hi + 1 - a0)
    at = sys.a_tilde_all()[sl]
    A = sys.A[sl]
    B = sys.B[sl]
    ct = sys.C[sl] - lam * sys.W[sl]
    n = sys.n
    m = np.empty((at.shape[0], 2 * n, 2 * n), dtype=complex)
    atb = at @ B
    cta = ct @ at
    m[:, :n, :n] = at
    m[:, :n, n:] = atb
    m[:, n:, :n] = cta
    m[:, n:, n:] = ct @ atb + np.eye(n) - A.conj().transpose(0, 2, 1)
    return m


def check_symplectic(m: TransferMatrix | np.ndarray) -> float:
    """Spectral-norm defect ||M* J M - J||."""
    mat = m.matrix if isinstance(m, TransferMatrix) else np.asarray(m)
    j = canonical_j(mat.shape[0] // 2)
    return spectral_norm(mat.conj().T @ j @ mat - j)


def symplectify(mat: np.ndarray) -> np.ndarray:
    """One defect-correction step toward the symplectic group.

    With E = M* J M - J (skew-Hermitian), M(I + J E / 2) cancels the defect
    to first order; useful as periodic re-orthogonalization in long products.
    """
    j = canonical_j(mat.shape[0] // 2)
    e = mat.conj().T @ j @ mat - j
    return mat @ (np.eye(mat.shape[0]) + 0.5 * (j @ e))


def _backward_step_matrix(m: np.ndarray, lam: complex, tol: float = 1e-13) -> np.ndarray:
    if abs(complex(lam).imag) == 0.0:
        j = canonical_j(m.shape[0] // 2)
        return -j @ m.conj().T @ j
    smin = float(np.linalg.svd(m, compute_uv=False)[-1])
    if smin <= tol * max(1.0, spectral_norm(m)):
        raise SingularTransferError(
            f"transfer matrix not invertible for backward sweep (sigma_min {smin:.3e})")
    return np.linalg.inv(m)


def solve_ivp(sys: HamiltonianSystem, lam: complex, t0: int, y0: np.ndarray,
              direction: str = "forward", t_end: int | None = None
              ) -> Trajectory | ConjoinedBasis:
    """Propagate initial data y0 at t0 across the window.

    y0 may be a 2n vector (returns a Trajectory) or a 2n x k matrix (returns
    a ConjoinedBasis).  Backward propagation uses the explicit symplectic
    inverse for real lam and checks per-step invertibility otherwise.
    """
    sys.window.require(t0)
    y0 = np.asarray(y0, dtype=complex)
    vector = y0.ndim == 1
    cols = y0[:, None] if vector else y0
    if cols.shape[0] != 2 * sys.n:
        raise ValueError(f"initial data must have 2n={2 * sys.n} rows")
    if direction == "forward":
        hi = sys.window.end if t_end is None else t_end
        if hi < t0:
            raise DomainError("t_end before t0 on a forward sweep")
        sys.window.require(hi)
        window = LatticeWindow(t0, hi) if hi > t0 else None
        if window is None:
            raise DomainError("empty propagation range")
        out = np.empty((window.length, 2 * sys.n, cols.shape[1]), dtype=complex)
        out[0] = cols
        ms = transfer_all(sys, lam, t0, hi - 1) if hi > t0 else None
        for i in range(hi - t0):
            out[i + 1] = ms[i] @ out[i]
    elif direction == "backward":
        lo = sys.window.start if t_end is None else t_end
        if lo > t0:
            raise DomainError("t_end after t0 on a backward sweep")
        window = LatticeWindow(lo, t0)
        out = np.empty((window.length, 2 * sys.n, cols.shape[1]), dtype=complex)
        out[-1] = cols
        ms = transfer_all(sys, lam, lo, t0 - 1)
        for i in range(t0 - lo):
            out[t0 - lo - 1 - i] = _backward_step_matrix(ms[t0 - lo - 1 - i], lam) \
                @ out[t0 - lo - i]
    else:
        raise ValueError(f"unknown direction {direction!r}")
    if vector:
        return Trajectory(window, out[:, :, 0])
    return ConjoinedBasis(window, out)


def fundamental_matrix(sys: HamiltonianSystem, lam: complex, t0: int,
                       t_end: int) -> ConjoinedBasis:
    """Fundamental solution family with Phi(t0) = I_{2n}."""
    return solve_ivp(sys, lam, t0, np.eye(2 * sys.n), "forward", t_end)


def solve_two_point_bvp(sys: HamiltonianSystem, lam: complex, t1: int, s: int,
                        out_start: int | None = None) -> ConjoinedBasis:
    """2n x n solution with U(t1) = I_n and U(s) = 0, by shooting.

    The fundamental matrix is propagated from t1 and the unknown V(t1) solves
    Phi_uv(s) V(t1) = -Phi_uu(s); a singular shooting block signals failure
    of the unique two point property at (t1, s).
    """
    if not t1 < s:
        raise DomainError(f"need t1 < s, got t1={t1}, s={s}")
    n = sys.n
    phi = fundamental_matrix(sys, lam, t1, s)
    phi_s = phi.at(s)
    k_uu = phi_s[:n, :n]
    k_uv = phi_s[:n, n:]
    smin = float(np.linalg.svd(k_uv, compute_uv=False)[-1])
    if smin <= SIGMA_MIN_FACTOR * max(1.0, spectral_norm(k_uv)):
        raise ShootingSingularError(
            f"shooting matrix Phi_uv({s}) singular (sigma_min {smin:.3e}); "
            f"unique two point property fails at ({t1}, {s})")
    v1 = np.linalg.solve(k_uv, -k_uu)
    init = np.vstack([np.eye(n), v1])
    basis = ConjoinedBasis(phi.window, phi.values @ init)
    if out_start is not None and out_start < t1:
        back = solve_ivp(sys, lam, t1, basis.at(t1), "backward", out_start)
        vals = np.concatenate([back.values[:-1], basis.values], axis=0)
        return ConjoinedBasis(LatticeWindow(out_start, s), vals)
    return basis


def unique_two_point_property(sys: HamiltonianSystem, lam0: float,
                              window: LatticeWindow,
                              tol: float = SIGMA_MIN_FACTOR) -> bool:
    """True iff the shooting block is invertible for every t1 < t2 in the window."""
    n = sys.n
    for t1 in range(window.start, window.end):
        phi = np.eye(2 * n, dtype=complex)
        ms = transfer_all(sys, lam0, t1, window.end - 1)
        for i, t2 in enumerate(range(t1 + 1, window.end + 1)):
            phi = ms[i] @ phi
            k_uv = phi[:n, n:]
            smin = float(np.linalg.svd(k_uv, compute_uv=False)[-1])
            if smin <= tol * max(1.0, spectral_norm(k_uv)):
                return False
    return True


class BackwardSweep:
    """Segment-renormalized backward propagation of a 2n x k terminal block.

    Raw backward iteration aligns all columns with the fastest backward
    growth; periodic QR renormalization keeps the stored frames orthonormal
    while triangular stitch factors retain the true solution family exactly.
    Any anchored family X(t) R (R constant) is recovered segment by segment
    without ever forming an ill-conditioned long product.
    """

    def __init__(self, sys: HamiltonianSystem, lam: complex, s: int,
                 terminal: np.ndarray, t_lo: int = 0, seg_guard: float = 1e40):
        sys.window.require(s)
        sys.window.require(t_lo)
        if t_lo >= s:
            raise DomainError("backward sweep needs t_lo < s")
        self.sys = sys
        self.lam = lam
        self.s = s
        self.t_lo = t_lo
        terminal = np.asarray(terminal, dtype=complex)
        self.k = terminal.shape[1]
        length = s - t_lo + 1
        self.frames = np.empty((length, 2 * sys.n, self.k), dtype=complex)
        self.seg_of = np.zeros(length, dtype=int)
        self.stitches: list[np.ndarray] = []  # R factor dropped entering segment j+1
        ms = transfer_all(sys, lam, t_lo, s - 1)
        z = terminal.copy()
        self.frames[-1] = z
        seg = 0
        base = max(1.0, float(np.linalg.norm(z)))
        for t in range(s - 1, t_lo - 1, -1):
            z = _backward_step_matrix(ms[t - t_lo], lam) @ z
            if float(np.linalg.norm(z)) > seg_guard * base:
                q, r = np.linalg.qr(z)
                ph = np.diag(r).copy()
                ph = np.where(np.abs(ph) > 0, ph / np.abs(ph), 1.0)
                z = q * ph
                self.stitches.append(np.conj(ph)[:, None] * r)
                seg += 1
                base = 1.0
            i = t - t_lo
            self.frames[i] = z
            self.seg_of[i] = seg

    def _segment_transforms(self, anchor_seg: int, g_anchor: np.ndarray) -> list[np.ndarray]:
        """Per-segment right factors for the family frames(t) @ G[seg(t)]."""
        n_seg = len(self.stitches) + 1
        g = [None] * n_seg
        g[anchor_seg] = g_anchor
        # toward the terminal end (smaller segment index): undo the stitch
        for j in range(anchor_seg, 0, -1):
            g[j - 1] = np.linalg.solve(self.stitches[j - 1], g[j])
        # toward t_lo (larger segment index): reapply the stitch
        for j in range(anchor_seg, n_seg - 1):
            with np.errstate(over="ignore", invalid="ignore"):
                g[j + 1] = self.stitches[j] @ g[j]
        return g

    def anchored(self, anchor_t: int, anchor: str = "u_identity",
                 out: LatticeWindow | None = None) -> ConjoinedBasis:
        """Solution family normalized at anchor_t.

        anchor="u_identity": right-multiplied so the u block at anchor_t is
        I (k must equal n).  anchor="orthonormal": columns orthonormal at
        anchor_t (QR), preserving the decay-ordered filtration.
        """
        if out is None:
            out = LatticeWindow(self.t_lo, self.s)
        if out.start < self.t_lo or out.end > self.s:
            raise DomainError("output window outside the sweep range")
        i_anchor = anchor_t - self.t_lo
        frame = self.frames[i_anchor]
        if anchor == "u_identity":
            n = self.sys.n
            if self.k != n:
                raise ValueError("u_identity anchor needs k = n columns")
            ua = frame[:n, :]
            smin = float(np.linalg.svd(ua, compute_uv=False)[-1])
            if smin <= SIGMA_MIN_FACTOR:
                raise ShootingSingularError(
                    f"u block singular at anchor t={anchor_t} (sigma_min {smin:.3e})")
            g_anchor = np.linalg.inv(ua)
        elif anchor == "orthonormal":
            _, r = np.linalg.qr(frame)
            g_anchor = np.linalg.inv(r)
        else:
            raise ValueError(f"unknown anchor {anchor!r}")
        g = self._segment_transforms(int(self.seg_of[i_anchor]), g_anchor)
        vals = np.empty((out.length, 2 * self.sys.n, self.k), dtype=complex)
        for t in range(out.start, out.end + 1):
            i = t - self.t_lo
            with np.errstate(over="ignore", invalid="ignore"):
                block = self.frames[i] @ g[int(self.seg_of[i])]
            block[~np.isfinite(block)] = 0.0  # graceful underflow of dead channels
            vals[t - out.start] = block
        return ConjoinedBasis(out, vals)


def backward_bvp(sys: HamiltonianSystem, lam: complex, t1: int, s: int,
                 out: LatticeWindow | None = None) -> ConjoinedBasis:
    """Two-point solution U(t1) = I, U(s) = 0 via the renormalized backward sweep.

    Same object as :func:`solve_two_point_bvp`, but stable for ranges whose
    dominant growth would overflow the forward shooting sweep.
    """
    n = sys.n
    terminal = np.vstack([np.zeros((n, n)), np.eye(n)])
    t_lo = out.start if out is not None else sys.window.start
    t_lo = min(t_lo, t1)
    sweep = BackwardSweep(sys, lam, s, terminal, t_lo=t_lo)
    if out is None:
        out = LatticeWindow(t_lo, s)
    return sweep.anchored(t1, "u_identity", out)
