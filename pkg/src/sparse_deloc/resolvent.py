"""Dense resolvent computations for ``M = H + f e e*``.

Everything here works on a dense ``G = (M - z)^{-1}`` obtained from one LU
factorization per spectral point.  Minor resolvents are derived from ``G``
through the Schur-complement identity, with direct inversion of the minor as
a fallback when ``G_xx`` is numerically zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import scipy.linalg as sla

from .matrix_model import SparseHermitianModel
from .stieltjes import as_z, eval_m, eval_m_alpha

GXX_FLOOR = 1e-12
RANK_ONE_FLOOR = 1e-10


class ResolventError(RuntimeError):
    """Raised when ``M - z`` cannot be inverted to working precision."""


class EmptyTypicalSet(ValueError):
    """No vertex passed the typicality test, so ``s(z)`` is undefined."""


@dataclass
class ResolventState:
    z: complex
    G: np.ndarray
    lam: Optional[float] = None
    typical: Optional[np.ndarray] = None  # boolean mask
    s: Optional[complex] = None
    residuals: Optional[np.ndarray] = None

    @property
    def N(self) -> int:
        return self.G.shape[0]

    def summary_row(self) -> dict:
        res = np.abs(self.residuals[self.typical]) if self.residuals is not None and self.typical is not None and self.typical.any() else np.array([np.nan])
        return {
            "z_re": self.z.real,
            "z_im": self.z.imag,
            "lambda": self.lam,
            "n_typical": int(self.typical.sum()) if self.typical is not None else -1,
            "s_re": self.s.real if self.s is not None else float("nan"),
            "s_im": self.s.imag if self.s is not None else float("nan"),
            "res_p50": float(np.percentile(res, 50)),
            "res_p90": float(np.percentile(res, 90)),
            "res_max": float(res.max()),
        }


def _matrix_of(model) -> np.ndarray:
    return model.dense_M() if isinstance(model, SparseHermitianModel) else np.asarray(model)


def resolvent_matrix(M: np.ndarray, z: complex) -> np.ndarray:
    """``(M - z)^{-1}`` by dense LU."""
    z = as_z(z)
    N = M.shape[0]
    B = np.array(M, dtype=np.complex128)
    B[np.diag_indices(N)] -= z
    try:
        G = sla.inv(B, overwrite_a=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ResolventError(f"M - z is singular at z = {z}") from exc
    if not np.all(np.isfinite(G)):
        raise ResolventError(f"non-finite resolvent at z = {z}")
    return G


def resolvent_dense(model, z) -> ResolventState:
    """Resolvent of a model (``M = H + f e e*``) or of a bare matrix."""
    z = as_z(z)
    M = _matrix_of(model)
    if isinstance(model, SparseHermitianModel) and model.N > model.cfg.dense_threshold:
        raise ValueError("N exceeds the dense threshold")
    return ResolventState(z=z, G=resolvent_matrix(M, z))


def rank_one_update(G_H: np.ndarray, f: float, H: np.ndarray | None = None, z=None) -> np.ndarray:
    """Resolvent of ``H + f e e*`` from the resolvent of ``H`` (Sherman-Morrison).

    When ``|1 + f e* G_H e| < 1e-10`` (``z`` sits on the outlier) the update is
    refused; with ``H`` and ``z`` supplied we invert directly instead.
    """
    if f == 0:
        return G_H
    N = G_H.shape[0]
    e = np.full(N, 1 / math.sqrt(N))
    col = G_H @ e
    row = e @ G_H
    denom = 1 + f * (e @ col)
    if abs(denom) < RANK_ONE_FLOOR:
        if H is None or z is None:
            raise ResolventError("rank-one update denominator vanishes; pass H and z")
        return resolvent_matrix(np.asarray(H) + f / N, z)
    return G_H - (f / denom) * np.outer(col, row)


def minor_diagonal_direct(M: np.ndarray, z, x: int) -> np.ndarray:
    keep = np.arange(M.shape[0]) != x
    return np.diagonal(resolvent_matrix(M[np.ix_(keep, keep)], z)).copy()


def minor_diagonal(G: np.ndarray, x: int, M: np.ndarray | None = None, z=None) -> np.ndarray:
    """Diagonal of ``G^{(x)}``, the resolvent with row/column ``x`` removed,
    ordered as the remaining vertices.  Uses
    ``G^{(x)}_yy = G_yy - G_yx G_xy / G_xx``."""
    gxx = G[x, x]
    keep = np.arange(G.shape[0]) != x
    if abs(gxx) <= GXX_FLOOR:
        if M is None or z is None:
            raise ResolventError(f"|G_xx| too small at x={x}; pass M and z")
        return minor_diagonal_direct(M, z, x)
    return np.diagonal(G)[keep] - G[keep, x] * G[x, keep] / gxx


def typicality_sums(H: np.ndarray, G: np.ndarray, M: np.ndarray | None = None, z=None):
    """Per-vertex ``sum_{y != x} (|H_xy|^2 - 1/N)`` and the same weights
    summed against ``G^{(x)}_yy``.  Returns ``(plain, weighted)``."""
    N = H.shape[0]
    W = np.abs(H) ** 2 - 1.0 / N
    np.fill_diagonal(W, 0.0)
    plain = W.sum(axis=1)
    gd = np.diagonal(G)
    weighted = np.empty(N, dtype=np.complex128)
    ok = np.abs(gd) > GXX_FLOOR
    cross = np.einsum("xy,xy,yx->x", W, G, G)
    weighted[ok] = (W @ gd)[ok] - cross[ok] / gd[ok]
    for x in np.flatnonzero(~ok):
        if M is None or z is None:
            raise ResolventError(f"|G_xx| too small at x={x}; pass M and z")
        keep = np.arange(N) != x
        weighted[x] = W[x, keep] @ minor_diagonal_direct(M, z, x)
    return plain, weighted


def typicality_threshold(N: int) -> float:
    return math.log(N) ** (-1 / 3)


def classify_typical(model, state: ResolventState, threshold: float | None = None) -> np.ndarray:
    """Boolean mask of typical vertices at ``state.z``.

    ``model`` is a :class:`SparseHermitianModel` (uses its ``H``) or a bare
    ``H`` array.
    """
    M = None
    if isinstance(model, SparseHermitianModel):
        H = model.H
        if H is None:
            raise ValueError("typicality needs a dense H")
        if np.any(np.abs(np.diagonal(state.G)) <= GXX_FLOOR):
            M = model.dense_M()
    else:
        H = np.asarray(model)
    N = H.shape[0]
    thr = typicality_threshold(N) if threshold is None else threshold
    plain, weighted = typicality_sums(H, state.G, M, state.z)
    mask = (np.abs(plain) <= thr) & (np.abs(weighted) <= thr)
    state.typical = mask
    return mask


def lambda_value(G: np.ndarray, beta: np.ndarray, z) -> float:
    """``max_{x,y} |G_xy - delta_xy m_{beta_x}(z)|``."""
    ref = eval_m_alpha(np.asarray(beta), as_z(z))
    diag = float(np.max(np.abs(np.diagonal(G) - ref)))
    A = np.abs(G)
    np.fill_diagonal(A, 0.0)
    return max(diag, float(A.max()) if A.size else 0.0)


def lambda_and_s(G: np.ndarray, beta: np.ndarray, z, typical: np.ndarray | None):
    """``(Lambda, s)``; ``s`` is ``None`` when the typical set is empty."""
    lam = lambda_value(G, beta, z)
    if typical is None or not np.any(typical):
        return lam, None
    return lam, complex(np.mean(np.diagonal(G)[typical]))


def sce_residual(G_or_state, z=None, s=None, x=None):
    """``1 + z G_xx + s G_xx`` for vertex ``x`` (all vertices if ``x`` is None)."""
    if isinstance(G_or_state, ResolventState):
        st = G_or_state
        G, z, s = st.G, st.z, st.s
    else:
        G = G_or_state
    if s is None:
        raise EmptyTypicalSet("s(z) is undefined on an empty typical set")
    gd = np.diagonal(G) if np.ndim(G) == 2 else np.asarray(G)
    out = 1 + z * gd + s * gd
    return complex(out[x]) if x is not None else out


def compute_state(model: SparseHermitianModel, z, typical: bool = True) -> ResolventState:
    """Resolvent plus Lambda and, optionally, T, s and the per-vertex residuals."""
    st = resolvent_dense(model, z)
    if typical:
        classify_typical(model, st)
    st.lam, st.s = lambda_and_s(st.G, model.beta, st.z, st.typical)
    if st.s is not None:
        st.residuals = sce_residual(st)
    return st


def trace_error(G: np.ndarray, z) -> float:
    """``|N^{-1} Tr G - m(z)|``."""
    return float(abs(np.trace(G) / G.shape[0] - eval_m(as_z(z))))


def outlier_location(f: float) -> float:
    """Approximate position ``f + 1/f`` of the eigenvalue pushed out by ``f e e*``."""
    return f + 1 / f if f > 0 else float("nan")


def in_outlier_window(re: float, f: float, width: float) -> bool:
    loc = outlier_location(f)
    return bool(f > 0 and abs(re - loc) <= width)


STATE_COLUMNS = ["z_re", "z_im", "lambda", "n_typical", "s_re", "s_im", "res_p50", "res_p90", "res_max"]


def write_state_csv(path, states: Iterable[ResolventState]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATE_COLUMNS)
        for st in states:
            row = st.summary_row()
            w.writerow([_fmt(row[c]) for c in STATE_COLUMNS])


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")
