"""Eigenvector delocalization measurements.

``q(u) = ||u||_inf^2 / ||u||_2^2`` ranges from ``1/N`` (flat) to ``1``
(a single site).  :func:`eigen_full` diagonalizes a sampled matrix,
:func:`delocalization_verdict` compares the worst ``q`` in a spectral region
against ``N^(-1 + kappa_test)``, and :func:`phase_sweep` repeats this over a
grid of sparseness values ``b = d / log N`` and energy windows.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.sparse.csgraph import connected_components

from .matrix_model import ModelConfig, SparseHermitianModel, derive_seed, sample_er_adjacency

DELTA_OUT = 0.3
KAPPA_TEST = 0.3


class EigenSolverError(RuntimeError):
    pass


def q_measure(u) -> float:
    """``max_x |u_x|^2 / sum_x |u_x|^2``."""
    u = np.asarray(u)
    w = np.abs(u) ** 2
    total = w.sum()
    if not total > 0:
        raise ValueError("q is undefined for the zero vector")
    return float(w.max() / total)


def q_columns(U: np.ndarray) -> np.ndarray:
    w = np.abs(U) ** 2
    return w.max(axis=0) / w.sum(axis=0)


@dataclass
class EigenReport:
    """Spectrum and per-eigenvector ``q`` of one sample.

    ``eigenvalues`` are in the units requested (``unit = sqrt(d)`` for raw
    adjacency spectra, ``1`` for rescaled); windows are always specified in
    rescaled units, i.e. as multiples of ``unit``.
    """

    eigenvalues: np.ndarray
    q_values: np.ndarray
    peak_site: np.ndarray
    unit: float
    outlier_index: Optional[int]
    N: int
    kappa_window: float = KAPPA_TEST
    vectors: Optional[np.ndarray] = None

    def scaled(self) -> np.ndarray:
        return self.eigenvalues / self.unit

    def mask(self, lo: float = 0.0, hi: float = math.inf) -> np.ndarray:
        """Non-outlier eigenpairs with ``lo <= |lambda|/unit < hi``
        (``hi = inf`` closes nothing; ``lo`` is inclusive)."""
        a = np.abs(self.scaled())
        m = (a >= lo) & (a < hi)
        if self.outlier_index is not None:
            m[self.outlier_index] = False
        return m

    def max_q(self, lo: float = 0.0, hi: float = math.inf) -> float:
        m = self.mask(lo, hi)
        return float(self.q_values[m].max()) if m.any() else float("nan")

    @property
    def max_q_bulk(self) -> float:
        return self.max_q(0.0, 2 - self.kappa_window + 1e-12)

    @property
    def max_q_edge(self) -> float:
        return self.max_q(2 - self.kappa_window + 1e-12, math.inf)

    @property
    def max_q_center(self) -> float:
        return self.max_q(0.0, self.kappa_window)

    def zero_site_pairs(self, tol: float = 1e-10) -> list[tuple[int, int]]:
        """Eigenpairs ``(index, site)`` that equal ``(0, e_site)`` up to ``tol``."""
        hit = (np.abs(self.eigenvalues) <= tol) & (self.q_values >= 1 - tol)
        return [(int(i), int(self.peak_site[i])) for i in np.flatnonzero(hit)]


def _eigh(M: np.ndarray):
    try:
        return sla.eigh(M, driver="evd", check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc


def eigen_full(
    model: SparseHermitianModel,
    rescale: str = "by_sqrt_d",
    delta_out: float = DELTA_OUT,
    kappa_window: float = KAPPA_TEST,
    keep_vectors: bool = False,
) -> EigenReport:
    """Full eigendecomposition of ``A`` (``raw``) or ``A/sqrt(d)`` (``by_sqrt_d``).

    Adjacency matrices are block diagonal over connected components, so each
    component is diagonalized on its own.  An isolated vertex ``x`` therefore
    contributes exactly the eigenpair ``(0, e_x)`` instead of an arbitrary
    rotation inside a degenerate null space.  Generic models (dense ``M``)
    are diagonalized in one piece; ``rescale`` is ignored for them.
    """
    if rescale not in ("raw", "by_sqrt_d"):
        raise ValueError("rescale must be 'raw' or 'by_sqrt_d'")
    N = model.N
    if N > model.cfg.dense_threshold:
        raise ValueError("N exceeds the dense threshold")
    sqd = math.sqrt(model.d) if model.d > 0 else 1.0

    if model.kind == "er" and model.adjacency is not None:
        factor = 1.0 if rescale == "raw" else 1 / sqd
        unit = sqd if rescale == "raw" else 1.0
        A = model.adjacency
        ncomp, labels = connected_components(A, directed=False)
        vals = np.empty(N)
        qs = np.empty(N)
        peak = np.empty(N, dtype=np.int64)
        vecs = np.zeros((N, N)) if keep_vectors else None
        pos = 0
        order = np.argsort(labels, kind="stable")
        bounds = np.flatnonzero(np.diff(labels[order])) + 1
        for nodes in np.split(order, bounds):
            k = nodes.size
            if k == 1:
                w = np.zeros(1)
                U = np.ones((1, 1))
            else:
                sub = A[nodes][:, nodes].toarray().astype(np.float64) * factor
                w, U = _eigh(sub)
            vals[pos:pos + k] = w
            qs[pos:pos + k] = q_columns(U)
            peak[pos:pos + k] = nodes[np.argmax(np.abs(U), axis=0)]
            if keep_vectors:
                vecs[np.ix_(nodes, np.arange(pos, pos + k))] = U
            pos += k
        srt = np.argsort(vals, kind="stable")
        vals, qs, peak = vals[srt], qs[srt], peak[srt]
        if keep_vectors:
            vecs = vecs[:, srt]
    else:
        unit = 1.0
        M = model.dense_M()
        vals, U = _eigh(M)
        qs = q_columns(U)
        peak = np.argmax(np.abs(U), axis=0)
        vecs = U if keep_vectors else None

    outlier = None
    if N > 0 and vals[-1] / unit > 2 + delta_out:
        outlier = N - 1
    return EigenReport(
        eigenvalues=vals,
        q_values=qs,
        peak_site=peak,
        unit=unit,
        outlier_index=outlier,
        N=N,
        kappa_window=kappa_window,
        vectors=vecs,
    )


@dataclass(frozen=True)
class DelocVerdict:
    regime: str
    max_q: float
    bound: float
    passed: bool
    n_considered: int
    kappa_test: float
    kappa_window: float


def deloc_bound(N: int, kappa_test: float) -> float:
    return N ** (-1 + kappa_test)


def delocalization_verdict(
    report: EigenReport,
    regime: str = "everywhere",
    kappa_test: float = KAPPA_TEST,
    kappa_window: Optional[float] = None,
) -> DelocVerdict:
    """``everywhere``: all non-outlier eigenvectors; ``bulk``: those with
    ``|lambda| <= (2 - kappa_window) sqrt(d)`` (``kappa_window`` defaults to
    ``kappa_test``).  Passes iff the largest ``q`` is at most ``N^(-1+kappa_test)``."""
    kw = kappa_test if kappa_window is None else kappa_window
    if regime == "everywhere":
        m = report.mask()
    elif regime == "bulk":
        m = report.mask(0.0, 2 - kw + 1e-12)
    else:
        raise ValueError("regime must be 'everywhere' or 'bulk'")
    mq = float(report.q_values[m].max()) if m.any() else 0.0
    bound = deloc_bound(report.N, kappa_test)
    return DelocVerdict(regime, mq, bound, mq <= bound, int(m.sum()), kappa_test, kw)


# ---------------------------------------------------------------- phase sweep


@dataclass
class PhaseCell:
    b: float
    window_lo: float
    window_hi: float
    N: int
    trials: int
    q_p50: float
    q_p90: float
    q_max: float
    verdict_fraction: float
    n_empty: int = 0
    max_q_samples: list = field(default_factory=list, repr=False)


PHASE_COLUMNS = ["b", "window_lo", "window_hi", "N", "trials", "q_p50", "q_p90", "q_max", "verdict_fraction"]


def default_windows(kappa_w: float = KAPPA_TEST) -> list[tuple[float, float]]:
    """Center ``|E| < kappa``, bulk ``kappa <= |E| < 2-kappa``, edge ``|E| >= 2-kappa``."""
    return [(0.0, kappa_w), (kappa_w, 2 - kappa_w), (2 - kappa_w, math.inf)]


def trial_seed(seed: int, b: float, trial: int) -> int:
    return derive_seed(seed, 0xB5, int(round(b * 1_000_000)), trial)


def _trial_maxq(N: int, b: float, seed: int, windows, delta_out: float) -> list[float]:
    model = sample_er_adjacency(ModelConfig.from_b(N, b, seed=seed))
    rep = eigen_full(model, "by_sqrt_d", delta_out=delta_out)
    return [rep.max_q(lo, hi) for lo, hi in windows]


def phase_sweep(
    b_grid: Sequence[float],
    energy_windows: Sequence[tuple[float, float]],
    N: int,
    trials: int,
    kappa_test: float = KAPPA_TEST,
    seed: int = 0,
    delta_out: float = DELTA_OUT,
    workers: int = 1,
) -> list[PhaseCell]:
    """One :class:`PhaseCell` per ``(b, window)``.

    Windows are ``(lo, hi)`` bounds on ``|lambda| / sqrt(d)``.  A trial in
    which a window holds no eigenvalue counts as a (vacuous) pass and is
    tallied in ``n_empty``; quantiles use the non-empty trials only.
    """
    if not len(b_grid) or not len(energy_windows) or trials < 1:
        raise ValueError("need at least one b, one window and one trial")
    windows = [(float(lo), float(hi)) for lo, hi in energy_windows]
    tasks = [(b, t) for b in b_grid for t in range(trials)]

    def run(task):
        b, t = task
        return _trial_maxq(N, b, trial_seed(seed, b, t), windows, delta_out)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    bound = deloc_bound(N, kappa_test)
    cells = []
    for bi, b in enumerate(b_grid):
        block = np.array(results[bi * trials:(bi + 1) * trials])
        for wi, (lo, hi) in enumerate(windows):
            col = block[:, wi]
            live = col[~np.isnan(col)]
            n_empty = int(np.isnan(col).sum())
            passes = int((live <= bound).sum()) + n_empty
            if live.size:
                p50, p90, qmax = (float(np.percentile(live, 50)), float(np.percentile(live, 90)), float(live.max()))
            else:
                p50 = p90 = qmax = float("nan")
            cells.append(
                PhaseCell(b=float(b), window_lo=lo, window_hi=hi, N=N, trials=trials, q_p50=p50, q_p90=p90,
                          q_max=qmax, verdict_fraction=passes / trials, n_empty=n_empty,
                          max_q_samples=[float(v) for v in col])
            )
    return cells


def write_phase_csv(path, cells: Sequence[PhaseCell]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PHASE_COLUMNS)
        for c in cells:
            w.writerow([_fmt(getattr(c, k)) for k in PHASE_COLUMNS])


def write_phase_dat(path, cells: Sequence[PhaseCell]) -> None:
    """gnuplot-style blocks: one block per ``b``, blank line between blocks."""
    lines = ["# b window_lo window_hi verdict_fraction q_p90"]
    last = None
    for c in cells:
        if last is not None and c.b != last:
            lines.append("")
        lines.append(f"{_fmt(c.b)} {_fmt(c.window_lo)} {_fmt(c.window_hi)} {_fmt(c.verdict_fraction)} {_fmt(c.q_p90)}")
        last = c.b
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")
