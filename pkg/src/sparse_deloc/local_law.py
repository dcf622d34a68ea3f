"""Bootstrap continuation of the entrywise local law in the imaginary part of
the spectral parameter.

A run starts at ``Im z = 1`` and walks down a grid to a target ``Im z``,
recording ``Lambda(z_k)`` and the indicators ``phi_t = 1(Lambda <= (log N)^(-1/t))``
for ``t = 7, 8``.  Up to the split index ``K*`` (the last point where the
root separation ``|m - m_tilde|`` exceeds ``2 (log N)^(-1/7)``) the run must
keep ``phi_7 = 1``; after it, ``phi_8 = 1``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .matrix_model import SparseHermitianModel, psi_indicators
from .resolvent import (
    classify_typical,
    in_outlier_window,
    lambda_value,
    resolvent_dense,
    resolvent_matrix,
    trace_error,
)
from .stieltjes import eval_m, eval_m_alpha, gap

ARITHMETIC_MAX_N = 100


def phi_threshold(N: int, t: float) -> float:
    return math.log(N) ** (-1.0 / t)


def gap_threshold(N: int) -> float:
    return 2 * phi_threshold(N, 7)


@dataclass(frozen=True)
class SpectralDomain:
    """``lower``: ``|Re z| <= 2 - kappa``; ``upper``: ``|Re z| >= kappa`` (capped
    at ``re_cap`` for sweeps).  Both take ``Im z`` in ``[N^(-1+kappa), 1]``."""

    tag: str
    kappa: float
    N: int
    re_cap: float = 4.0

    def __post_init__(self) -> None:
        if self.tag not in ("lower", "upper"):
            raise ValueError("domain tag must be 'lower' or 'upper'")

    @property
    def im_min(self) -> float:
        return self.N ** (-1 + self.kappa)

    def contains(self, re: float, im: float) -> bool:
        if not self.im_min * (1 - 1e-12) <= im <= 1:
            return False
        if self.tag == "lower":
            return abs(re) <= 2 - self.kappa
        return self.kappa <= abs(re) <= self.re_cap

    def re_grid(self, n: int) -> np.ndarray:
        k = self.kappa
        if self.tag == "lower":
            return np.linspace(-2 + k, 2 - k, n)
        half = np.linspace(k, self.re_cap, max(n // 2, 1))
        return np.concatenate([-half[::-1], half])

    def im_grid(self, n: int) -> np.ndarray:
        return np.geomspace(1.0, self.im_min, n)

    def psi(self, model: SparseHermitianModel) -> bool:
        ind = psi_indicators(model, self.kappa)
        return ind.psi_l if self.tag == "lower" else ind.psi_u


# ---------------------------------------------------------------- grids


def build_grid(
    re: float,
    target_im: float,
    N: int,
    kappa: float,
    n_points: int = 200,
    mode: str = "geometric",
    min_ratio: Optional[float] = None,
) -> np.ndarray:
    """Decreasing ``Im z`` grid from 1 to ``target_im``.

    ``geometric`` uses ``n_points`` log-spaced values (more if needed so each
    step ratio is at least ``min_ratio``).  ``arithmetic`` is the literal
    arithmetic grid ``max(1 - k N^-3, target_im)``; only for ``N <= 100``.
    """
    floor = N ** (-1 + kappa)
    if target_im < floor * (1 - 1e-12) or target_im > 1:
        raise ValueError(f"target Im z = {target_im:g} outside [N^(-1+kappa), 1] = [{floor:g}, 1]")
    if target_im == 1.0:
        return np.array([1.0])
    if mode == "arithmetic":
        if N > ARITHMETIC_MAX_N:
            raise ValueError(f"arithmetic grid has ~N^3 points; N <= {ARITHMETIC_MAX_N} only")
        step = float(N) ** -3
        K = math.ceil((1 - target_im) / step - 1e-9)
        g = 1 - step * np.arange(K + 1)
        g[-1] = target_im
        return np.maximum(g, target_im)
    if mode != "geometric":
        raise ValueError(f"unknown grid mode {mode!r}")
    n = max(int(n_points), 2)
    if min_ratio is not None:
        if not 0 < min_ratio < 1:
            raise ValueError("min_ratio must lie in (0, 1)")
        n = max(n, math.ceil(math.log(target_im) / math.log(min_ratio)) + 1)
    g = np.geomspace(1.0, target_im, n)
    g[0], g[-1] = 1.0, target_im
    return g


def k_star_split(re: float, grid: Sequence[float], N: int) -> int:
    """Last index ``k`` with ``gap(z_j) > 2 (log N)^(-1/7)`` for every ``j <= k``
    (``-1`` if the first point already fails)."""
    grid = np.asarray(grid, dtype=np.float64)
    gaps = gap(re + 1j * grid)
    above = np.atleast_1d(gaps > gap_threshold(N))
    if np.all(np.diff(np.atleast_1d(gaps)) <= 1e-12):
        # monotone along the grid: above-threshold points form a prefix
        return int(np.count_nonzero(above)) - 1
    bad = np.flatnonzero(~above)
    return int(bad[0]) - 1 if bad.size else len(grid) - 1


# ---------------------------------------------------------------- traces


@dataclass
class ContinuationTrace:
    re: float
    N: int
    domain: str
    mode: str
    grid: np.ndarray
    k_star: int
    lambda_path: np.ndarray
    phi7_path: np.ndarray
    phi8_path: np.ndarray
    conditioned: bool
    verdict: str = "pass"
    fail_index: Optional[int] = None
    max_step: Optional[float] = None
    step_bound: Optional[float] = None
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def step_ok(self) -> Optional[bool]:
        if self.max_step is None:
            return None
        return self.max_step <= self.step_bound

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "domain": self.domain,
            "re": self.re,
            "N": self.N,
            "mode": self.mode,
            "grid": [float(v) for v in self.grid],
            "lambda_path": [float(v) for v in self.lambda_path],
            "phi7": [bool(v) for v in self.phi7_path],
            "phi8": [bool(v) for v in self.phi8_path],
            "k_star": self.k_star,
            "conditioned": self.conditioned,
            "verdict": self.verdict if self.fail_index is None else f"fail-at-{self.fail_index}",
            "max_step": self.max_step,
            "step_bound": self.step_bound,
        }


def _lambda_batch(M: np.ndarray, beta: np.ndarray, zs: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Lambda at many z for a small matrix via batched inversion."""
    N = M.shape[0]
    out = np.empty(zs.size)
    eye = np.eye(N)
    off = ~np.eye(N, dtype=bool)
    for lo in range(0, zs.size, chunk):
        zc = zs[lo:lo + chunk]
        B = M[None, :, :] - zc[:, None, None] * eye
        G = np.linalg.inv(B)
        ref = eval_m_alpha(beta[None, :], zc[:, None])
        dg = np.abs(np.diagonal(G, axis1=1, axis2=2) - ref).max(axis=1)
        og = np.abs(G[:, off]).max(axis=1) if N > 1 else np.zeros(zc.size)
        out[lo:lo + chunk] = np.maximum(dg, og)
    return out


def bootstrap_run(
    model: SparseHermitianModel,
    re: float,
    target_im: float,
    domain_tag: str = "lower",
    kappa: Optional[float] = None,
    n_points: int = 200,
    mode: str = "geometric",
    min_ratio: Optional[float] = None,
    stop_on_fail: bool = False,
) -> ContinuationTrace:
    """Walk ``Im z`` from 1 down to ``target_im`` at fixed ``Re z = re``.

    If the degree indicator of the domain is 0 the trace is still computed
    but marked ``conditioned=False``; its verdict is then informational.
    """
    kappa = model.cfg.kappa if kappa is None else kappa
    N = model.N
    dom = SpectralDomain(domain_tag, kappa, N)
    if domain_tag == "lower" and abs(re) > 2 - kappa or domain_tag == "upper" and abs(re) < kappa:
        raise ValueError(f"Re z = {re} is outside the {domain_tag} domain")
    grid = build_grid(re, target_im, N, kappa, n_points=n_points, mode=mode, min_ratio=min_ratio)
    k_star = k_star_split(re, grid, N)
    conditioned = dom.psi(model)
    M = model.dense_M()
    t7, t8 = phi_threshold(N, 7), phi_threshold(N, 8)

    zs = re + 1j * grid
    if mode == "arithmetic":
        lam = _lambda_batch(M, model.beta, zs)
    else:
        lam = np.full(grid.size, np.nan)
        for k, z in enumerate(zs):
            lam[k] = lambda_value(resolvent_matrix(M, z), model.beta, z)
            required = t7 if k <= k_star else t8
            if stop_on_fail and lam[k] > required:
                break

    phi7 = lam <= t7
    phi8 = lam <= t8
    need = np.where(np.arange(grid.size) <= k_star, phi7, phi8)
    bad = np.flatnonzero(~need)
    trace = ContinuationTrace(
        re=float(re),
        N=N,
        domain=domain_tag,
        mode=mode,
        grid=grid,
        k_star=k_star,
        lambda_path=lam,
        phi7_path=phi7,
        phi8_path=phi8,
        conditioned=bool(conditioned),
        config={
            "N": N,
            "d": model.d,
            "b": model.cfg.b,
            "kappa": kappa,
            "seed": model.cfg.seed,
            "target_im": float(target_im),
            "n_points": int(grid.size),
        },
    )
    if bad.size:
        trace.verdict = "fail"
        trace.fail_index = int(bad[0])
    if mode == "arithmetic" and grid.size > 1:
        trace.max_step = float(np.max(np.abs(np.diff(lam))))
        trace.step_bound = 2.0 / N
    return trace


# ---------------------------------------------------------------- reports


@dataclass
class LocalLawReport:
    domain: str
    N: int
    psi: bool
    threshold: float
    C: float
    rows: list = field(default_factory=list)

    COLUMNS = ("re", "im", "lambda", "trace_err", "entry_pass", "trace_pass", "excluded", "n_typical")

    @property
    def all_pass(self) -> bool:
        live = [r for r in self.rows if not r["excluded"]]
        return all(r["entry_pass"] and r["trace_pass"] for r in live)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(r[c]) for c in self.COLUMNS])

    def to_json(self) -> dict:
        return {
            "domain": self.domain,
            "N": self.N,
            "psi": self.psi,
            "threshold": self.threshold,
            "C": self.C,
            "all_pass": self.all_pass,
            "n_points": len(self.rows),
            "n_excluded": sum(r["excluded"] for r in self.rows),
        }


def local_law_report(
    model: SparseHermitianModel,
    domain: SpectralDomain,
    re_values: Sequence[float],
    im_values: Sequence[float],
    C: float = 1.0,
    outlier_width: float = 0.5,
    typical: bool = False,
) -> LocalLawReport:
    """Entrywise and averaged local-law errors on a 2-D grid of the domain.

    Points with ``|Re z - (f + 1/f)| <= outlier_width`` are skipped and
    flagged ``excluded`` (the eigenvalue pushed out by the rank-one term).
    """
    N = model.N
    thr = C * phi_threshold(N, 7)
    rep = LocalLawReport(domain=domain.tag, N=N, psi=domain.psi(model), threshold=thr, C=C)
    M = model.dense_M()
    for re in re_values:
        for im in im_values:
            re, im = float(re), float(im)
            row = {"re": re, "im": im, "excluded": False, "n_typical": -1}
            if not domain.contains(re, im):
                raise ValueError(f"z = {re}+{im}i is outside the {domain.tag} domain")
            if in_outlier_window(re, model.shift_f, outlier_width):
                row.update(excluded=True, entry_pass=True, trace_pass=True)
                row.update({"lambda": float("nan"), "trace_err": float("nan")})
                rep.rows.append(row)
                continue
            z = complex(re, im)
            st = resolvent_dense(M, z)
            lam = lambda_value(st.G, model.beta, z)
            terr = trace_error(st.G, z)
            if typical and model.H is not None:
                row["n_typical"] = int(classify_typical(model, st).sum())
            row.update({"lambda": lam, "trace_err": terr, "entry_pass": lam <= thr, "trace_pass": terr <= thr})
            rep.rows.append(row)
    return rep


def trace_decomposition_bound(model: SparseHermitianModel, G: np.ndarray, z, typical: np.ndarray) -> dict:
    """Split ``|N^-1 Tr G - m|`` into the entrywise error and the typical /
    atypical reference offsets; ``bound >= trace_err`` always holds."""
    N = model.N
    m = eval_m(z)
    mb = eval_m_alpha(model.beta, z)
    off = np.abs(mb - m)
    lam = lambda_value(G, model.beta, z)
    t_part = float(off[typical].max()) if typical.any() else 0.0
    c_prime = float(off[~typical].max()) if (~typical).any() else 0.0
    n_atyp = int((~typical).sum())
    return {
        "trace_err": trace_error(G, z),
        "lambda": lam,
        "typical_offset": t_part,
        "atypical_offset": c_prime,
        "n_atypical": n_atyp,
        "bound": lam + t_part + n_atyp * c_prime / N,
    }


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def dump_trace(path, trace: ContinuationTrace) -> None:
    with open(path, "w") as fh:
        json.dump(trace.to_json(), fh, indent=2, sort_keys=True)
