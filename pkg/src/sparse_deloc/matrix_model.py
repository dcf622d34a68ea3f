"""Random matrix ensembles: Erdos-Renyi adjacency matrices and generic sparse
Hermitian matrices with independent, centred, bounded entries.

Both produce a :class:`SparseHermitianModel` holding the centred part ``H``,
the rank-one strength ``f`` of ``M = H + f e e*`` (``e`` the normalized
all-ones vector) and the per-vertex row weights ``beta``.  Erdos-Renyi models
additionally keep the adjacency matrix in CSR form and the normalized degrees
``alpha``.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

DENSE_THRESHOLD = 8192

ENTRY_LAWS = ("centered-bernoulli", "symmetric-three-point")


@dataclass(frozen=True)
class ModelConfig:
    N: int
    d: float
    kappa: float = 0.1
    f: float = 0.0
    seed: int = 0
    dense_threshold: int = DENSE_THRESHOLD

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.d < 0:
            raise ValueError("d must be nonnegative")
        if not 0 < self.kappa < 0.5:
            raise ValueError("kappa must lie in (0, 1/2)")
        if self.f < 0:
            raise ValueError("f must be nonnegative")

    @classmethod
    def from_b(cls, N: int, b: float, **kw) -> "ModelConfig":
        """Critical scaling ``d = b log N``."""
        return cls(N=N, d=b * math.log(N) if N > 1 else 0.0, **kw)

    @property
    def b(self) -> float:
        return self.d / math.log(self.N) if self.N > 1 else float("nan")

    def in_local_law_regime(self) -> bool:
        logn = math.log(self.N)
        return self.kappa * logn <= self.d <= logn / self.kappa

    def shift_admissible(self) -> bool:
        return self.f <= self.N ** (self.kappa / 6)


@dataclass(frozen=True)
class PsiIndicators:
    psi_l: bool
    psi_u: bool
    beta_min: float
    beta_max: float


@dataclass
class SparseHermitianModel:
    """One sample of ``M = H + f e e*``.

    ``H`` is materialized densely only when ``N <= cfg.dense_threshold``;
    otherwise it is ``None`` and only the adjacency (ER ensemble) is kept.
    """

    cfg: ModelConfig
    kind: str
    shift_f: float
    beta: np.ndarray
    H: Optional[np.ndarray] = None
    adjacency: Optional[sp.csr_matrix] = None
    alpha: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.cfg.N

    @property
    def d(self) -> float:
        return self.cfg.d

    def dense_M(self) -> np.ndarray:
        """Dense ``M = H + f e e*`` (``A / sqrt(d)`` for the ER ensemble)."""
        if self.kind == "er" and self.adjacency is not None:
            # A/sqrt(d) == H + sqrt(d) e e* exactly; build it without the J shift.
            if self.d == 0:
                return np.zeros((self.N, self.N))
            return self.adjacency.toarray().astype(np.float64) / math.sqrt(self.d)
        if self.H is None:
            raise ValueError("H is not materialized (N above dense threshold)")
        return self.H + self.shift_f / self.N

    def edges(self) -> np.ndarray:
        """Upper-triangular edge list ``(u, v)`` with ``u < v``, sorted."""
        if self.adjacency is None:
            raise ValueError("model has no adjacency structure")
        coo = sp.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return np.stack([coo.row[order], coo.col[order]], axis=1).astype(np.int64)


# ---------------------------------------------------------------- sampling


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator keyed by ``(seed, *stream)``.

    Distinct stream tuples give statistically independent streams, so trial
    ``t`` of an experiment can be regenerated alone from ``(seed, t)``.
    """
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), *map(int, stream)])
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *stream: int) -> int:
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), *map(int, stream)])
    return int(ss.generate_state(1, np.uint64)[0])


def _bernoulli_positions(rng: np.random.Generator, total: int, p: float) -> np.ndarray:
    """Sorted indices in ``range(total)`` kept independently with prob. ``p``.

    Geometric skip sampling: cost is proportional to the number of hits, not
    to ``total``.
    """
    if total <= 0 or p <= 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1:
        return np.arange(total, dtype=np.int64)
    mean = total * p
    chunk = int(mean + 6 * math.sqrt(mean) + 16)
    parts = []
    last = -1
    while True:
        gaps = rng.geometric(p, size=chunk).astype(np.int64)
        pos = last + np.cumsum(gaps)
        if pos[-1] >= total:
            parts.append(pos[pos < total])
            break
        parts.append(pos)
        last = int(pos[-1])
    return np.concatenate(parts)


def _upper_pairs(k: np.ndarray, n: int, diagonal: bool) -> tuple[np.ndarray, np.ndarray]:
    """Map row-major linear indices of the upper triangle to ``(i, j)``.

    Without the diagonal, row ``i`` holds ``j = i+1..n-1``; with it,
    ``j = i..n-1``.
    """
    m = n if diagonal else n - 1
    # row i starts at s(i) = i*m - i*(i-1)/2
    two_m1 = 2 * m + 1
    i = np.floor((two_m1 - np.sqrt(two_m1 * two_m1 - 8.0 * k)) / 2).astype(np.int64)
    start = i * m - i * (i - 1) // 2
    # float rounding can be off by one in either direction
    over = start > k
    while np.any(over):
        i[over] -= 1
        start = i * m - i * (i - 1) // 2
        over = start > k
    nxt = (i + 1) * m - (i + 1) * i // 2
    under = nxt <= k
    while np.any(under):
        i[under] += 1
        start = i * m - i * (i - 1) // 2
        nxt = (i + 1) * m - (i + 1) * i // 2
        under = nxt <= k
    j = k - start + i + (0 if diagonal else 1)
    return i, j


def er_edges(N: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Edges of G(N, p) as an ``(E, 2)`` array with ``u < v`` in row-major order."""
    k = _bernoulli_positions(rng, N * (N - 1) // 2, p)
    i, j = _upper_pairs(k, N, diagonal=False)
    return np.stack([i, j], axis=1)


def er_degrees(N: int, p: float, rng: np.random.Generator) -> np.ndarray:
    e = er_edges(N, p, rng)
    return np.bincount(e.ravel(), minlength=N)


def adjacency_from_edges(N: int, edges: np.ndarray) -> sp.csr_matrix:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    data = np.ones(rows.size, dtype=np.int32)
    A = sp.csr_matrix((data, (rows, cols)), shape=(N, N))
    A.sum_duplicates()
    return A


def _er_beta(alpha: np.ndarray, N: int, d: float) -> np.ndarray:
    # Row x of H = (A - (d/N) J)/sqrt(d): deg_x entries (1-p)/sqrt(d), the
    # remaining N - deg_x entries -p/sqrt(d) (diagonal included).
    if d == 0:
        return np.zeros(N)
    p = d / N
    return alpha * (1 - 2 * p) + p * p * N / d


def model_from_edges(cfg: ModelConfig, edges: np.ndarray) -> SparseHermitianModel:
    N, d = cfg.N, cfg.d
    A = adjacency_from_edges(N, edges)
    deg = np.asarray(A.sum(axis=1)).ravel().astype(np.float64)
    alpha = deg / d if d > 0 else np.zeros(N)
    H = None
    if N <= cfg.dense_threshold and d > 0:
        H = (A.toarray().astype(np.float64) - d / N) / math.sqrt(d)
    elif d == 0:
        H = np.zeros((N, N)) if N <= cfg.dense_threshold else None
    return SparseHermitianModel(
        cfg=cfg,
        kind="er",
        shift_f=math.sqrt(d),
        beta=_er_beta(alpha, N, d),
        H=H,
        adjacency=A,
        alpha=alpha,
    )


def sample_er_adjacency(cfg: ModelConfig, strict: bool = True) -> SparseHermitianModel:
    """Sample ``A`` from G(N, d/N) and decompose ``A/sqrt(d) = H + sqrt(d) e e*``
    with ``H = (A - (d/N) J) / sqrt(d)``.

    ``strict=False`` lifts the ``d <= sqrt(N)`` restriction (tiny fixtures such
    as the forced-edge graph ``N = 2, d = 2``); ``d <= N`` is always required.
    """
    N, d = cfg.N, cfg.d
    if d > N or (strict and d > math.sqrt(N)):
        raise ValueError(f"d = {d:.4g} exceeds sqrt(N) = {math.sqrt(N):.4g}")
    rng = make_rng(cfg.seed, 0xE5)
    edges = er_edges(N, min(d / N, 1.0), rng)
    return model_from_edges(cfg, edges)


def sample_generic_sparse(
    cfg: ModelConfig, law: str = "centered-bernoulli", three_point_a: Optional[float] = None
) -> SparseHermitianModel:
    """Sample a real symmetric ``H`` with independent upper-triangular entries,
    mean zero, variance ``1/N`` and ``|H_ij| <= d**-0.5 / kappa``.

    ``centered-bernoulli``: ``(B - p) / sqrt(d (1 - p))`` with ``B ~ Bern(d/N)``.
    ``symmetric-three-point``: ``+-a`` each with probability ``1/(2 a**2 N)``,
    else ``0``; ``a`` defaults to ``d**-0.5``.
    """
    N, d, kappa = cfg.N, cfg.d, cfg.kappa
    if law not in ENTRY_LAWS:
        raise ValueError(f"unknown entry law {law!r}; expected one of {ENTRY_LAWS}")
    if d <= 0:
        raise ValueError("generic sparse ensemble needs d > 0")
    if N > cfg.dense_threshold:
        raise ValueError("generic ensemble is dense-only; N above dense threshold")
    bound = 1 / (kappa * math.sqrt(d))
    p = d / N
    if law == "centered-bernoulli":
        if p >= 1:
            raise ValueError("centered-bernoulli needs d < N")
        scale = 1 / math.sqrt(d * (1 - p))
        hi, lo = (1 - p) * scale, -p * scale
        if max(hi, -lo) > bound * (1 + 1e-12):
            raise ValueError("entry law violates the almost-sure bound")
        q = p
    else:
        a = 1 / math.sqrt(d) if three_point_a is None else float(three_point_a)
        if a <= 0 or a > bound * (1 + 1e-12):
            raise ValueError("three-point amplitude violates the almost-sure bound")
        q = 1 / (a * a * N)
        if q > 1:
            raise ValueError("three-point amplitude too small: P(nonzero) > 1")

    meta = {"law": law}
    H = np.zeros((N, N))
    if N > 1:
        rng = make_rng(cfg.seed, 0x6E, ENTRY_LAWS.index(law))
        k = _bernoulli_positions(rng, N * (N + 1) // 2, q)
        i, j = _upper_pairs(k, N, diagonal=True)
        if law == "centered-bernoulli":
            H[:] = lo
            H[i, j] = hi
            H[j, i] = hi
        else:
            vals = np.where(rng.random(k.size) < 0.5, -a, a)
            H[i, j] = vals
            H[j, i] = vals
            meta["a"] = a
    return SparseHermitianModel(
        cfg=cfg, kind="generic", shift_f=cfg.f, beta=compute_beta_dense(H), H=H, meta=meta
    )


# ---------------------------------------------------------------- functionals


def compute_beta_dense(H: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", H, H) if np.isrealobj(H) else np.sum(np.abs(H) ** 2, axis=1)


def compute_beta(model: SparseHermitianModel) -> np.ndarray:
    """Squared row norms ``beta_x = sum_y |H_xy|**2``."""
    if model.H is not None:
        return compute_beta_dense(model.H)
    if model.kind == "er":
        return _er_beta(model.alpha, model.N, model.d)
    raise ValueError("model has neither dense H nor adjacency")


def psi_indicators(model: SparseHermitianModel | np.ndarray, kappa: float) -> PsiIndicators:
    beta = model.beta if isinstance(model, SparseHermitianModel) else np.asarray(model)
    lo, hi = float(beta.min()), float(beta.max())
    return PsiIndicators(psi_l=lo >= kappa, psi_u=hi <= 2 - kappa, beta_min=lo, beta_max=hi)


# ---------------------------------------------------------------- file formats
#
# SPLB1 container, all little-endian:
#   5 bytes   magic b"SPLB1"
#   1 byte    format tag: b"E" edge list, b"R" dense float64, b"C" dense complex128
#   u64       N
#   f64       d
#   f64       f (rank-one strength)
#   payload   E: u64 edge count, then count pairs of u32 (u, v), u < v
#             R: N*N float64 row-major
#             C: N*N complex128 row-major (re, im interleaved)

MAGIC = b"SPLB1"
_HEADER = struct.Struct("<5scQdd")


def write_container(path, N: int, d: float, f: float, *, edges=None, matrix=None) -> None:
    if (edges is None) == (matrix is None):
        raise ValueError("pass exactly one of edges= or matrix=")
    buf = io.BytesIO()
    if edges is not None:
        e = np.asarray(edges, dtype="<u4").reshape(-1, 2)
        buf.write(_HEADER.pack(MAGIC, b"E", N, d, f))
        buf.write(struct.pack("<Q", e.shape[0]))
        buf.write(e.tobytes(order="C"))
    else:
        mat = np.asarray(matrix)
        if mat.shape != (N, N):
            raise ValueError("matrix shape does not match N")
        if np.iscomplexobj(mat):
            buf.write(_HEADER.pack(MAGIC, b"C", N, d, f))
            buf.write(mat.astype("<c16").tobytes(order="C"))
        else:
            buf.write(_HEADER.pack(MAGIC, b"R", N, d, f))
            buf.write(mat.astype("<f8").tobytes(order="C"))
    Path(path).write_bytes(buf.getvalue())


def read_container(path) -> dict:
    """Returns ``{"N", "d", "f", "tag", "edges" | "matrix"}``."""
    raw = Path(path).read_bytes()
    if raw[:5] != MAGIC:
        raise ValueError("not an SPLB1 container")
    magic, tag, N, d, f = _HEADER.unpack_from(raw, 0)
    off = _HEADER.size
    out = {"N": N, "d": d, "f": f, "tag": tag.decode()}
    if tag == b"E":
        (count,) = struct.unpack_from("<Q", raw, off)
        off += 8
        e = np.frombuffer(raw, dtype="<u4", count=2 * count, offset=off)
        out["edges"] = e.reshape(-1, 2).astype(np.int64)
    elif tag in (b"R", b"C"):
        dt = "<f8" if tag == b"R" else "<c16"
        out["matrix"] = np.frombuffer(raw, dtype=dt, count=N * N, offset=off).reshape(N, N).copy()
    else:
        raise ValueError(f"unknown SPLB1 format tag {tag!r}")
    return out


def write_edge_list(path, edges: np.ndarray) -> None:
    """One ``u v`` pair per line, 0-indexed."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    Path(path).write_text("".join(f"{u} {v}\n" for u, v in e))


def read_edge_list(path) -> np.ndarray:
    text = Path(path).read_text().split()
    return np.array(text, dtype=np.int64).reshape(-1, 2)
