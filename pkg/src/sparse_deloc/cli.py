"""``sparse-deloc`` command line.

Subcommands: sample, spectrum, local-law, phase-diagram, degree-tails,
stieltjes, replay.  Every run writes its data files plus ``manifest.json``
into ``--out``; ``replay MANIFEST --out DIR`` regenerates the same data
files byte for byte.  ``--plot`` additionally renders PNG figures.

Option precedence: command-line flag > ``--config`` file > environment
(``SPARSE_DELOC_SEED``, ``SPARSE_DELOC_THREADS``) > built-in default.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .degree_tails import empirical_extremes, write_tail_csv
from .local_law import SpectralDomain, bootstrap_run, local_law_report
from .manifest import RunManifest, atomic_write_text, now, read_config_file, write_manifest
from .matrix_model import (
    ENTRY_LAWS,
    ModelConfig,
    sample_er_adjacency,
    sample_generic_sparse,
    write_container,
    write_edge_list,
)
from .resolvent import ResolventError, in_outlier_window, outlier_location
from .spectral_lab import (
    EigenSolverError,
    deloc_bound,
    delocalization_verdict,
    eigen_full,
    phase_sweep,
    write_phase_csv,
    write_phase_dat,
)
from .stieltjes import boundary_density, eval_m, eval_m_alpha, eval_m_tilde, gap

log = logging.getLogger("sparse_deloc")

NON_CONFIG_KEYS = {"func", "config", "out", "command", "log_level"}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def float_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def window_list(text) -> list[list[float]]:
    if isinstance(text, (list, tuple)):
        return [[float(a), float(b)] for a, b in text]
    out = []
    for part in str(text).split(","):
        lo, hi = part.split(":")
        out.append([float(lo), float(hi)])
    return out


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def _default_seed() -> int:
    return int(os.environ.get("SPARSE_DELOC_SEED", "0"))


def _default_threads() -> int:
    return int(os.environ.get("SPARSE_DELOC_THREADS", str(os.cpu_count() or 1)))


# ---------------------------------------------------------------- helpers


def _model_cfg(args, **kw) -> ModelConfig:
    if args.d is not None:
        d = float(args.d)
    else:
        d = float(args.b) * math.log(args.N) if args.N > 1 else 0.0
    return ModelConfig(N=args.N, d=d, kappa=args.kappa, f=getattr(args, "f", 0.0) or 0.0, seed=args.seed, **kw)


def _sample(args, strict: bool = True):
    cfg = _model_cfg(args)
    ens = getattr(args, "ensemble", "er")
    if ens == "er":
        return sample_er_adjacency(cfg, strict=strict)
    return sample_generic_sparse(cfg, ens)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- commands


def cmd_sample(args, out: Path) -> list[Path]:
    model = _sample(args)
    paths = []
    if model.adjacency is not None:
        edges = model.edges()
        p = out / "edges.txt"
        write_edge_list(p, edges)
        paths.append(p)
        p = out / "matrix.splb"
        write_container(p, model.N, model.d, model.shift_f, edges=edges)
    else:
        p = out / "matrix.splb"
        write_container(p, model.N, model.d, model.shift_f, matrix=model.H)
    paths.append(p)
    summary = {
        "N": model.N,
        "d": model.d,
        "f": model.shift_f,
        "beta_min": float(model.beta.min()),
        "beta_max": float(model.beta.max()),
    }
    if model.alpha is not None:
        summary.update(alpha_min=float(model.alpha.min()), alpha_max=float(model.alpha.max()),
                       n_edges=int(model.adjacency.nnz // 2))
    p = out / "summary.json"
    _write_json(p, summary)
    paths.append(p)
    return paths


def cmd_spectrum(args, out: Path) -> list[Path]:
    model = _sample(args)
    rep = eigen_full(model, args.rescale, delta_out=args.delta_out, kappa_window=args.kappa_test)
    rows = [(i, rep.eigenvalues[i], rep.q_values[i], rep.peak_site[i], i == rep.outlier_index)
            for i in range(rep.N)]
    p1 = out / "spectrum.csv"
    _write_csv(p1, ["index", "eigenvalue", "q", "peak_site", "is_outlier"], rows)
    verdicts = {}
    for regime in ("everywhere", "bulk"):
        v = delocalization_verdict(rep, regime, args.kappa_test)
        verdicts[regime] = {"max_q": v.max_q, "bound": v.bound, "passed": v.passed, "n_considered": v.n_considered}
    verdicts["zero_site_pairs"] = rep.zero_site_pairs()
    p2 = out / "verdicts.json"
    _write_json(p2, verdicts)
    paths = [p1, p2]
    if args.plot:
        from .plotting import plot_spectrum

        p = out / "spectrum.png"
        plot_spectrum(rep, p, deloc_bound(rep.N, args.kappa_test))
        paths.append(p)
    return paths


def cmd_local_law(args, out: Path) -> list[Path]:
    model = _sample(args, strict=False)
    if not model.cfg.in_local_law_regime():
        raise ValueError("d outside [kappa log N, log N / kappa]")
    N, kappa = model.N, args.kappa
    target = N ** (-1 + kappa) if str(args.target_im) == "auto" else float(args.target_im)
    loc = outlier_location(model.shift_f)
    if model.shift_f > 0:
        log.info("outlier window |Re z - %.4f| <= %.3g excluded from sweeps", loc, args.outlier_width)
    in_window = in_outlier_window(args.re, model.shift_f, args.outlier_width)
    if in_window:
        log.warning("Re z = %g lies inside the outlier window", args.re)
    mode = "arithmetic" if args.paper_grid else "geometric"
    trace = bootstrap_run(model, args.re, target, args.domain, kappa=kappa, n_points=args.n_points, mode=mode)
    doc = trace.to_json()
    doc["outlier_location"] = loc if model.shift_f > 0 else None
    doc["outlier_width"] = args.outlier_width
    doc["in_outlier_window"] = in_window
    p1 = out / "trace.json"
    _write_json(p1, doc)
    p2 = out / "trace.csv"
    gaps = gap(args.re + 1j * trace.grid)
    _write_csv(p2, ["k", "im", "lambda", "phi7", "phi8", "gap"],
               [(k, trace.grid[k], trace.lambda_path[k], trace.phi7_path[k], trace.phi8_path[k], gaps[k])
                for k in range(trace.grid.size)])
    paths = [p1, p2]
    if args.sweep:
        n_re, n_im = int_list(args.sweep)
        dom = SpectralDomain(args.domain, kappa, N, re_cap=args.re_cap)
        rep = local_law_report(model, dom, dom.re_grid(n_re), dom.im_grid(n_im), C=args.C,
                               outlier_width=args.outlier_width)
        p = out / "report.csv"
        rep.write_csv(p)
        paths.append(p)
        p = out / "report.json"
        _write_json(p, rep.to_json())
        paths.append(p)
    if args.plot:
        from .plotting import plot_trace

        p = out / "trace.png"
        plot_trace(trace, p)
        paths.append(p)
    log.info("verdict %s (conditioned=%s)", doc["verdict"], trace.conditioned)
    return paths


def cmd_phase_diagram(args, out: Path) -> list[Path]:
    cells = phase_sweep(float_list(args.b_grid), [tuple(w) for w in window_list(args.windows)], args.N,
                        args.trials, kappa_test=args.kappa_test, seed=args.seed, delta_out=args.delta_out,
                        workers=args.threads)
    p1, p2 = out / "phase.csv", out / "phase.dat"
    write_phase_csv(p1, cells)
    write_phase_dat(p2, cells)
    paths = [p1, p2]
    if args.plot:
        from .plotting import plot_phase

        p = out / "phase.png"
        plot_phase(cells, p)
        paths.append(p)
    return paths


def cmd_degree_tails(args, out: Path) -> list[Path]:
    rows = []
    for N in int_list(args.N_list):
        for b in float_list(args.b_list):
            if b * math.log(N) > math.sqrt(N):
                log.warning("skipping N=%d b=%g: d exceeds sqrt(N)", N, b)
                continue
            summ = empirical_extremes(N, b, args.trials, seed=args.seed)
            rows.extend(summ.rows(float_list(args.eps)))
    p = out / "tails.csv"
    write_tail_csv(p, rows)
    paths = [p]
    if args.plot and rows:
        from .plotting import plot_tails

        pp = out / "tails.png"
        plot_tails(rows, pp)
        paths.append(pp)
    return paths


STIELTJES_COLUMNS = ["z_re", "z_im", "alpha", "m_re", "m_im", "m_tilde_re", "m_tilde_im",
                     "m_alpha_re", "m_alpha_im", "gap", "density"]


def cmd_stieltjes(args, out: Path) -> list[Path]:
    res = np.linspace(args.re_min, args.re_max, args.n_re)
    rows = []
    for im in float_list(args.im):
        z = res + 1j * im
        m, mt, g = eval_m(z), eval_m_tilde(z), gap(z)
        for a in float_list(args.alpha):
            ma = eval_m_alpha(a, z)
            dens = boundary_density(a, res, im) if im <= 1e-3 else np.imag(ma) / np.pi
            for k in range(res.size):
                rows.append({"z_re": res[k], "z_im": im, "alpha": a, "m_re": m[k].real, "m_im": m[k].imag,
                             "m_tilde_re": mt[k].real, "m_tilde_im": mt[k].imag, "m_alpha_re": ma[k].real,
                             "m_alpha_im": ma[k].imag, "gap": g[k], "density": dens[k]})
    p = out / "stieltjes.csv"
    _write_csv(p, STIELTJES_COLUMNS, [[r[c] for c in STIELTJES_COLUMNS] for r in rows])
    paths = [p]
    if args.plot:
        from .plotting import plot_stieltjes

        pp = out / "stieltjes.png"
        plot_stieltjes(rows, pp)
        paths.append(pp)
    return paths


HANDLERS = {
    "sample": cmd_sample,
    "spectrum": cmd_spectrum,
    "local-law": cmd_local_law,
    "phase-diagram": cmd_phase_diagram,
    "degree-tails": cmd_degree_tails,
    "stieltjes": cmd_stieltjes,
}


# ---------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--plot", type=_bool, nargs="?", const=True, default=False, help="also render PNG figures")
    p.add_argument("--log-level", default="INFO")


def _model_opts(p: argparse.ArgumentParser, ensembles=True) -> None:
    p.add_argument("--N", type=int, default=2000)
    p.add_argument("--b", type=float, default=3.5, help="sparseness, d = b log N")
    p.add_argument("--d", type=float, default=None, help="mean degree (overrides --b)")
    p.add_argument("--kappa", type=float, default=0.1)
    if ensembles:
        p.add_argument("--ensemble", choices=("er",) + ENTRY_LAWS, default="er")
        p.add_argument("--f", type=float, default=0.0, help="rank-one strength (generic ensembles)")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="sparse-deloc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("sample", help="sample a matrix; write edge list, SPLB1 container, manifest")
    _model_opts(p)
    _common(p)
    subs["sample"] = p

    p = sub.add_parser("spectrum", help="eigendecomposition, q values and delocalization verdicts")
    _model_opts(p)
    p.add_argument("--rescale", choices=("raw", "by_sqrt_d"), default="by_sqrt_d")
    p.add_argument("--kappa-test", type=float, default=0.3)
    p.add_argument("--delta-out", type=float, default=0.3)
    _common(p)
    subs["spectrum"] = p

    p = sub.add_parser("local-law", help="bootstrap continuation trace (and optional domain sweep)")
    _model_opts(p)
    p.add_argument("--domain", choices=("lower", "upper"), default="lower")
    p.add_argument("--re", type=float, default=0.5)
    p.add_argument("--target-im", default="auto", help="'auto' = N^(-1+kappa)")
    p.add_argument("--n-points", type=int, default=200)
    p.add_argument("--paper-grid", type=_bool, nargs="?", const=True, default=False,
                   help="arithmetic N^-3 grid (N <= 100)")
    p.add_argument("--outlier-width", type=float, default=0.5)
    p.add_argument("--sweep", default=None, help="N_RE,N_IM: also write a 2-D domain report")
    p.add_argument("--re-cap", type=float, default=4.0)
    p.add_argument("--C", type=float, default=1.0, help="constant in front of (log N)^(-1/7)")
    _common(p)
    subs["local-law"] = p

    p = sub.add_parser("phase-diagram", help="(b, energy window) delocalization sweep")
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--b-grid", default="0.5,1.5,3.5")
    p.add_argument("--windows", default="0:0.3,0.3:1.7,1.7:inf", help="lo:hi pairs on |E|/sqrt(d)")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--kappa-test", type=float, default=0.3)
    p.add_argument("--delta-out", type=float, default=0.3)
    _common(p)
    subs["phase-diagram"] = p

    p = sub.add_parser("degree-tails", help="Monte Carlo extreme degrees vs closed-form tail bounds")
    p.add_argument("--N", dest="N_list", default="2000", help="comma-separated N values")
    p.add_argument("--b", dest="b_list", default="3.5", help="comma-separated b values")
    p.add_argument("--eps", default="0.05,0.1")
    p.add_argument("--trials", type=int, default=1000)
    _common(p)
    subs["degree-tails"] = p

    p = sub.add_parser("stieltjes", help="tabulate m, m_tilde, m_alpha, gap and density")
    p.add_argument("--re-min", type=float, default=-4.0)
    p.add_argument("--re-max", type=float, default=4.0)
    p.add_argument("--n-re", type=int, default=161)
    p.add_argument("--im", default="1e-6,0.1,1")
    p.add_argument("--alpha", default="0,0.5,1,2")
    _common(p)
    subs["stieltjes"] = p

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--log-level", default="INFO")
    subs["replay"] = p
    return parser, subs


def _apply_config(parser, subs, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    path = getattr(args, "config", None)
    if not path:
        return args
    sp = subs[args.command]
    cfg = read_config_file(path)
    known = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, raw in cfg.items():
        if key not in known or key in NON_CONFIG_KEYS:
            raise ValueError(f"unknown config key {key!r} for {args.command}")
        act = known[key]
        defaults[key] = act.type(raw) if act.type else raw
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def run(command: str, args: argparse.Namespace, out: Path) -> RunManifest:
    out.mkdir(parents=True, exist_ok=True)
    config = {k: v for k, v in sorted(vars(args).items()) if k not in NON_CONFIG_KEYS}
    man = RunManifest(command=command, config=config, seed=int(config.get("seed", 0)), started=now())
    paths = HANDLERS[command](args, out)
    man.finished = now()
    man.output_paths = [p.name for p in paths]
    write_manifest(out / "manifest.json", man)
    return man


def replay(manifest_path, out: Path) -> RunManifest:
    man = RunManifest.load(manifest_path)
    if man.command not in HANDLERS:
        raise ValueError(f"manifest names unknown command {man.command!r}")
    args = argparse.Namespace(**man.config)
    return run(man.command, args, out)


def main(argv=None) -> int:
    parser, subs = build_parser()
    try:
        args = _apply_config(parser, subs, argv)
    except ValueError as exc:
        parser.error(str(exc))
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            replay(args.manifest, Path(args.out))
        else:
            run(args.command, args, Path(args.out))
    except (ValueError, ResolventError, EigenSolverError, OSError) as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
