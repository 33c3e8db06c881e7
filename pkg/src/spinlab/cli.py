"""Command-line scenario runner.

Each subcommand writes CSV (header row, 12 significant digits), a JSON
summary with fixed key order, and an SVG plot with a CSV twin where the
output is figure-like. Exit codes: 0 success, 2 configuration error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import dd, lgi, pps, relax, tomography
from . import sequence as sq
from . import spinops as so
from .hamiltonian import load_system

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ output

def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.12g}"


def write_csv(path: Path, columns: dict) -> Path:
    keys = list(columns)
    rows = zip(*[np.atleast_1d(columns[k]) for k in keys])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return float(fmt(v)) if np.isfinite(v) else None
    return v


def write_json(path: Path, data: dict) -> Path:
    path.write_text(json.dumps(_jsonable(data), indent=2) + "\n")
    return path


def twin_path(svg_path) -> Path:
    p = Path(svg_path)
    return p.with_name(p.stem + "_plot.csv")


def emit_plot(series: dict, path, x_label: str = "x", y_label: str = "y", title: str = "") -> Path:
    """Self-contained SVG line plot, byte-identical for identical input.

    ``series`` maps a name to (x, y). A CSV twin named ``<stem>_plot.csv``
    is written next to the SVG.
    """
    path = Path(path)
    w, h, m = 640, 400, 60
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    x0, x1 = float(np.min(xs)), float(np.max(xs))
    y0, y1 = float(np.min(ys)), float(np.max(ys))
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def px(x):
        return m + (x - x0) / (x1 - x0) * (w - 2 * m)

    def py(y):
        return h - m - (y - y0) / (y1 - y0) * (h - 2 * m)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
           f'<rect width="{w}" height="{h}" fill="white"/>',
           f'<line x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}" stroke="black"/>',
           f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h - m}" stroke="black"/>',
           f'<text x="{w / 2:.1f}" y="{h - 15}" text-anchor="middle" font-size="13">{x_label}</text>',
           f'<text x="15" y="{h / 2:.1f}" text-anchor="middle" font-size="13" '
           f'transform="rotate(-90 15 {h / 2:.1f})">{y_label}</text>',
           f'<text x="{w / 2:.1f}" y="25" text-anchor="middle" font-size="14">{title}</text>']
    for v, anchor, xx, yy in ((x0, "middle", px(x0), h - m + 18), (x1, "middle", px(x1), h - m + 18),
                              (y0, "end", m - 6, py(y0) + 4), (y1, "end", m - 6, py(y1) + 4)):
        out.append(f'<text x="{xx:.1f}" y="{yy:.1f}" text-anchor="{anchor}" font-size="11">{v:.4g}</text>')
    for i, (name, (x, y)) in enumerate(series.items()):
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(np.asarray(x, float), np.asarray(y, float)))
        c = colors[i % len(colors)]
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{w - m + 5}" y="{m + 15 * i}" font-size="11" fill="{c}">{name}</text>')
    out.append("</svg>")
    try:
        path.write_text("\n".join(out) + "\n")
    except OSError as exc:
        raise ConfigError(f"cannot write plot {path}: {exc}") from exc
    twin = {}
    for name, (x, y) in series.items():
        twin[f"{name}_x"] = np.asarray(x, float)
        twin[f"{name}_y"] = np.asarray(y, float)
    lengths = {len(v) for v in twin.values()}
    if len(lengths) == 1:
        write_csv(twin_path(path), twin)
    else:
        rows = {"series": [], "x": [], "y": []}
        for name, (x, y) in series.items():
            rows["series"] += [name] * len(x)
            rows["x"] += list(np.asarray(x, float))
            rows["y"] += list(np.asarray(y, float))
        write_csv(twin_path(path), rows)
    return path


# ---------------------------------------------------------------- commands

def _system(name: str):
    try:
        return load_system(name)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from exc
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"invalid system file {name}: {exc}") from exc


def cmd_singlet(a, out: Path) -> dict:
    sys_ = _system(a.system)
    if sys_.singlet is None:
        raise ConfigError(f"system {a.system} has no singlet parameters")
    if a.ts_s is not None:
        from dataclasses import replace
        sys_ = sys_.replace(singlet=replace(sys_.singlet, ts_s=a.ts_s))
    prep = sq.apply(sq.singlet_prep(sys_), sys_, so.total(2, "z"))
    target = so.projector(so.SINGLET) - so.projector(so.TRIPLET_ZERO)
    t = np.linspace(0, a.t_max_s, a.steps)
    curve = relax.singlet_decay_curve(sys_, t, prep)
    write_csv(out / "singlet_decay.csv", {"t_s": t, "correlation": curve["correlation"],
                                          "magnitude": curve["magnitude"]})
    emit_plot({"correlation": (t, curve["correlation"]), "magnitude": (t, curve["magnitude"])},
              out / "singlet_decay.svg", "lock time (s)", "value", "singlet order under spin-lock")
    i = int(np.argmax(curve["correlation"]))
    return {"system": sys_.name, "prep_trace_distance": so.trace_distance(prep, target),
            "ts_configured_s": sys_.singlet.ts_s,
            "ts_fitted_s": relax.fit_decay_constant(t, curve["magnitude"]),
            "peak_correlation": curve["correlation"][i], "peak_time_s": t[i]}


def cmd_tomo(a, out: Path) -> dict:
    rng = np.random.default_rng(a.seed)
    if a.scheme == "2spin":
        sys_ = _system(a.system or "btp")
        scheme = tomography.two_spin_scheme(sys_, gauge=a.gauge)
        cs = tomography.build_constraints(scheme, sys_)
    else:
        sys_ = _system(a.system or "acrylonitrile")
        cs = tomography.build_with_fallback(tomography.three_spin_scheme(sys_), sys_)
    n = sys_.n
    if a.state == "random":
        rho = tomography.random_deviation(n, rng)
    elif a.state == "thermal":
        rho = so.total(n, "z")
    else:
        rho = so.pps_deviation(a.state)
        if len(a.state) != n:
            raise ConfigError(f"state label {a.state} does not match {n} spins")
    y = tomography.simulate_readouts(rho, cs.scheme, sys_, a.noise, rng)
    est = tomography.reconstruct(y, cs)
    idx = [(i, j) for i in range(2**n) for j in range(2**n)]
    write_csv(out / "tomo_elements.csv", {
        "row": [i for i, _ in idx], "col": [j for _, j in idx],
        "true_re": [rho[i, j].real for i, j in idx], "true_im": [rho[i, j].imag for i, j in idx],
        "est_re": [est[i, j].real for i, j in idx], "est_im": [est[i, j].imag for i, j in idx]})
    return {"scheme": a.scheme, "readout": cs.scheme.readout, "gauge": cs.scheme.gauge,
            "rows": cs.matrix.shape[0], "unknowns": cs.matrix.shape[1], "rank": cs.rank,
            "condition_number": cs.condition_number, "noise": a.noise,
            "max_error": float(np.max(np.abs(est - so.traceless(rho)))),
            "correlation": so.correlation(est, rho)}


def cmd_pps(a, out: Path) -> dict:
    mode = "relaxed" if a.relaxed else "ideal"
    sys_ = _system(a.system) if a.system else None
    if sys_ is not None and sys_.n != a.qubits:
        raise ConfigError(f"system {a.system} has {sys_.n} spins, --qubits is {a.qubits}")
    if mode == "relaxed" and sys_ is None:
        raise ConfigError("--relaxed needs --system")
    run, rep = pps.prepare(a.qubits, sys_, mode, a.lock_s, a.refocus)
    diag = np.real(np.diag(run.deviation))
    labels = [format(i, f"0{a.qubits}b") for i in range(2**a.qubits)]
    target = np.real(np.diag(so.pps_deviation(rep.target_label)))
    write_csv(out / "pps_diagonal.csv", {"label": labels, "deviation": diag, "target": target})
    x = np.arange(diag.size, dtype=float)
    scale = np.max(np.abs(diag)) or 1.0
    emit_plot({"deviation": (x, diag / scale), "target": (x, target / np.max(np.abs(target)))},
              out / "pps_diagonal.svg", "basis index", "normalized population", "diagonal deviation")
    return rep.to_dict()


def cmd_dd(a, out: Path) -> dict:
    if a.seed is None:
        raise ConfigError("dd needs --seed")
    try:
        spectrum = dd.NoiseSpectrum.parse(a.spectrum)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sys_ = _system(a.system)
    if sys_.n != 2:
        raise ConfigError("dd storage needs a two-spin system")
    t = np.linspace(0, a.t_max_s, a.steps)
    r = dd.storage_experiment(a.bell, a.scheme, sys_, spectrum, t, order=a.order,
                              static_hz=a.static_hz, rf_error=a.rf_error)
    write_csv(out / "dd_storage.csv", {"t_s": t, "correlation": r["correlation"],
                                       "magnetization": r["magnetization"]})
    emit_plot({"correlation": (t, r["correlation"]), "magnetization": (t, r["magnetization"])},
              out / "dd_storage.svg", "storage time (s)", "value", f"{a.scheme} {a.bell}")
    n = 0 if a.scheme == "none" else a.order
    block = dd.make_sequence(a.scheme, n, r["block_s"])
    summary = {"scheme": a.scheme, "order": n, "bell": a.bell, "spectrum": spectrum.kind,
               "amplitude": spectrum.amplitude, "cutoff_rad_s": spectrum.cutoff, "block_s": r["block_s"],
               "decay_constant_s": relax.fit_decay_constant(t, r["magnetization"]),
               "points_above_0_9": dd.count_above(r["correlation"], 0.9), "seed": a.seed}
    if n and a.mc_traj:
        summary["block_chi"] = dd.chi(block, spectrum)
        summary["block_chi_monte_carlo"] = dd.monte_carlo_chi(block, spectrum, a.mc_traj, a.seed)
    return summary


def cmd_lgi(a, out: Path) -> dict:
    omega = 2 * np.pi * a.omega_hz
    dt = np.linspace(0, a.dt_max_ms * 1e-3, a.steps)
    sys_ = None
    if a.tau_ms is not None:
        sys_ = lgi.tune_target_t2(a.n, omega, dt, a.tau_ms * 1e-3, _system(a.system))
    table = lgi.correlations_table(a.n, omega, dt, sys_)
    key = f"K{a.n}"
    cols = {"dt_ms": dt * 1e3, "omega_dt_over_pi": omega * dt / np.pi}
    cols.update({k: v for k, v in table.items() if k != "dt_s"})
    cols[f"{key}_ideal"] = lgi.k_string(a.n, omega, dt)
    write_csv(out / "lgi.csv", cols)
    emit_plot({key: (omega * dt / np.pi, table[key]), "classical": (omega * dt / np.pi, np.full(dt.size, a.n - 2.0))},
              out / "lgi.svg", "omega dt / pi", key, "Leggett-Garg string")
    f = (lambda d: float(lgi.k_string_sim(a.n, omega, [d], sys_)[0]))
    x_max, k_max = lgi.refined_max(f, dt)
    bound = lgi.bounds(a.n)[1]
    summary = {"n": a.n, "omega_hz": a.omega_hz, "k_max": k_max, "k_max_dt_ms": x_max * 1e3,
               "k_max_grid": float(np.max(table[key])), "classical_bound": bound,
               "quantum_bound": lgi.bounds(a.n)[3]}
    if sys_ is not None:
        cross = lgi.classical_crossing(dt, table[key], bound)
        summary.update({"target_t2_s": sys_.t2_s[1],
                        "fitted_tau_ms": lgi.fit_string_decay(a.n, omega, dt, table[key]) * 1e3,
                        "classical_crossing_ms": None if cross is None else cross * 1e3,
                        "classical_crossing_omega_dt_over_pi": None if cross is None else omega * cross / np.pi})
    return summary


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinlab", description="Singlet-based NMR QIP simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, system=None):
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--system", default=system, help="built-in system name or JSON path")
        return sp

    s = common(sub.add_parser("singlet", help="singlet preparation and decay under spin-lock"), "btp")
    s.add_argument("--t-max-s", type=float, default=60.0)
    s.add_argument("--steps", type=int, default=121)
    s.add_argument("--ts-s", type=float, default=None, help="override the singlet lifetime")

    s = common(sub.add_parser("tomo", help="tomography round trip"))
    s.add_argument("--scheme", choices=("2spin", "3spin"), default="2spin")
    s.add_argument("--state", default="random", help="random, thermal or a basis label like 01")
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--gauge", choices=("traceless", "reference"), default="traceless")
    s.add_argument("--seed", type=int, default=0)

    s = common(sub.add_parser("pps", help="pseudopure state preparation"))
    s.add_argument("--qubits", type=int, default=2)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--ideal", action="store_true")
    g.add_argument("--relaxed", action="store_true")
    s.add_argument("--lock-s", type=float, default=None)
    s.add_argument("--refocus", action="store_true", help="extra pi on qubits 1,2 (|1001> for 4 qubits)")

    s = common(sub.add_parser("dd", help="Bell-state storage under dynamical decoupling"), "btp")
    s.add_argument("--scheme", choices=("none", "cpmg", "udd"), default="udd")
    s.add_argument("--order", type=int, default=7)
    s.add_argument("--bell", choices=("singlet", "psi-minus", "psi-plus", "phi-minus", "phi-plus", "product"),
                   default="psi-plus")
    s.add_argument("--spectrum", default="ohmic:amp=0.3,cutoff=1000")
    s.add_argument("--t-max-s", type=float, default=30.0)
    s.add_argument("--steps", type=int, default=121)
    s.add_argument("--static-hz", type=float, default=0.5)
    s.add_argument("--rf-error", type=float, default=0.0)
    s.add_argument("--mc-traj", type=int, default=0, help="Monte-Carlo check of the block chi")
    s.add_argument("--seed", type=int, default=None)

    s = common(sub.add_parser("lgi", help="Leggett-Garg strings"), "chloroform")
    s.add_argument("--n", type=int, default=3)
    s.add_argument("--omega-hz", type=float, default=100.0)
    s.add_argument("--dt-max-ms", type=float, default=300.0)
    s.add_argument("--steps", type=int, default=360)
    s.add_argument("--tau-ms", type=float, default=None, help="tune target relaxation to this string decay")
    return p


COMMANDS = {"singlet": cmd_singlet, "tomo": cmd_tomo, "pps": cmd_pps, "dd": cmd_dd, "lgi": cmd_lgi}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    out = Path(a.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[a.command](a, out)
        write_json(out / f"{a.command}.json", summary)
    except (tomography.RankDeficientError, dd.NonConvergentIntegral, np.linalg.LinAlgError) as exc:
        print(f"spinlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, OSError) as exc:
        print(f"spinlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(_jsonable(summary)))
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
