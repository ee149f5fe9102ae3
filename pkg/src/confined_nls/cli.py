"""Command line entry point: ``confined-nls <subcommand> --config run.yaml --out DIR``.

Every run writes ``manifest.json`` before computing and rewrites it when done,
with the resolved configuration, wall times, output inventory, horizon report,
captured warnings and any errors. Exit codes: 0 success, 2 invalid input,
3 numerical failure. The thread count of the BLAS/FFT pools can be pinned with
``CONFINED_NLS_THREADS``.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import sys
import time
import warnings
from contextlib import nullcontext
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .diagnostics import decay_tracker, morawetz_series
from .eigenbasis import load_eigenbasis, save_eigenbasis, warn_if_leaky
from .errors import ConfigurationError, InequalityViolation, NLSWarning, NumericalError
from .field import read_snapshot, write_snapshot
from .inequalities import (
    EnsembleSpec,
    InequalityParams,
    check_anisotropic_GN,
    check_B_embedding,
    check_H_gamma_s_embedding,
    check_Z_embedding,
)
from .propagator import SimConfig, dispersion_horizon, evolve, grid_horizon
from .scattering import detect_asymptotic_state, wave_operator
from .vectorfields import VectorFieldId, check_commutation

THREADS_ENV = "CONFINED_NLS_THREADS"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


# configuration


def load_yaml(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config not found: {path}")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return data


def _sim_config(raw: dict, base_dir) -> SimConfig:
    sim = {k: v for k, v in raw.items() if k not in _SECTIONS}
    return SimConfig.from_mapping(sim, base_dir)


_SECTIONS = ("vectorfields", "scatter", "waveop", "morawetz", "inequalities", "snapshots", "eigen_cache")


def _section(raw, name, defaults) -> dict:
    sec = dict(defaults)
    sec.update(raw.get(name) or {})
    unknown = set(sec) - set(defaults)
    if unknown:
        raise ConfigurationError(f"unknown keys in '{name}': {sorted(unknown)}")
    return sec


# manifest


class Manifest:
    def __init__(self, out_dir: Path, subcommand: str, argv):
        self.path = out_dir / "manifest.json"
        self.out_dir = out_dir
        self.data = {
            "subcommand": subcommand,
            "argv": list(argv),
            "version": __version__,
            "status": "running",
            "start_time": _now(),
            "end_time": None,
            "wall_seconds": None,
            "config": None,
            "horizon": None,
            "outputs": [],
            "warnings": [],
            "errors": [],
        }
        self._t0 = time.perf_counter()

    def write(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, indent=2, default=_json_default) + "\n")

    def add_output(self, path):
        rel = os.path.relpath(Path(path), self.out_dir)
        if rel not in self.data["outputs"]:
            self.data["outputs"].append(rel)

    def finalize(self, status, captured):
        self.data["status"] = status
        self.data["end_time"] = _now()
        self.data["wall_seconds"] = time.perf_counter() - self._t0
        seen = set()
        for w in captured:
            msg = f"{w.category.__name__}: {w.message}"
            if msg not in seen:
                seen.add(msg)
                self.data["warnings"].append(msg)
        self.write()


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    return str(o)


def _horizon_report(cfg: SimConfig, u0, t_span) -> dict:
    gh = grid_horizon(cfg.ygrid)
    dh = dispersion_horizon(u0, cfg.sigma if cfg.nonlinear else None)
    return {
        "t_span": t_span,
        "grid_horizon": gh,
        "v_max": cfg.ygrid.max_group_velocity,
        "within_grid_horizon": bool(t_span * cfg.ygrid.max_group_velocity < cfg.ygrid.L_y),
        "dispersion_horizon": dh,
        "within_dispersion_horizon": bool(t_span <= dh),
    }


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _basis_for(cfg: SimConfig, raw: dict, base_dir):
    cache = raw.get("eigen_cache")
    if cache:
        path = Path(cache)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        if path.exists():
            basis = load_eigenbasis(path, cfg.potential, cfg.xgrid, cfg.modes)
        else:
            basis = cfg.build_basis()
            save_eigenbasis(basis, path)
    else:
        basis = cfg.build_basis()
    warn_if_leaky(basis)
    return basis


def _advise(cfg, basis):
    for note in cfg.advisories(basis):
        warnings.warn(note, NLSWarning, stacklevel=2)


# subcommands


def cmd_simulate(args, man: Manifest):
    raw = load_yaml(args.config)
    base = Path(args.config).parent
    cfg = _sim_config(raw, base)
    man.data["config"] = {**cfg.to_mapping(), **{k: raw[k] for k in _SECTIONS if k in raw}}
    man.write()
    basis = _basis_for(cfg, raw, base)
    _advise(cfg, basis)
    u0 = cfg.initial_field(basis)
    man.data["horizon"] = _horizon_report(cfg, u0, cfg.t_end - u0.t)
    snaps = bool(raw.get("snapshots", args.snapshots))
    rec = evolve(u0, cfg, keep_snapshots=snaps)
    out = Path(args.out)
    man.add_output(rec.to_csv(out / "timeseries.csv"))
    (out / "config.yaml").write_text(yaml.safe_dump(man.data["config"], sort_keys=True))
    man.add_output(out / "config.yaml")
    if snaps:
        sdir = out / "snapshots"
        sdir.mkdir(exist_ok=True)
        for i, s in enumerate(rec.snapshots):
            for p in write_snapshot(s, sdir / f"u_{i:05d}"):
                man.add_output(p)


def cmd_eigen(args, man: Manifest):
    raw = load_yaml(args.config)
    base = Path(args.config).parent
    cfg = _sim_config(raw, base)
    man.data["config"] = cfg.to_mapping()
    man.write()
    basis = cfg.build_basis()
    warn_if_leaky(basis)
    out = Path(args.out)
    res = basis.residuals()
    edge = [basis.edge_mass_fraction(n) for n in range(basis.n_modes)]
    rows = [(n, float(basis.eigenvalues[n]), float(res[n]), float(edge[n])) for n in range(basis.n_modes)]
    man.add_output(_write_csv(out / "eigen.csv", ["n", "lambda", "residual", "edge_mass"], rows))
    man.add_output(save_eigenbasis(basis, out / "eigenbasis.bin"))
    man.data["orthonormality_defect"] = basis.orthonormality_defect()
    man.data["C0"] = basis.C0


def cmd_vectorfields(args, man: Manifest):
    raw = load_yaml(args.config)
    base = Path(args.config).parent
    cfg = _sim_config(raw, base)
    sec = _section(raw, "vectorfields", {"j": [0, 1, 2, 3], "t": [0.0, 1.0], "tau": [0.1, 0.5, 1.0]})
    man.data["config"] = {**cfg.to_mapping(), "vectorfields": sec}
    man.write()
    basis = _basis_for(cfg, raw, base)
    u0 = cfg.initial_field(basis)
    man.data["horizon"] = _horizon_report(cfg, u0, max(sec["t"]) + max(sec["tau"]))
    rows = []
    for j in sec["j"]:
        for t in sec["t"]:
            for tau in sec["tau"]:
                rows.append((int(j), float(t), float(tau), check_commutation(VectorFieldId(int(j), float(t)), u0, float(tau))))
    man.add_output(_write_csv(Path(args.out) / "vectorfields.csv", ["j", "t", "tau", "defect"], rows))


def cmd_scatter(args, man: Manifest):
    raw = load_yaml(args.config)
    base = Path(args.config).parent
    cfg = _sim_config(raw, base)
    sec = _section(raw, "scatter", {"checkpoints": [2, 4, 8, 16, 32], "tol": 1e-3, "norm": "Z"})
    man.data["config"] = {**cfg.to_mapping(), "scatter": sec}
    man.write()
    basis = _basis_for(cfg, raw, base)
    _advise(cfg, basis)
    u0 = cfg.initial_field(basis)
    man.data["horizon"] = _horizon_report(cfg, u0, float(max(sec["checkpoints"])) - u0.t)
    rep = detect_asymptotic_state(cfg, u0, sec["checkpoints"], float(sec["tol"]), sec["norm"])
    out = Path(args.out)
    man.add_output(_write_csv(out / "scatter_report.csv", ["t", "increment"], rep.rows()))
    for p in write_snapshot(rep.u_plus, out / "u_plus"):
        man.add_output(p)
    man.data["scatter"] = {
        "converged": rep.converged,
        "tail_estimate": rep.tail_estimate,
        "mass_u0": rep.masses["u0"],
        "mass_u_plus": rep.masses["u_plus"],
    }


def cmd_waveop(args, man: Manifest):
    raw = load_yaml(args.config)
    base = Path(args.config).parent
    cfg = _sim_config(raw, base)
    sec = _section(raw, "waveop", {"T_far": 40.0, "T_near": 5.0, "max_iter": 50, "tol": 1e-11, "oracle": True})
    man.data["config"] = {**cfg.to_mapping(), "waveop": sec}
    man.write()
    basis = _basis_for(cfg, raw, base)
    _advise(cfg, basis)
    u_minus = cfg.initial_field(basis)
    man.data["horizon"] = _horizon_report(cfg, u_minus, float(sec["T_far"]))
    res = wave_operator(
        u_minus,
        float(sec["T_far"]),
        float(sec["T_near"]),
        cfg.dt,
        int(sec["max_iter"]),
        float(sec["tol"]),
        sigma=cfg.sigma,
        nonlinear=cfg.nonlinear,
        oracle=bool(sec["oracle"]),
    )
    out = Path(args.out)
    rows = [(i + 1, float(r)) for i, r in enumerate(res.picard_residuals)]
    man.add_output(_write_csv(out / "picard.csv", ["iteration", "residual"], rows))
    for p in write_snapshot(res.u_at_minus_T, out / "u_minus_T_near"):
        man.add_output(p)
    man.data["waveop"] = {"iterations": res.iterations, "oracle_discrepancy": res.oracle_discrepancy}


def cmd_morawetz(args, man: Manifest):
    run = Path(args.run)
    cfg_path = run / "config.yaml"
    raw = load_yaml(cfg_path)
    cfg = _sim_config(raw, run)
    extra = load_yaml(args.config) if args.config else {}
    sec = _section(extra, "morawetz", {"mu": 1.0, "r": 4.0, "window": None})
    man.data["config"] = {"run": str(run), **cfg.to_mapping(), "morawetz": sec}
    man.write()
    sdir = run / "snapshots"
    stems = sorted(p.with_suffix("") for p in sdir.glob("u_*.json")) if sdir.is_dir() else []
    if len(stems) < 2:
        raise ConfigurationError(f"{run}: needs at least two saved snapshots (run simulate with snapshots: true)")
    basis = cfg.build_basis()
    snaps = [read_snapshot(s, basis, cfg.ygrid) for s in stems]
    s_abs = morawetz_series(snaps, "abs", cfg.sigma, float(sec["mu"]))
    s_jap = morawetz_series(snaps, "japanese", cfg.sigma, float(sec["mu"]))
    out = Path(args.out)
    rows = zip(s_abs.times, s_abs.M_values, s_jap.M_values, s_abs.frac_accum_series, s_abs.cube_accum_series)
    man.add_output(
        _write_csv(out / "morawetz.csv", ["t", "M_abs", "M_japanese", "frac_accum", "cube_accum"], [tuple(map(float, r)) for r in rows])
    )
    positive = [s for s in snaps if s.t > 0]
    window = sec["window"]
    rows = []
    if len(positive) >= 2:
        fit = decay_tracker(positive, float(sec["r"]), window)
        rows = [(float(t), float(v)) for t, v in zip(fit.times, fit.values)]
        man.data["decay"] = {"r": float(sec["r"]), "slope": fit.slope, "expected_linear_rate": -fit.expected_rate}
    man.add_output(_write_csv(out / "decay.csv", ["t", "Lr_norm"], rows))
    man.data["morawetz"] = {"scale": s_abs.scale, "max_abs_M_over_bound": float(np.max(np.abs(s_abs.M_values) / s_abs.bounds))}


_CHECKS = {"B", "HgammaS", "GN", "Z"}


def cmd_inequalities(args, man: Manifest):
    raw = load_yaml(args.config) if args.config else {}
    base = Path(args.config).parent if args.config else None
    cfg = _sim_config(raw, base)
    ens = EnsembleSpec.from_mapping(load_yaml(args.ensemble))
    params = load_yaml(args.params) if args.params else {}
    man.data["config"] = {**cfg.to_mapping(), "check": args.check, "ensemble": ens.__dict__, "params": params}
    man.write()
    basis = cfg.build_basis()
    yg = cfg.ygrid
    if args.check == "B":
        rep = check_B_embedding(ens, basis, yg)
    elif args.check == "HgammaS":
        rep = check_H_gamma_s_embedding(ens, float(params.get("epsilon", 0.1)), basis, yg)
    elif args.check == "GN":
        rep = check_anisotropic_GN(ens, InequalityParams.from_mapping(params, cfg.d), basis, yg)
    else:
        if "k" not in params:
            raise ConfigurationError("the Z check needs 'k' in --params")
        rep = check_Z_embedding(ens, float(params["k"]), basis, yg, d=cfg.d)
    rows = [(i, float(r)) for i, r in enumerate(rep.ratios)]
    man.add_output(_write_csv(Path(args.out) / f"inequality_{args.check}.csv", ["member", "ratio"], rows))
    man.data["inequality"] = {"max_ratio": rep.max_ratio, "argmax": rep.argmax, "argmax_seed": rep.argmax_seed, "skipped": rep.skipped}


# plot scripts

_PLOT_SOURCES = {
    "timeseries.csv": (
        "plot_conservation.py",
        """
t, mass, energy = data["t"], data["mass"], data["energy"]
fig, ax = plt.subplots()
ax.semilogy(t[1:], np.abs(mass[1:] / mass[0] - 1) + 1e-300, label="relative mass drift")
if np.all(np.isfinite(energy)):
    ax.semilogy(t[1:], np.abs(energy[1:] / energy[0] - 1) + 1e-300, label="relative energy drift")
ax.set_xlabel("t")
ax.legend()
""",
    ),
    "scatter_report.csv": (
        "plot_scatter.py",
        """
fig, ax = plt.subplots()
ax.semilogy(data["t"], data["increment"], "o-")
ax.set_xlabel("checkpoint t")
ax.set_ylabel("interaction-picture increment")
""",
    ),
    "picard.csv": (
        "plot_picard.py",
        """
fig, ax = plt.subplots()
ax.semilogy(data["iteration"], data["residual"], "o-")
ax.set_xlabel("sweep")
ax.set_ylabel("max L2 residual")
""",
    ),
    "morawetz.csv": (
        "plot_morawetz.py",
        """
fig, ax = plt.subplots()
ax.plot(data["t"], data["M_abs"], label="a = |y|")
ax.plot(data["t"], data["M_japanese"], label="a = <y>")
ax.set_xlabel("t")
ax.set_ylabel("M(t)")
ax.legend()
""",
    ),
    "decay.csv": (
        "plot_decay.py",
        """
fig, ax = plt.subplots()
t, v = data["t"], data["Lr_norm"]
ax.loglog(t, v, "o", label="L^r norm")
if len(t) > 1:
    slope, icpt = np.polyfit(np.log(t), np.log(v), 1)
    ax.loglog(t, np.exp(icpt) * t**slope, "--", label=f"slope {slope:.3f}")
ax.set_xlabel("t")
ax.legend()
""",
    ),
}

_PLOT_HEADER = '''"""Render {csv} into {png}."""
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = Path(__file__).resolve().parent
data = np.genfromtxt(here / "{csv}", delimiter=",", names=True)
'''

_PLOT_FOOTER = '''
fig.tight_layout()
fig.savefig(here / "{png}", dpi=120)
if "--show" in sys.argv:
    plt.show()
'''


def emit_plots(out_dir) -> list[Path]:
    """Write one standalone matplotlib script per recognised CSV in ``out_dir``."""
    out_dir = Path(out_dir)
    written = []
    for csv_name, (script, body) in _PLOT_SOURCES.items():
        if not (out_dir / csv_name).exists():
            continue
        png = Path(script).with_suffix(".png").name
        src = _PLOT_HEADER.format(csv=csv_name, png=png) + body + _PLOT_FOOTER.format(png=png)
        path = out_dir / script
        path.write_text(src)
        written.append(path)
    if not written:
        raise ConfigurationError(f"no run CSVs found in {out_dir}")
    return written


def cmd_plots(args, man: Manifest):
    man.data["config"] = {"out": str(args.out)}
    man.write()
    for p in emit_plots(args.out):
        man.add_output(p)


# driver


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="confined-nls", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def add(name, func, help_, config_required=True):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=config_required, help="YAML configuration file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.set_defaults(func=func)
        return sp

    sp = add("simulate", cmd_simulate, "Strang-split evolution with a diagnostics time series")
    sp.add_argument("--snapshots", action="store_true", help="save a field snapshot at every output row")
    add("eigen", cmd_eigen, "build and dump the confined eigenbasis")
    add("vectorfields", cmd_vectorfields, "commutation defect table over (j, t, tau)")
    add("scatter", cmd_scatter, "asymptotic state from a checkpoint ladder")
    add("waveop", cmd_waveop, "wave operator by Picard iteration on a time slab")
    sp = add("morawetz", cmd_morawetz, "Morawetz action and decay fit over a saved run", config_required=False)
    sp.add_argument("--run", required=True, help="directory of a simulate run with snapshots")
    sp = add("inequalities", cmd_inequalities, "embedding ratios over a seeded ensemble", config_required=False)
    sp.add_argument("--check", required=True, choices=sorted(_CHECKS))
    sp.add_argument("--ensemble", required=True, help="YAML ensemble description")
    sp.add_argument("--params", help="YAML exponent parameters")
    sp = sub.add_parser("plots", help="emit plotting scripts for the CSVs in a run directory")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plots)
    return p


def _thread_limit():
    n = os.environ.get(THREADS_ENV)
    if not n:
        return nullcontext()
    try:
        k = int(n)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {n!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=k)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    out = Path(args.out)
    man = Manifest(out, args.subcommand, argv)
    code, status = EXIT_OK, "ok"
    with warnings.catch_warnings(record=True) as captured:
        warnings.simplefilter("always")
        try:
            man.write()
            with _thread_limit():
                args.func(args, man)
        except ConfigurationError as exc:
            code, status = EXIT_CONFIG, "config_error"
            man.data["errors"].append({"type": type(exc).__name__, "message": str(exc)})
        except (NumericalError, InequalityViolation, FloatingPointError) as exc:
            code, status = EXIT_NUMERIC, "numerical_error"
            err = {"type": type(exc).__name__, "message": str(exc)}
            if hasattr(exc, "residuals"):
                err["residuals"] = list(exc.residuals)
                err["reason"] = exc.reason
            man.data["errors"].append(err)
        except OSError as exc:
            code, status = EXIT_CONFIG, "config_error"
            man.data["errors"].append({"type": type(exc).__name__, "message": str(exc)})
        man.finalize(status, captured)
    for w in man.data["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    if man.data["errors"]:
        print(json.dumps({"errors": man.data["errors"]}), file=sys.stderr)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
