"""Command-line front door.

Loads a scenario file (or a shipped scenario by name), runs its
pipeline, and writes CSV artifacts plus a manifest with the config hash,
seed, toolkit version, and per-file checksums. Exit codes: 0 success,
2 invalid config, 3 divergence mid-run (partial outputs retained and
flagged in the manifest), 4 analysis failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, protocols
from .analysis import (
    PairPeriodTwoFamily,
    bifurcation_scan,
    find_bifurcation,
    fixed_points_single,
    delayed_stability,
    sync_envelope_metrics,
)
from .maps import DelayGains, DivergenceError, MapParams
from .medium import NoiseModel, fit_decay_exponent
from .report import (
    write_battery_csv,
    write_curve_csv,
    write_detection_csv,
    write_diagram_csv,
    write_dispersion_csv,
    write_events_csv,
    write_kv_csv,
    write_series_csv,
    write_sync_csv,
    write_table_csv,
    write_trace_csv,
)
from .scenario_io import (
    ScenarioError,
    apply_overrides,
    build_scenario,
    dump_config,
    load_config,
    validate_config,
    write_manifest,
)
from .sim import (
    CalibrationError,
    CalibrationMedium,
    CouplingGains,
    DeviceSpec,
    SaturationError,
    ValidationError,
    calibrate_k1,
    run_event_driven,
    run_synchronous,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_ANALYSIS = 4

_RUN_COMMANDS = ("simulate", "scan", "analyze", "calibrate", "currentmode")


def shipped_scenarios():
    """(name, path) pairs for the scenario files installed with the package."""
    base = resources.files("fieldosc") / "scenarios"
    out = []
    for entry in sorted(base.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            out.append((entry.name[:-5], Path(str(entry))))
    return out


def resolve_scenario(token: str) -> Path:
    p = Path(token)
    if p.is_file():
        return p
    for name, path in shipped_scenarios():
        if name == token:
            return path
    raise ScenarioError(
        f"{token!r} is neither a scenario file nor a shipped scenario "
        "(see list-scenarios)"
    )


def _override_steps(cfg: dict, steps: int) -> dict:
    p = cfg["params"]
    pipe = cfg["pipeline"]
    battery_kinds = {"swarm_sync_battery", "ratio_curve", "discrimination"}
    if pipe == "simulate":
        p.pop("duration", None)
        p["steps"] = steps
    elif pipe == "analyze" and p.get("kind") in battery_kinds:
        p["steps"] = steps
    else:
        raise ScenarioError(f"--steps does not apply to this {pipe} scenario")
    return cfg


def _run_simulate(cfg: dict, out_dir: Path):
    scenario = build_scenario(cfg)
    engine = cfg["params"].get("engine", "synchronous")
    if engine == "event":
        trace = run_event_driven(scenario)
    else:
        trace = run_synchronous(scenario)
    write_trace_csv(trace, out_dir / "trace.csv")
    write_events_csv(trace.event_log, out_dir / "events.csv")
    outputs = ["trace.csv", "events.csv"]
    an = cfg["params"].get("analysis") or {}
    try:
        met = sync_envelope_metrics(
            trace,
            epsilon=an.get("sync_epsilon", 1e-3),
            window=an.get("envelope_window", 8),
        )
    except ValueError:
        met = None
    if met is not None:
        write_sync_csv(met, out_dir / "sync.csv")
        write_dispersion_csv(met, out_dir / "dispersion.csv")
        outputs += ["sync.csv", "dispersion.csv"]
    code = EXIT_DIVERGED if trace.diverged else EXIT_OK
    return code, outputs


def _run_scan(cfg: dict, out_dir: Path, workers: int):
    p = cfg["params"]
    init = p.get("initial") or {}
    policy = init.get("policy", "fixed")
    if policy == "fixed":
        ic = ("fixed", init.get("x0", 0.1))
    elif policy == "random":
        ic = ("random", init.get("lo", 0.0), init.get("hi", 0.1))
    elif policy == "continue":
        ic = ("continue",)
    else:
        raise ScenarioError(f"unknown initial policy {policy!r}")
    diag = bifurcation_scan(
        p["family"],
        tuple(p["range"]),
        p.get("grid", 400),
        transient=p.get("transient", 500),
        samples=p.get("samples", 64),
        initial_conditions=ic,
        seed=cfg["seed"],
        alpha=p.get("alpha", 3.1),
        k2=p.get("k2", 0.0),
        k3=p.get("k3", 0.0),
        k4=p.get("k4", 0.0),
        workers=workers,
    )
    write_diagram_csv(diag, out_dir / "diagram.csv")
    return ["diagram.csv"]


def _load_decay_table(name: str):
    base = resources.files("fieldosc") / "data" / name
    rows = []
    with base.open() as fh:
        next(fh)
        for line in fh:
            d, r = line.strip().split(",")
            rows.append((float(d), float(r)))
    return rows


def _run_analyze(cfg: dict, out_dir: Path, workers: int):
    p = cfg["params"]
    kind = p["kind"]
    seed = cfg["seed"]
    if kind == "fixed_points":
        lo, hi = p.get("alpha_range", (-1.5, 3.5))
        rows = []
        for a in np.linspace(lo, hi, p.get("grid", 400)):
            try:
                rep = fixed_points_single(MapParams(alpha=float(a)))
            except ValueError:
                continue
            for pt in rep.points:
                lam = complex(pt.eigenvalues[0])
                rows.append((float(a), float(pt.point[0]), lam.real,
                             lam.imag, pt.stable))
        write_table_csv(["alpha", "x", "eig_re", "eig_im", "stable"],
                        rows, out_dir / "stability.csv")
        return ["stability.csv"]
    if kind == "pair_bifurcations":
        alpha = p.get("alpha", 3.1)
        bp_pd = find_bifurcation(
            PairPeriodTwoFamily(alpha, "inphase"),
            tuple(p.get("neg_range", (-0.35, -0.05))),
            "k2", kind_hint="period_doubling",
        )
        bp_ns = find_bifurcation(
            PairPeriodTwoFamily(alpha, "antiphase"),
            tuple(p.get("pos_range", (0.05, 0.45))),
            "k2", kind_hint="neimark_sacker",
        )
        rows = [
            ("inphase", bp_pd.param, bp_pd.kind,
             bp_pd.eigenvalue.real, bp_pd.eigenvalue.imag),
            ("antiphase", bp_ns.param, bp_ns.kind,
             bp_ns.eigenvalue.real, bp_ns.eigenvalue.imag),
        ]
        write_table_csv(["branch", "k2", "kind", "eig_re", "eig_im"],
                        rows, out_dir / "bifurcations.csv")
        return ["bifurcations.csv"]
    if kind == "delayed_eigen":
        alpha = p.get("alpha", 3.1)
        k3_lo, k3_hi = p.get("k3_range", (-1.1, 0.3))
        k4_lo, k4_hi = p.get("k4_range", (-0.35, 0.35))
        n = p.get("grid", 29)
        rows = []
        for k3 in np.linspace(k3_lo, k3_hi, n):
            for k4 in np.linspace(k4_lo, k4_hi, n):
                rep = delayed_stability(
                    MapParams(alpha=alpha),
                    DelayGains(k3=float(k3), k4=float(k4)),
                )
                pt = rep.points[1]
                rho = float(np.abs(pt.eigenvalues).max())
                rows.append((float(k3), float(k4), float(pt.point[0]),
                             rho, pt.stable))
        write_table_csv(["k3", "k4", "x", "spectral_radius", "stable"],
                        rows, out_dir / "delayed_map.csv")
        return ["delayed_map.csv"]
    if kind == "swarm_sync_battery":
        res = protocols.run_swarm_battery(
            m=p.get("m", 10),
            e=p.get("e", -0.01),
            n_seeds=p.get("seeds", 50),
            steps=p.get("steps", 250),
            epsilon=p.get("sync_epsilon", 1e-2),
            mirror=p.get("mirror"),
            base_seed=seed,
            spread=p.get("spread", 3.0e-3),
        )
        write_battery_csv(res["rows"], out_dir / "battery.csv")
        write_kv_csv(
            [("median_sync", res["median_sync"]),
             ("p2_fraction", res["p2_fraction"]),
             ("p4_fraction", res["p4_fraction"])],
            out_dir / "summary.csv",
        )
        return ["battery.csv", "summary.csv"]
    if kind == "ratio_curve":
        curves = protocols.build_ratio_curves(
            m_lo=p.get("m_lo", 2), m_hi=p.get("m_hi", 15),
            e=p.get("e", -0.01), n_seeds=p.get("seeds", 100),
            steps=p.get("steps", 300),
            e_lo=p.get("e_lo", -0.013), e_hi=p.get("e_hi", -0.008),
            e_knots=p.get("e_knots", 11), m_fixed=p.get("m_fixed", 10),
            base_seed=seed,
        )
        write_curve_csv(curves.m_knots, curves.m_ratios,
                        out_dir / "curve_m.csv", "m")
        write_curve_csv(curves.e_knots, curves.e_ratios,
                        out_dir / "curve_e.csv", "e")
        return ["curve_m.csv", "curve_e.csv"]
    if kind == "discrimination":
        res = protocols.discrimination_battery(
            count=p.get("count", 200),
            m_lo=p.get("m_lo", 3), m_hi=p.get("m_hi", 10),
            e_lo=p.get("e_lo", -0.013), e_hi=p.get("e_hi", -0.008),
            steps=p.get("steps", 700),
            activate=p.get("activate", protocols.MIRROR_ACTIVATE),
            base_seed=seed,
        )
        rows = [(r["i"], r["m"], r["e"], r["truth"], r["got"])
                for r in res["results"]]
        write_table_csv(["scene", "m", "e", "truth", "classified"],
                        rows, out_dir / "discrimination.csv")
        write_kv_csv(
            [("accuracy", res["accuracy"]),
             ("mirror_as_swarm", res["mirror_as_swarm"])],
            out_dir / "summary.csv",
        )
        return ["discrimination.csv", "summary.csv"]
    if kind == "decay_fit":
        table = _load_decay_table(p.get("table", "decay_table.csv"))
        lo = p.get("fit_lo", 0.06)
        hi = p.get("fit_hi", 0.30)
        band = [(d, r) for d, r in table if lo <= d <= hi]
        dists = np.array([d for d, _ in band])
        resp = np.array([r for _, r in band])
        exponent = fit_decay_exponent(dists, resp)
        write_table_csv(["distance_m", "response"], table,
                        out_dir / "decay_table.csv")
        write_kv_csv(
            [("exponent", exponent), ("fit_lo", lo), ("fit_hi", hi),
             ("points_used", len(band))],
            out_dir / "decay_fit.csv",
        )
        return ["decay_table.csv", "decay_fit.csv"]
    raise ScenarioError(f"unknown analysis kind {kind!r}")


def _run_calibrate(cfg: dict, out_dir: Path):
    p = cfg["params"]
    noise = None
    if p.get("noise") is not None:
        nz = p["noise"]
        noise = NoiseModel(
            amplitude_pos=nz.get("amplitude_pos", 0.0),
            amplitude_neg=nz.get("amplitude_neg", 0.0),
            bias=nz.get("bias", 0.0),
            seed=nz.get("seed", cfg["seed"] + 7919),
        )
    medium = CalibrationMedium(
        gain_pos=p.get("gain_pos", 0.13),
        gain_neg=p.get("gain_neg", 0.03),
        noise=noise,
    )
    dev = DeviceSpec(
        role="oscillator",
        map=MapParams(alpha=p.get("alpha", 3.1)),
        gains=CouplingGains(),
        x0=p.get("x0", 0.1),
        k_dac=p.get("k_dac", 12000.0),
    )
    k1_pos, k1_neg = calibrate_k1(dev, medium, cycles=p.get("cycles", 1000))
    write_kv_csv(
        [("k1_pos", k1_pos), ("k1_neg", k1_neg),
         ("true_pos", medium.gain_pos), ("true_neg", medium.gain_neg),
         ("err_pos", k1_pos - medium.gain_pos),
         ("err_neg", k1_neg - medium.gain_neg)],
        out_dir / "calibration.csv",
    )
    return ["calibration.csv"]


def _run_currentmode(cfg: dict, out_dir: Path):
    res = protocols.currentmode_scene(cfg["params"], cfg["seed"])
    write_series_csv(res["times"], res["series"], out_dir / "series.csv")
    write_series_csv(res["rms"].times, res["rms"].values, out_dir / "rms.csv")
    write_detection_csv(res["detection"], out_dir / "detection.csv")
    write_kv_csv(
        [("classification", res["detection"].classification),
         ("rms_step", res["detection"].rms_step),
         ("bin_hz", res["detection"].bin_hz)],
        out_dir / "classification.csv",
    )
    return ["series.csv", "rms.csv", "detection.csv", "classification.csv"]


def run_scenario(path, overrides=(), out_root=None, seed=None, steps=None,
                 workers: int = 1, expect_pipeline: str | None = None):
    """Execute one scenario file; returns (exit_code, output_directory)."""
    cfg = load_config(path)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    if seed is not None:
        cfg["seed"] = int(seed)
    if steps is not None:
        cfg = _override_steps(cfg, int(steps))
    validate_config(cfg)
    if expect_pipeline and cfg["pipeline"] != expect_pipeline:
        raise ScenarioError(
            f"scenario {cfg['name']!r} belongs to the {cfg['pipeline']!r} "
            f"pipeline, not {expect_pipeline!r}"
        )
    root = Path(out_root or os.environ.get("FIELDOSC_OUT", "out"))
    out_dir = root / cfg.get("out_dir", cfg["name"])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(dump_config(cfg))

    code = EXIT_OK
    pipe = cfg["pipeline"]
    if pipe == "simulate":
        code, more = _run_simulate(cfg, out_dir)
    elif pipe == "scan":
        more = _run_scan(cfg, out_dir, workers)
    elif pipe == "analyze":
        more = _run_analyze(cfg, out_dir, workers)
    elif pipe == "calibrate":
        more = _run_calibrate(cfg, out_dir)
    else:
        more = _run_currentmode(cfg, out_dir)

    flags = ["diverged"] if code == EXIT_DIVERGED else []
    write_manifest(out_dir, cfg, ["config.json"] + more, flags)
    return code, out_dir


def _list_scenarios() -> int:
    rows = []
    for name, path in shipped_scenarios():
        cfg = load_config(path)
        rows.append((name, cfg["pipeline"], cfg.get("figure", ""),
                     cfg.get("description", "")))
    width = max((len(r[0]) for r in rows), default=4)
    pwidth = max((len(r[1]) for r in rows), default=8)
    for name, pipe, fig, desc in rows:
        print(f"{name:<{width}}  {pipe:<{pwidth}}  {fig:<8}  {desc}")
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="fieldosc",
        description="Coupled-oscillator field toolkit: scenario runner.",
    )
    ap.add_argument("--version", action="version",
                    version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _RUN_COMMANDS:
        sp = sub.add_parser(name, help=f"run a {name} scenario")
        sp.add_argument("scenario",
                        help="path to a scenario file, or a shipped name")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--steps", type=int,
                        help="override the step count where applicable")
        sp.add_argument("--out", help="output root (default $FIELDOSC_OUT or ./out)")
        sp.add_argument("--set", dest="overrides", action="append",
                        default=[], metavar="KEY=VALUE",
                        help="dotted-path config override, repeatable")
        sp.add_argument("--workers", type=int, default=1,
                        help="worker threads for grid scans")
    sub.add_parser("list-scenarios", help="list shipped scenarios")
    args = ap.parse_args(argv)

    if args.command == "list-scenarios":
        return _list_scenarios()

    try:
        path = resolve_scenario(args.scenario)
        code, out_dir = run_scenario(
            path,
            overrides=args.overrides,
            out_root=args.out,
            seed=args.seed,
            steps=args.steps,
            workers=args.workers,
            expect_pipeline=args.command,
        )
    except (ScenarioError, ValidationError, SaturationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"error: trajectory diverged ({exc})", file=sys.stderr)
        return EXIT_DIVERGED
    except (CalibrationError, ValueError) as exc:
        print(f"error: analysis failed ({exc})", file=sys.stderr)
        return EXIT_ANALYSIS
    if code == EXIT_DIVERGED:
        print(f"warning: diverged; truncated outputs in {out_dir}",
              file=sys.stderr)
    else:
        print(f"wrote {out_dir}")
    return code


if __name__ == "__main__":
    sys.exit(main())
