"""Bit-stable CSV emitters.

Fixed column orders, floats at full round-trip precision (17 significant
digits), LF line endings. The same object always serializes to the same
bytes.
"""

from __future__ import annotations

import csv

import numpy as np


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_trace_csv(trace, path):
    """Rows step-major across devices; a TRUNCATED marker row closes a
    trace that diverged."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["step", "time_s", "device_id", "x", "xi_o", "xi_w"])
        n = max((len(d.steps) for d in trace.devices), default=0)
        for k in range(n):
            for d in trace.devices:
                if k < len(d.steps):
                    w.writerow([
                        int(d.steps[k]), fmt(d.times[k]), d.device_id,
                        fmt(d.x[k]), fmt(d.xi_o[k]), fmt(d.xi_w[k]),
                    ])
        if trace.diverged:
            w.writerow([trace.diverged_step, "", "TRUNCATED", "", "", ""])


def write_events_csv(event_log, path):
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["time_s", "device_id", "event"])
        for t, dev, ev in event_log:
            w.writerow([fmt(t), dev, ev])


def write_sync_csv(metrics, path):
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["metric", "value"])
        w.writerow(["synchronized", fmt(metrics.synchronized)])
        w.writerow(["time_to_sync", "" if metrics.time_to_sync is None
                    else metrics.time_to_sync])
        w.writerow(["envelope_max", fmt(metrics.envelope_max)])
        w.writerow(["envelope_min", fmt(metrics.envelope_min)])
        w.writerow(["beat_period_s", fmt(metrics.beat_period_s)])
        w.writerow(["ratio", fmt(metrics.ratio)])


def write_dispersion_csv(metrics, path):
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["step", "dispersion"])
        for i, v in enumerate(metrics.dispersion):
            w.writerow([i, fmt(v)])


def write_fixed_points_csv(report, path):
    """One row per point: coordinates, eigenvalues split re/im, flags."""
    dim = max((len(p.point) for p in report.points), default=1)
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        head = [f"x{i}" for i in range(dim)]
        head += [f"eig{i}_{p}" for i in range(dim) for p in ("re", "im")]
        head += ["stable", "residual"]
        w.writerow(head)
        for p in report.points:
            row = [fmt(c) for c in p.point]
            row += [""] * (dim - len(p.point))
            for i in range(dim):
                if i < len(p.eigenvalues):
                    lam = complex(p.eigenvalues[i])
                    row += [fmt(lam.real), fmt(lam.imag)]
                else:
                    row += ["", ""]
            row += [fmt(p.stable), fmt(report.residual)]
            w.writerow(row)


def write_diagram_csv(diag, path):
    """Flat (param, sample) scatter, plus a divergence flag per row set."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["param", "sample", "diverged"])
        for i, v in enumerate(diag.values):
            flag = fmt(bool(diag.diverged[i]))
            if len(diag.samples[i]) == 0:
                w.writerow([fmt(v), "", flag])
            for s in diag.samples[i]:
                w.writerow([fmt(v), fmt(s), flag])


def write_battery_csv(rows, path):
    """Per-seed battery outcomes: seed, sync time, period kind."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["seed", "synchronized", "time_to_sync", "period"])
        for r in rows:
            w.writerow([
                r["seed"], fmt(r["synchronized"]),
                "" if r["time_to_sync"] is None else r["time_to_sync"],
                r["period"],
            ])


def write_curve_csv(knots, ratios, path, knot_name="m"):
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow([knot_name, "ratio"])
        for k, r in zip(knots, ratios):
            w.writerow([fmt(k), fmt(r)])


def write_series_csv(times, values, path):
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["time_s", "value"])
        for t, v in zip(times, values):
            w.writerow([fmt(t), fmt(v)])


def write_detection_csv(det, path):
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["freq_hz", "power", "label"])
        for f, a in det.components:
            w.writerow([fmt(f), fmt(a), "tone"])
        for f, a in det.beats:
            w.writerow([fmt(f), fmt(a), "beat"])


def write_table_csv(header, rows, path):
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def write_kv_csv(pairs, path):
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["key", "value"])
        for k, v in pairs:
            w.writerow([k, v if isinstance(v, str) else fmt(v)])
