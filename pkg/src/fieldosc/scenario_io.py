"""Scenario files, validation, and run manifests.

Scenarios are JSON documents selecting one pipeline and its parameters.
Validation rejects unknown keys at every nesting level, so typos fail
loudly instead of silently falling back to defaults. Parse, serialize,
parse is the identity on the data.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .maps import CouplingGains, DelayGains, MapParams
from .medium import DipolePose, NoiseModel, SensingChain
from .sim import CouplingSpec, DeviceSpec, Scenario

PIPELINES = ("simulate", "scan", "analyze", "calibrate", "currentmode")


class ScenarioError(ValueError):
    pass


_DEVICE_KEYS = {
    "role", "alpha", "k1_pos", "k1_neg", "k2", "x0", "clock_period",
    "clock_skew", "pulse_duration", "k_dac", "start_step", "stop_step",
    "mirror",
}
_MIRROR_KEYS = {"gamma", "gain", "invert", "sense_weight"}
_COUPLING_KEYS = {
    "kind", "e", "spread", "include_self", "matrix", "poses",
    "decay_exponent", "ref_gain",
}
_POSE_KEYS = {"position", "orientation", "dipole_length"}
_NOISE_KEYS = {"amplitude_pos", "amplitude_neg", "bias", "seed"}
_CHAIN_KEYS = {"gain", "highpass_cutoff"}
_ANALYSIS_KEYS = {"sync_epsilon", "envelope_window", "period_tol", "dac_k"}
_SIM_KEYS = {
    "engine", "steps", "duration", "devices", "coupling", "noise", "chain",
    "analysis",
}
_SCAN_KEYS = {
    "family", "range", "grid", "transient", "samples", "initial",
    "alpha", "k2", "k3", "k4",
}
_INITIAL_KEYS = {"policy", "x0", "lo", "hi"}
_ANALYZE_KINDS = {
    "fixed_points": {"kind", "alpha_range", "grid"},
    "pair_bifurcations": {"kind", "alpha", "neg_range", "pos_range"},
    "delayed_eigen": {"kind", "alpha", "k3_range", "k4_range", "grid"},
    "swarm_sync_battery": {
        "kind", "m", "e", "spread", "seeds", "steps", "sync_epsilon", "mirror",
    },
    "battery_mirror": {"gamma", "gain", "sense_weight", "start_step"},
    "ratio_curve": {
        "kind", "m_lo", "m_hi", "e", "seeds", "steps", "e_lo", "e_hi",
        "e_knots", "m_fixed",
    },
    "discrimination": {"kind", "count", "m_lo", "m_hi", "e_lo", "e_hi",
                       "steps", "activate"},
    "decay_fit": {"kind", "table", "fit_lo", "fit_hi"},
}
_CALIBRATE_KEYS = {
    "gain_pos", "gain_neg", "cycles", "noise", "alpha", "x0", "k_dac",
}
_CM_KEYS = {
    "sensor", "peers", "objects", "duration", "fs", "decay_exponent",
    "ref_gain", "dipole_length",
}
_CM_SENSOR_KEYS = {"frequency", "amplitude"}
_CM_PEER_KEYS = {"frequency", "amplitude", "distance", "angle_deg", "on_at"}
_CM_OBJECT_KEYS = {"kind", "position", "strength", "reach", "on_at"}
_TOP_KEYS = {"name", "description", "figure", "pipeline", "seed", "params",
             "out_dir"}


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ScenarioError(f"{path}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError(f"{path}: unknown key(s) {sorted(unknown)}")


def validate_config(cfg: dict) -> None:
    _check_keys(cfg, _TOP_KEYS, "scenario")
    for req in ("name", "pipeline", "seed", "params"):
        if req not in cfg:
            raise ScenarioError(f"scenario: missing required key {req!r}")
    if cfg["pipeline"] not in PIPELINES:
        raise ScenarioError(f"scenario: unknown pipeline {cfg['pipeline']!r}")
    if not isinstance(cfg["seed"], int):
        raise ScenarioError("scenario: seed must be an integer")
    p = cfg["params"]
    pipe = cfg["pipeline"]
    if pipe == "simulate":
        _check_keys(p, _SIM_KEYS, "params")
        if "devices" not in p or not isinstance(p["devices"], list):
            raise ScenarioError("params: simulate needs a devices list")
        if not p["devices"]:
            raise ScenarioError("params: devices list is empty")
        for i, d in enumerate(p["devices"]):
            _check_keys(d, _DEVICE_KEYS, f"params.devices[{i}]")
            if d.get("mirror") is not None:
                _check_keys(d["mirror"], _MIRROR_KEYS, f"params.devices[{i}].mirror")
        if "coupling" in p and p["coupling"] is not None:
            _check_keys(p["coupling"], _COUPLING_KEYS, "params.coupling")
            for j, pose in enumerate(p["coupling"].get("poses") or []):
                _check_keys(pose, _POSE_KEYS, f"params.coupling.poses[{j}]")
        if p.get("noise") is not None:
            _check_keys(p["noise"], _NOISE_KEYS, "params.noise")
        if p.get("chain") is not None:
            _check_keys(p["chain"], _CHAIN_KEYS, "params.chain")
        if p.get("analysis") is not None:
            _check_keys(p["analysis"], _ANALYSIS_KEYS, "params.analysis")
    elif pipe == "scan":
        _check_keys(p, _SCAN_KEYS, "params")
        if p.get("initial") is not None:
            _check_keys(p["initial"], _INITIAL_KEYS, "params.initial")
    elif pipe == "analyze":
        kind = p.get("kind")
        if kind not in _ANALYZE_KINDS or kind == "battery_mirror":
            raise ScenarioError(f"params: unknown analysis kind {kind!r}")
        _check_keys(p, _ANALYZE_KINDS[kind], "params")
        if kind == "swarm_sync_battery" and p.get("mirror") is not None:
            _check_keys(p["mirror"], _ANALYZE_KINDS["battery_mirror"], "params.mirror")
    elif pipe == "calibrate":
        _check_keys(p, _CALIBRATE_KEYS, "params")
        if p.get("noise") is not None:
            _check_keys(p["noise"], _NOISE_KEYS, "params.noise")
    elif pipe == "currentmode":
        _check_keys(p, _CM_KEYS, "params")
        if "sensor" in p:
            _check_keys(p["sensor"], _CM_SENSOR_KEYS, "params.sensor")
        for i, peer in enumerate(p.get("peers") or []):
            _check_keys(peer, _CM_PEER_KEYS, f"params.peers[{i}]")
        for i, ob in enumerate(p.get("objects") or []):
            _check_keys(ob, _CM_OBJECT_KEYS, f"params.objects[{i}]")


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    validate_config(cfg)
    return cfg


def dump_config(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply key=value overrides using dotted paths into the config.

    Values parse as JSON when possible, else stay strings. List indices
    are plain integers in the path (devices.0.x0=0.2).
    """
    cfg = json.loads(json.dumps(cfg))
    for item in overrides or []:
        if "=" not in item:
            raise ScenarioError(f"override {item!r} is not key=value")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        node = cfg
        for p in parts[:-1]:
            if isinstance(node, list):
                node = node[int(p)]
            elif p in node:
                node = node[p]
            else:
                raise ScenarioError(f"override path {key!r}: no key {p!r}")
        last = parts[-1]
        if isinstance(node, list):
            node[int(last)] = value
        else:
            node[last] = value
    validate_config(cfg)
    return cfg


def build_scenario(cfg: dict) -> Scenario:
    """Materialize a simulate-pipeline config into engine objects."""
    p = cfg["params"]
    devices = []
    for d in p["devices"]:
        mirror = d.get("mirror")
        spec = DeviceSpec(
            role=d.get("role", "oscillator"),
            map=MapParams(alpha=d.get("alpha", 3.1)),
            gains=CouplingGains(
                k1_pos=d.get("k1_pos", 0.0),
                k1_neg=d.get("k1_neg", 0.0),
                k2=d.get("k2", 0.0),
            ),
            delay=DelayGains(gamma=mirror["gamma"]) if mirror else None,
            x0=d.get("x0", 0.1),
            clock_period=d.get("clock_period", 0.002),
            clock_skew=d.get("clock_skew", 0.0),
            pulse_duration=d.get("pulse_duration"),
            k_dac=d.get("k_dac", 12000.0),
            start_step=d.get("start_step", 0),
            stop_step=d.get("stop_step"),
        )
        if mirror:
            spec.mirror_gain = mirror.get("gain", 1.0)
            spec.mirror_invert = mirror.get("invert", False)
            spec.mirror_sense_weight = mirror.get("sense_weight")
        devices.append(spec)

    cspec = CouplingSpec()
    c = p.get("coupling")
    if c is not None:
        cspec = CouplingSpec(
            kind=c.get("kind", "sampled"),
            e=c.get("e", -0.01),
            spread=c.get("spread", 3.0e-3),
            include_self=c.get("include_self", False),
            poses=[
                DipolePose(
                    position=tuple(q["position"]),
                    orientation=tuple(q.get("orientation", (0.0, 0.0, 1.0))),
                    dipole_length=q.get("dipole_length", 0.05),
                )
                for q in c["poses"]
            ] if c.get("poses") else None,
            decay_exponent=c.get("decay_exponent", 2.2),
            ref_gain=c.get("ref_gain", 1.0),
            matrix=c.get("matrix"),
        )

    noise = None
    if p.get("noise") is not None:
        nz = p["noise"]
        noise = NoiseModel(
            amplitude_pos=nz.get("amplitude_pos", 0.0),
            amplitude_neg=nz.get("amplitude_neg", 0.0),
            bias=nz.get("bias", 0.0),
            seed=nz.get("seed", cfg["seed"] + 7919),
        )
    chain = None
    if p.get("chain") is not None:
        ch = p["chain"]
        dt = devices[0].clock_period if devices else 0.002
        chain = SensingChain(
            gain=ch.get("gain", 1.0),
            highpass_cutoff=ch.get("highpass_cutoff"),
            dt=dt if ch.get("highpass_cutoff") else None,
        )

    return Scenario(
        devices=devices,
        coupling=cspec,
        noise=noise,
        chain=chain,
        steps=p.get("steps"),
        duration=p.get("duration"),
        seed=cfg["seed"],
    )


@dataclass
class RunManifest:
    config_sha256: str
    seed: int
    version: str
    outputs: dict
    flags: list

    def to_json(self) -> str:
        doc = {
            "config_sha256": self.config_sha256,
            "seed": self.seed,
            "version": self.version,
            "outputs": self.outputs,
            "flags": self.flags,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, cfg: dict, output_names, flags=None) -> RunManifest:
    from . import __version__

    outputs = {}
    for name in sorted(output_names):
        outputs[name] = file_sha256(out_dir / name)
    man = RunManifest(
        config_sha256=config_hash(cfg),
        seed=cfg["seed"],
        version=__version__,
        outputs=outputs,
        flags=list(flags or []),
    )
    (out_dir / "manifest.json").write_text(man.to_json())
    return man
