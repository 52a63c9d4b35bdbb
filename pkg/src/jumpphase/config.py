"""JSON run-configuration parsing and validation.

A run config is a single JSON object with blocks ``model``, ``initial_state``,
``run`` and optionally ``output``.  Complex matrices are nested arrays of
[re, im] pairs; angles are radians, frequencies radians per unit time.
Validation failures raise ConfigError carrying the source line of the
offending key, so the CLI can print ``file:line: message`` and exit 2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .linalg import pairs_to_array
from .model import LindbladModel
from .spin import PRESETS, SpinHalfConfig, build_model, initial_state, preset

MODES = ("euler", "exact", "exact-segment")
SEED_MAX = 2 ** 64 - 1


class ConfigError(Exception):
    """Invalid run configuration, with an optional source line anchor."""

    def __init__(self, source: str, line, message: str):
        self.source = source
        self.line = line
        self.message = message
        super().__init__(str(self))

    def __str__(self) -> str:
        if self.line is None:
            return f"{self.source}: {self.message}"
        return f"{self.source}:{self.line}: {self.message}"


@dataclass(frozen=True)
class RunConfig:
    """Fully validated simulation request."""

    model: LindbladModel
    psi0: np.ndarray
    spin: SpinHalfConfig | None
    total_time: float
    n_steps: int
    mode: str
    seed: int
    n_trajectories: int
    snapshot_times: tuple
    prescribed_jumps: tuple | None
    out_format: str
    out_dir: str | None

    @property
    def dt(self) -> float:
        return self.total_time / self.n_steps


def _line_of(text: str, key: str):
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def load_run_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_run_config(text, source=str(path))


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(source, exc.lineno, f"invalid JSON: {exc.msg}") from exc

    def fail(key, message):
        raise ConfigError(source, _line_of(text, key) if key else None, message)

    if not isinstance(raw, dict):
        fail(None, "top-level value must be a JSON object")
    known = {"model", "initial_state", "run", "output"}
    for key in raw:
        if key not in known:
            fail(key, f"unknown top-level section {key!r}")
    for key in ("model", "initial_state", "run"):
        if key not in raw:
            fail(None, f"missing required section {key!r}")

    model_raw = raw["model"]
    if not isinstance(model_raw, dict):
        fail("model", "model section must be an object")
    has_preset = "preset" in model_raw
    has_explicit = "hamiltonian" in model_raw
    if has_preset == has_explicit:
        fail("model", "model must contain exactly one of 'preset' or 'hamiltonian'")

    init_raw = raw["initial_state"]
    if not isinstance(init_raw, dict):
        fail("initial_state", "initial_state section must be an object")
    has_angles = "theta" in init_raw
    has_amps = "amplitudes" in init_raw
    if has_angles == has_amps:
        fail("initial_state", "initial_state must contain exactly one of 'theta' or 'amplitudes'")

    spin = None
    if has_preset:
        name = model_raw["preset"]
        if not isinstance(name, str) or name not in PRESETS:
            fail("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
        overrides = {}
        allowed = {"omega", "lambda_dephase", "alpha_decay", "flip_axis", "flip_strength"}
        for key, value in model_raw.items():
            if key == "preset":
                continue
            if key not in allowed:
                fail(key, f"unknown model parameter {key!r}")
            overrides[key] = tuple(value) if key == "flip_axis" else value
        if has_angles:
            overrides["theta"] = init_raw["theta"]
            overrides["phi"] = init_raw.get("phi", 0.0)
            extra = set(init_raw) - {"theta", "phi"}
            if extra:
                fail(sorted(extra)[0], f"unknown initial_state key {sorted(extra)[0]!r}")
        try:
            spin = preset(name, **overrides)
        except (ValueError, TypeError) as exc:
            fail("model", f"invalid preset parameters: {exc}")
        model = build_model(spin)
    else:
        for key in ("dimension", "hamiltonian", "jump_operators"):
            if key not in model_raw:
                fail("model", f"explicit model requires {key!r}")
        extra = set(model_raw) - {"dimension", "hamiltonian", "jump_operators", "labels"}
        if extra:
            fail(sorted(extra)[0], f"unknown model key {sorted(extra)[0]!r}")
        dim = model_raw["dimension"]
        if not isinstance(dim, int) or dim < 1:
            fail("dimension", "dimension must be a positive integer")
        try:
            hmat = pairs_to_array(model_raw["hamiltonian"])
        except (ValueError, TypeError) as exc:
            fail("hamiltonian", f"cannot parse hamiltonian: {exc}")
        if hmat.shape != (dim, dim):
            fail("hamiltonian", f"hamiltonian shape {hmat.shape} does not match dimension {dim}")
        ops = []
        for k, entry in enumerate(model_raw["jump_operators"]):
            try:
                op = pairs_to_array(entry)
            except (ValueError, TypeError) as exc:
                fail("jump_operators", f"cannot parse jump operator {k + 1}: {exc}")
            if op.shape != (dim, dim):
                fail("jump_operators",
                     f"jump operator {k + 1} shape {op.shape} does not match dimension {dim}")
            ops.append(op)
        labels = model_raw.get("labels")
        if labels is not None:
            if (not isinstance(labels, list) or len(labels) != len(ops)
                    or not all(isinstance(s, str) for s in labels)):
                fail("labels", "labels must be one string per jump operator")
            labels = tuple(labels)
        try:
            model = LindbladModel(hamiltonian=hmat, jump_ops=tuple(ops), labels=labels)
        except ValueError as exc:
            fail("hamiltonian", str(exc))
        if has_angles and dim != 2:
            fail("theta", "theta/phi initial state requires a 2-level model")

    if has_amps:
        try:
            psi0 = pairs_to_array(init_raw["amplitudes"])
        except (ValueError, TypeError) as exc:
            fail("amplitudes", f"cannot parse amplitudes: {exc}")
        if psi0.ndim != 1 or len(psi0) != model.dim:
            fail("amplitudes", f"amplitudes must be a length-{model.dim} vector")
        nrm = np.linalg.norm(psi0)
        if abs(nrm - 1.0) > 1e-6:
            fail("amplitudes", f"amplitudes have norm {nrm:.6g}, expected 1")
        psi0 = psi0 / nrm
        extra = set(init_raw) - {"amplitudes"}
        if extra:
            fail(sorted(extra)[0], f"unknown initial_state key {sorted(extra)[0]!r}")
    elif spin is not None:
        psi0 = initial_state(spin)
    else:
        # unreachable: explicit model + angles was rejected above for dim != 2
        theta = float(init_raw["theta"])
        phi = float(init_raw.get("phi", 0.0))
        psi0 = np.array([np.cos(0.5 * theta), np.exp(1j * phi) * np.sin(0.5 * theta)])

    run_raw = raw["run"]
    if not isinstance(run_raw, dict):
        fail("run", "run section must be an object")
    known_run = {"total_time", "n_steps", "mode", "seed", "n_trajectories",
                 "snapshot_times", "prescribed_jumps"}
    extra = set(run_raw) - known_run
    if extra:
        fail(sorted(extra)[0], f"unknown run key {sorted(extra)[0]!r}")
    if "total_time" not in run_raw:
        fail("run", "run section requires 'total_time'")
    total_time = run_raw["total_time"]
    if not isinstance(total_time, (int, float)) or not total_time > 0:
        fail("total_time", "total_time must be a positive number")
    total_time = float(total_time)
    n_steps = run_raw.get("n_steps", 1000)
    if not isinstance(n_steps, int) or n_steps < 1:
        fail("n_steps", "n_steps must be an integer >= 1")
    mode = run_raw.get("mode", "exact")
    if mode not in MODES:
        fail("mode", f"mode must be one of {', '.join(MODES)}")
    seed = run_raw.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed <= SEED_MAX:
        fail("seed", "seed must be an unsigned 64-bit integer")
    n_traj = run_raw.get("n_trajectories", 1)
    if not isinstance(n_traj, int) or n_traj < 1:
        fail("n_trajectories", "n_trajectories must be an integer >= 1")

    dt = total_time / n_steps
    snapshot_times = run_raw.get("snapshot_times", [])
    if not isinstance(snapshot_times, list):
        fail("snapshot_times", "snapshot_times must be an array of times")
    snaps = []
    for t in snapshot_times:
        if not isinstance(t, (int, float)) or not 0.0 <= t <= total_time * (1 + 1e-12):
            fail("snapshot_times", f"snapshot time {t!r} outside [0, total_time]")
        steps = t / dt
        if abs(steps - round(steps)) > 1e-9 * n_steps:
            fail("snapshot_times",
                 f"snapshot time {t!r} does not sit on the dt = total_time/n_steps grid")
        snaps.append(float(t))
    if any(b <= a for a, b in zip(snaps, snaps[1:])):
        fail("snapshot_times", "snapshot_times must be strictly increasing")

    jumps_raw = run_raw.get("prescribed_jumps")
    jumps = None
    if jumps_raw is not None:
        if not isinstance(jumps_raw, list):
            fail("prescribed_jumps", "prescribed_jumps must be an array of [time, channel] pairs")
        jumps = []
        prev = -1.0
        for entry in jumps_raw:
            if (not isinstance(entry, list) or len(entry) != 2
                    or not isinstance(entry[0], (int, float)) or not isinstance(entry[1], int)):
                fail("prescribed_jumps", f"bad prescribed jump entry {entry!r}")
            t, ch = float(entry[0]), entry[1]
            if not (prev < t and 0.0 <= t <= total_time):
                fail("prescribed_jumps",
                     f"jump time {t} must be strictly increasing within [0, total_time]")
            if not 1 <= ch <= model.n_channels:
                fail("prescribed_jumps",
                     f"jump channel {ch} outside 1..{model.n_channels}")
            jumps.append((t, ch))
            prev = t
        jumps = tuple(jumps)

    out_format = "csv"
    out_dir = None
    if "output" in raw:
        out_raw = raw["output"]
        if not isinstance(out_raw, dict):
            fail("output", "output section must be an object")
        extra = set(out_raw) - {"format", "dir", "paths"}
        if extra:
            fail(sorted(extra)[0], f"unknown output key {sorted(extra)[0]!r}")
        out_format = out_raw.get("format", "csv")
        if out_format not in ("csv", "json"):
            fail("format", "output format must be 'csv' or 'json'")
        out_dir = out_raw.get("dir", out_raw.get("paths"))
        if out_dir is not None and not isinstance(out_dir, str):
            fail("dir", "output directory must be a string")

    return RunConfig(model=model, psi0=psi0, spin=spin, total_time=total_time,
                     n_steps=n_steps, mode=mode, seed=seed, n_trajectories=n_traj,
                     snapshot_times=tuple(snaps), prescribed_jumps=jumps,
                     out_format=out_format, out_dir=out_dir)
