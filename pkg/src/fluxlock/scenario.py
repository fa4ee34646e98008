"""Scenario files: parse, run, export.

A scenario is a sectioned key-value document that wires lasers through
splitters, delays and locks, and names the analyses to run on the result.
The runner executes generation, topology, control, detection and analysis
in that order, seeds every element from its name alone, and produces a
:class:`RunResult` whose exports (``traces.csv``, ``psd.csv``,
``reports.json``, ``manifest.json``) are byte-identical across re-runs
with the same seed.

Parsing never stops at the first problem: every validation error is
collected, each with the line it came from and a remediation hint, and
the batch is raised as one :class:`ScenarioValidationError`.
"""

from __future__ import annotations

import io
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .analysis import (
    analytic_curve,
    coherence_metric,
    compare_psd,
    increment_psd,
    power_law_fit,
    welch_psd,
)
from .control import (
    FeedbackSpec,
    FeedforwardSpec,
    dual_lock,
    feedback_lock,
    feedforward_lock,
    unlock_and_coast,
)
from .core import (
    FieldTrace,
    FluxlockError,
    PhotocurrentTrace,
    RealTrace,
    ScenarioValidationError,
    SeedStream,
    TimeGrid,
)
from .detection import balanced_homodyne, error_signal, linearized_flux, photocurrent
from .laser import (
    LinearLaserSpec,
    PotentialLaserSpec,
    linearized_laser,
    nonlinear_laser,
    phasor_laser,
)
from .noise import vacuum_field
from .optics import beam_splitter, delay, phase_shift, time_gate

__all__ = [
    "ScenarioConfig",
    "RunResult",
    "parse_scenario",
    "run",
    "export",
    "SCHEMA_VERSION",
    "DEFAULT_SEED",
]

SCHEMA_VERSION = "1"
DEFAULT_SEED = 0

_SINGLETON_SECTIONS = ("grid", "run")
_NAMED_SECTIONS = ("laser", "splitter", "delay", "gate", "shift", "control", "detect", "analysis")

# Known keys per section type; anything else is fatal, not ignored.
_KNOWN_KEYS = {
    "grid": {"dt", "n", "t0"},
    "run": {"seed", "traces", "out"},
    "laser": {"kind", "amplitude", "drift_rate", "gain", "loss", "saturation", "noise_psd"},
    "splitter": {"inputs", "mixing_angle"},
    "delay": {"input", "lag"},
    "gate": {"input", "windows"},
    "shift": {"input", "phi"},
    "control": {
        "type", "master", "slave", "slaves", "mixing_angle", "gain", "gain_scale",
        "actuation", "actuator_limit", "unlock_time",
        "slave_amplitude", "slave_drift_rate", "loop_gain", "loop_delay",
        "filter_bandwidth", "lead_time",
    },
    "detect": {"type", "signal", "reference", "tap", "shift", "linearized"},
    "analysis": {
        "type", "signal", "signal_a", "signal_b", "segment_length", "overlap",
        "band", "window", "compare", "compare_params", "tolerance",
        "expected_exponent", "block_duration",
    },
}


# --------------------------------------------------------------------------
# raw document


@dataclass
class _Section:
    kind: str
    name: str | None
    line: int
    # key -> (raw value string, line number)
    entries: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return self.kind if self.name is None else f"{self.kind} {self.name}"


def _parse_document(text: str) -> tuple[list[_Section], list[str]]:
    """Split a scenario document into sections, preserving line numbers."""
    sections: list[_Section] = []
    errors: list[str] = []
    current: _Section | None = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append(f"line {ln}: section header {raw.strip()!r} is missing its closing bracket")
                current = None
                continue
            parts = line[1:-1].split()
            if len(parts) == 1 and parts[0] in _SINGLETON_SECTIONS:
                current = _Section(parts[0], None, ln)
            elif len(parts) == 2 and parts[0] in _NAMED_SECTIONS:
                current = _Section(parts[0], parts[1], ln)
            else:
                kinds = ", ".join(_SINGLETON_SECTIONS + _NAMED_SECTIONS)
                errors.append(
                    f"line {ln}: unknown section header {line!r}; expected one of [{kinds}]"
                    " with a name for everything except [grid] and [run]"
                )
                current = None
                continue
            sections.append(current)
            continue
        if "=" not in line:
            errors.append(f"line {ln}: expected 'key = value', got {raw.strip()!r}")
            continue
        if current is None:
            errors.append(f"line {ln}: 'key = value' outside any section; start with a [section] header")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key in current.entries:
            errors.append(
                f"line {ln}: duplicate key {key!r} in [{current.label}] (first set on line {current.entries[key][1]})"
            )
            continue
        current.entries[key] = (value, ln)
    return sections, errors


class _Collector:
    """Accumulates validation errors and reads typed values out of sections."""

    def __init__(self):
        self.errors: list[str] = []

    def error(self, section: _Section, key: str | None, message: str, hint: str = ""):
        line = section.entries[key][1] if key is not None and key in section.entries else section.line
        where = f"[{section.label}]" + (f" {key}" if key else "")
        self.errors.append(f"line {line}: {where}: {message}" + (f" ({hint})" if hint else ""))

    def take(self, section: _Section, key: str) -> str | None:
        if key not in section.entries:
            return None
        return section.entries[key][0]

    def require(self, section: _Section, key: str, hint: str = "") -> str | None:
        value = self.take(section, key)
        if value is None:
            self.error(section, None, f"missing required key {key!r}", hint or f"add '{key} = ...'")
        return value

    def _parse(self, section, key, raw, convert, describe):
        try:
            return convert(raw)
        except (TypeError, ValueError):
            self.error(section, key, f"cannot read {raw!r} as {describe}")
            return None

    def floatv(self, section, key, default=None, required=False, hint=""):
        raw = self.require(section, key, hint) if required else self.take(section, key)
        if raw is None:
            return default
        return self._parse(section, key, raw, float, "a number")

    def intv(self, section, key, default=None, required=False, hint=""):
        raw = self.require(section, key, hint) if required else self.take(section, key)
        if raw is None:
            return default

        def as_int(s):
            v = float(s)
            if v != int(v):
                raise ValueError
            return int(v)

        return self._parse(section, key, raw, as_int, "an integer")

    def boolv(self, section, key, default=False):
        raw = self.take(section, key)
        if raw is None:
            return default
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        self.error(section, key, f"cannot read {raw!r} as a boolean", "use true or false")
        return default

    def choice(self, section, key, options, default=None, required=False):
        raw = self.require(section, key) if required else self.take(section, key)
        if raw is None:
            return default
        if raw not in options:
            self.error(section, key, f"unknown value {raw!r}", f"choose from {', '.join(options)}")
            return default
        return raw

    def name_list(self, section, key, count=None, required=False):
        raw = self.require(section, key) if required else self.take(section, key)
        if raw is None:
            return None
        names = [p.strip() for p in raw.split(",") if p.strip()]
        if count is not None and len(names) != count:
            self.error(section, key, f"expected {count} comma-separated names, got {len(names)}")
            return None
        return names

    def float_list(self, section, key, count=None, required=False):
        raw = self.require(section, key) if required else self.take(section, key)
        if raw is None:
            return None
        try:
            values = [float(p) for p in raw.split(",")]
        except ValueError:
            self.error(section, key, f"cannot read {raw!r} as comma-separated numbers")
            return None
        if count is not None and len(values) != count:
            self.error(section, key, f"expected {count} numbers, got {len(values)}")
            return None
        return values

    def kv_pairs(self, section, key):
        """Parse 'a=1, b=2' into a dict of floats."""
        raw = self.take(section, key)
        if raw is None:
            return {}
        out = {}
        for item in raw.split(","):
            item = item.strip()
            if not item:
                continue
            if "=" not in item:
                self.error(section, key, f"expected 'name=value' pairs, got {item!r}")
                return {}
            k, v = (p.strip() for p in item.split("=", 1))
            try:
                out[k] = float(v)
            except ValueError:
                self.error(section, key, f"cannot read {v!r} as a number for parameter {k!r}")
                return {}
        return out

    def divisible(self, section, key, value, dt, what=None):
        """Check that a time is a non-negative multiple of the grid step."""
        if value is None or dt is None:
            return
        what = what or key
        steps = value / dt
        if value < 0 or abs(steps - round(steps)) > 1e-6 * max(1.0, abs(steps)):
            self.error(
                section, key,
                f"{what} {value!r} is not a non-negative multiple of the grid step dt={dt!r}",
                "pick an integer number of samples",
            )


# --------------------------------------------------------------------------
# validated configuration


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario: the grid, the element table, and run options.

    ``echo`` is the fully resolved configuration — every default the
    parser filled in appears there explicitly, so the manifest of a run
    records exactly what was executed, not just what was written down.
    """

    grid: TimeGrid
    elements: tuple
    seed: int
    traces: str | tuple
    out_dir: str
    echo: dict


def parse_scenario(text: str) -> ScenarioConfig:
    """Validate a scenario document, returning the config or every error.

    Unknown sections and keys are fatal; names must resolve; wiring must
    be acyclic; and every delay, gate edge, lock schedule time and loop
    delay must be a multiple of the grid step.  All problems are reported
    together in a :class:`ScenarioValidationError`.
    """
    sections, errors = _parse_document(text)
    col = _Collector()
    col.errors.extend(errors)

    # ---- uniqueness and unknown keys
    seen: dict[str, _Section] = {}
    for sec in sections:
        if sec.kind in _SINGLETON_SECTIONS:
            key = sec.kind
        else:
            key = sec.name or ""
            if sec.name is not None and not sec.name.replace("_", "").isalnum():
                col.error(sec, None, f"element name {sec.name!r} must be alphanumeric/underscore")
        if key in seen:
            col.error(sec, None, f"[{sec.label}] collides with the section on line {seen[key].line}",
                      "element names share one namespace; rename one of them")
        else:
            seen[key] = sec
        allowed = _KNOWN_KEYS[sec.kind]
        for k, (_, ln) in sec.entries.items():
            if k not in allowed:
                col.errors.append(
                    f"line {ln}: [{sec.label}]: unknown key {k!r}"
                    f" (known keys: {', '.join(sorted(allowed))})"
                )

    by_kind = {kind: [s for s in sections if s.kind == kind] for kind in _SINGLETON_SECTIONS + _NAMED_SECTIONS}

    # ---- grid
    grid = None
    if not by_kind["grid"]:
        col.errors.append("line 1: missing required [grid] section (add [grid] with dt and n)")
    else:
        gsec = by_kind["grid"][0]
        dt = col.floatv(gsec, "dt", required=True)
        n = col.intv(gsec, "n", required=True)
        t0 = col.floatv(gsec, "t0", default=0.0)
        if dt is not None and n is not None:
            try:
                grid = TimeGrid(dt=dt, n=n, t0=t0)
            except FluxlockError as exc:
                col.error(gsec, None, str(exc))
    dt = grid.dt if grid is not None else None

    echo: dict = {"grid": {"dt": grid.dt, "n": grid.n, "t0": grid.t0}} if grid else {}

    # ---- elements, stage by stage
    elements: list[tuple] = []
    signals: dict[str, str] = {}  # signal name -> producing element label

    def register(sec: _Section, names):
        for s in names:
            signals[s] = sec.label

    def check_ref(sec: _Section, key: str, ref: str, stage: str):
        if ref is not None and ref != "vacuum" and ref not in signals:
            col.error(sec, key, f"unknown signal {ref!r}",
                      f"signals available to a {stage} element: {', '.join(sorted(signals)) or 'none yet'}")

    for sec in by_kind["laser"]:
        kind = col.choice(sec, "kind", ("linear", "phasor", "potential"), default="linear")
        entry = {"kind": kind}
        if kind == "potential":
            spec = dict(
                gain=col.floatv(sec, "gain", required=True),
                loss=col.floatv(sec, "loss", required=True),
                saturation=col.floatv(sec, "saturation", required=True),
                noise_psd=col.floatv(sec, "noise_psd", required=True),
            )
            for k in ("amplitude", "drift_rate"):
                if col.take(sec, k) is not None:
                    col.error(sec, k, f"{k!r} belongs to linear/phasor lasers", "remove it")
            if None not in spec.values():
                try:
                    PotentialLaserSpec(**spec)
                except FluxlockError as exc:
                    col.error(sec, None, str(exc))
            entry.update(spec)
        else:
            spec = dict(
                mean_amplitude=col.floatv(sec, "amplitude", required=True),
                drift_rate=col.floatv(sec, "drift_rate", default=0.0),
            )
            for k in ("gain", "loss", "saturation", "noise_psd"):
                if col.take(sec, k) is not None:
                    col.error(sec, k, f"{k!r} belongs to potential lasers", "remove it")
            if None not in spec.values():
                try:
                    LinearLaserSpec(**spec)
                except FluxlockError as exc:
                    col.error(sec, None, str(exc))
            entry.update(amplitude=spec["mean_amplitude"], drift_rate=spec["drift_rate"])
        elements.append(("laser", sec.name, entry))
        register(sec, [sec.name])
        echo[sec.label] = entry

    # optics wiring can reference other optics, so collect first, then order
    optic_secs = [s for kind in ("splitter", "delay", "gate", "shift") for s in by_kind[kind]]
    optic_entries = {}
    optic_deps = {}
    for sec in optic_secs:
        entry: dict = {}
        deps: list[str] = []
        if sec.kind == "splitter":
            inputs = col.name_list(sec, "inputs", count=2, required=True)
            angle = col.floatv(sec, "mixing_angle", required=True)
            entry.update(inputs=tuple(inputs or ()), mixing_angle=angle)
            deps = [i for i in (inputs or ()) if i != "vacuum"]
        else:
            ref = col.require(sec, "input")
            entry["input"] = ref
            if ref is not None:
                deps = [ref]
            if sec.kind == "delay":
                lag = col.floatv(sec, "lag", required=True)
                entry["lag"] = lag
                col.divisible(sec, "lag", lag, dt)
            elif sec.kind == "gate":
                raw = col.require(sec, "windows", hint="add 'windows = t0:t1, t2:t3'")
                windows = []
                if raw is not None:
                    for token in raw.split(","):
                        token = token.strip()
                        if not token:
                            continue
                        parts = token.split(":")
                        try:
                            lo, hi = (float(p) for p in parts)
                        except ValueError:
                            col.error(sec, "windows", f"cannot read window {token!r}", "format is t0:t1")
                            windows = None
                            break
                        windows.append((lo, hi))
                        col.divisible(sec, "windows", lo, dt, what="window start")
                        col.divisible(sec, "windows", hi, dt, what="window stop")
                entry["windows"] = tuple(windows) if windows else ()
            else:  # shift
                entry["phi"] = col.floatv(sec, "phi", required=True)
        optic_entries[sec.name] = (sec, entry)
        optic_deps[sec.name] = deps

    # dependency order among optics; lasers are always available
    ordered: list[str] = []
    state: dict[str, int] = {}

    def visit(name: str, chain: tuple):
        if state.get(name) == 2 or name not in optic_entries:
            return
        if state.get(name) == 1:
            cycle = " -> ".join(chain + (name,))
            sec = optic_entries[name][0]
            col.error(sec, None, f"wiring cycle: {cycle}", "feedforward topologies must be acyclic")
            return
        state[name] = 1
        sec = optic_entries[name][0]
        for dep in optic_deps[name]:
            base = dep.split(".", 1)[0]
            visit(base, chain + (name,))
        state[name] = 2
        ordered.append(name)

    for name in optic_entries:
        visit(name, ())

    for name in ordered:
        sec, entry = optic_entries[name]
        outs = [f"{name}.a", f"{name}.b"] if sec.kind == "splitter" else [name]
        if sec.kind == "splitter":
            for ref in entry.get("inputs", ()):
                check_ref(sec, "inputs", ref, sec.kind)
        elif entry.get("input") is not None:
            check_ref(sec, "input", entry["input"], sec.kind)
        elements.append((sec.kind, name, entry))
        register(sec, outs)
        echo[sec.label] = dict(entry)

    for sec in by_kind["control"]:
        ctype = col.choice(sec, "type", ("feedforward", "dual_feedforward", "feedback"), required=True)
        if ctype is None:
            continue
        entry = {"type": ctype}
        master = col.require(sec, "master")
        check_ref(sec, "master", master, "control")
        entry["master"] = master
        angle = col.floatv(sec, "mixing_angle", required=True)
        entry["mixing_angle"] = angle
        outs: list[str] = []
        if ctype == "feedback":
            entry.update(
                slave_amplitude=col.floatv(sec, "slave_amplitude", required=True),
                slave_drift_rate=col.floatv(sec, "slave_drift_rate", default=0.0),
                loop_gain=col.floatv(sec, "loop_gain", required=True),
                loop_delay=col.floatv(sec, "loop_delay", required=True),
                filter_bandwidth=col.floatv(sec, "filter_bandwidth", required=True),
                lead_time=col.floatv(sec, "lead_time", default=0.0),
            )
            col.divisible(sec, "loop_delay", entry["loop_delay"], dt)
            col.divisible(sec, "lead_time", entry["lead_time"], dt)
            for k in ("slave", "slaves", "gain", "gain_scale", "actuation", "actuator_limit", "unlock_time"):
                if col.take(sec, k) is not None:
                    col.error(sec, k, f"{k!r} belongs to feedforward controls", "remove it")
            outs = [f"{sec.name}.out", f"{sec.name}.error", f"{sec.name}.correction", f"{sec.name}.phase"]
        else:
            entry.update(
                gain=col.floatv(sec, "gain"),
                gain_scale=col.floatv(sec, "gain_scale", default=1.0),
                actuation=col.choice(sec, "actuation", ("linearized", "rotation"), default="linearized"),
                actuator_limit=col.floatv(sec, "actuator_limit", default=math.inf),
                unlock_time=col.floatv(sec, "unlock_time"),
            )
            col.divisible(sec, "unlock_time", entry["unlock_time"], dt, what="unlock_time")
            for k in ("slave_amplitude", "slave_drift_rate", "loop_gain", "loop_delay", "filter_bandwidth", "lead_time"):
                if col.take(sec, k) is not None:
                    col.error(sec, k, f"{k!r} belongs to feedback controls", "remove it")
            if ctype == "feedforward":
                slave = col.require(sec, "slave")
                check_ref(sec, "slave", slave, "control")
                entry["slave"] = slave
                if col.take(sec, "slaves") is not None:
                    col.error(sec, "slaves", "feedforward takes a single 'slave'", "use type = dual_feedforward for two")
                outs = [f"{sec.name}.out", f"{sec.name}.error", f"{sec.name}.applied_phase"]
                if entry["unlock_time"] is not None:
                    outs.append(f"{sec.name}.coast")
            else:
                slaves = col.name_list(sec, "slaves", count=2, required=True)
                if slaves:
                    for s in slaves:
                        check_ref(sec, "slaves", s, "control")
                    entry["slaves"] = tuple(slaves)
                if col.take(sec, "slave") is not None:
                    col.error(sec, "slave", "dual_feedforward takes 'slaves = a, b'", "list both beams")
                outs = [f"{sec.name}.a", f"{sec.name}.b", f"{sec.name}.error_a", f"{sec.name}.error_b", f"{sec.name}.beat"]
                if entry["unlock_time"] is not None:
                    outs += [f"{sec.name}.coast_a", f"{sec.name}.coast_b"]
        elements.append(("control", sec.name, entry))
        register(sec, outs)
        echo[sec.label] = {k: v for k, v in entry.items()}

    for sec in by_kind["detect"]:
        dtype = col.choice(sec, "type", ("balanced_homodyne", "error_signal", "flux"), required=True)
        if dtype is None:
            continue
        entry = {"type": dtype}
        if dtype == "balanced_homodyne":
            sig = col.require(sec, "signal")
            ref = col.require(sec, "reference")
            check_ref(sec, "signal", sig, "detect")
            check_ref(sec, "reference", ref, "detect")
            entry.update(signal=sig, reference=ref, shift=col.floatv(sec, "shift", default=0.0))
        elif dtype == "error_signal":
            tap = col.require(sec, "tap")
            ref = col.require(sec, "reference")
            check_ref(sec, "tap", tap, "detect")
            check_ref(sec, "reference", ref, "detect")
            entry.update(tap=tap, reference=ref)
        else:
            sig = col.require(sec, "signal")
            check_ref(sec, "signal", sig, "detect")
            entry.update(signal=sig, linearized=col.boolv(sec, "linearized", default=False))
        elements.append(("detect", sec.name, entry))
        register(sec, [sec.name])
        echo[sec.label] = dict(entry)

    analysis_refs: set[str] = set()
    for sec in by_kind["analysis"]:
        atype = col.choice(sec, "type", ("psd", "increment_psd", "power_law", "variance", "coherence"), required=True)
        if atype is None:
            continue
        entry = {"type": atype}
        if atype == "coherence":
            a = col.require(sec, "signal_a")
            b = col.require(sec, "signal_b")
            check_ref(sec, "signal_a", a, "analysis")
            check_ref(sec, "signal_b", b, "analysis")
            block = col.floatv(sec, "block_duration", required=True)
            col.divisible(sec, "block_duration", block, dt)
            entry.update(signal_a=a, signal_b=b, block_duration=block,
                         window=tuple(col.float_list(sec, "window", count=2) or ()) or None)
            analysis_refs.update(x for x in (a, b) if x)
        else:
            sig = col.require(sec, "signal")
            check_ref(sec, "signal", sig, "analysis")
            entry["signal"] = sig
            if sig:
                analysis_refs.add(sig)
            entry["window"] = tuple(col.float_list(sec, "window", count=2) or ()) or None
            if atype in ("psd", "increment_psd", "power_law"):
                entry["segment_length"] = col.intv(sec, "segment_length", required=True)
                entry["overlap"] = col.floatv(sec, "overlap", default=0.5)
            if atype == "power_law":
                band = col.float_list(sec, "band", count=2, required=True)
                entry.update(band=tuple(band) if band else None,
                             expected_exponent=col.floatv(sec, "expected_exponent"),
                             tolerance=col.floatv(sec, "tolerance", default=0.05))
            elif atype in ("psd", "increment_psd"):
                band = col.float_list(sec, "band", count=2)
                entry["band"] = tuple(band) if band else None
                compare = col.take(sec, "compare")
                if compare is not None:
                    entry["compare"] = compare
                    entry["compare_params"] = col.kv_pairs(sec, "compare_params")
                    entry["tolerance"] = col.floatv(sec, "tolerance", required=True,
                                                    hint="a comparison needs 'tolerance = ...'")
                    if entry["band"] is None:
                        col.error(sec, None, "a comparison needs 'band = lo, hi'", "add the band to average over")
        elements.append(("analysis", sec.name, entry))
        echo[sec.label] = {k: v for k, v in entry.items() if v is not None or k in ("window", "band")}

    # ---- run options
    seed = DEFAULT_SEED
    traces: str | tuple = "all"
    out_dir = "fluxlock_out"
    if by_kind["run"]:
        rsec = by_kind["run"][0]
        seed_v = col.intv(rsec, "seed", default=DEFAULT_SEED)
        if seed_v is not None:
            if seed_v < 0:
                col.error(rsec, "seed", f"seed must be >= 0, got {seed_v}")
            else:
                seed = seed_v
        raw_traces = col.take(rsec, "traces")
        if raw_traces is not None:
            if raw_traces.strip() in ("all", "none"):
                traces = raw_traces.strip()
            else:
                names = tuple(p.strip() for p in raw_traces.split(",") if p.strip())
                for nm in names:
                    if nm not in signals:
                        col.error(rsec, "traces", f"unknown signal {nm!r}",
                                  f"known signals: {', '.join(sorted(signals))}")
                traces = names
        out_v = col.take(rsec, "out")
        if out_v:
            out_dir = out_v
    echo["run"] = {"seed": seed, "traces": traces if isinstance(traces, str) else list(traces), "out": out_dir}

    if not by_kind["laser"]:
        col.errors.append("line 1: a scenario needs at least one [laser <name>] section")

    if col.errors:
        raise ScenarioValidationError(sorted(col.errors, key=_error_line))

    # pure-topology elements that nothing references get flagged at run time
    return ScenarioConfig(
        grid=grid,
        elements=tuple(elements),
        seed=seed,
        traces=traces,
        out_dir=out_dir,
        echo=echo,
    )


def _error_line(message: str) -> int:
    try:
        return int(message.split(":", 1)[0].removeprefix("line "))
    except ValueError:
        return 0


# --------------------------------------------------------------------------
# runner


@dataclass(frozen=True)
class RunResult:
    """Everything a scenario run produced.

    ``reports`` values are plain dicts (JSON-ready); comparison entries
    carry an explicit ``passed`` verdict, descriptive entries carry
    ``passed: None``.  ``warnings`` lists scenario elements that fed no
    output.
    """

    traces: dict
    spectra: dict
    reports: dict
    config_echo: dict
    seed: int
    wall_time_s: float
    sample_count: int
    warnings: tuple


def _slice_trace(trace, window):
    if window is None:
        return trace
    grid = trace.grid
    sel = grid.window_slice(*window)
    sub = TimeGrid(grid.dt, sel.stop - sel.start, grid.t0 + sel.start * grid.dt)
    cls = type(trace)
    if isinstance(trace, FieldTrace):
        return FieldTrace(sub, trace.samples[sel], trace.mean_amplitude)
    return cls(sub, trace.samples[sel])


def run(config: ScenarioConfig, seed: int | None = None) -> RunResult:
    """Execute a validated scenario.

    Elements are seeded from ``SeedStream(seed).child("element", name)``,
    so results are bit-identical across re-runs and independent of any
    evaluation-order concerns.  ``seed`` overrides the config's seed
    (the CLI's precedence: flag > config > default).
    """
    t_begin = time.perf_counter()
    grid = config.grid
    use_seed = config.seed if seed is None else int(seed)
    root = SeedStream(use_seed)
    signals: dict = {}
    used: set[str] = set()

    def get(ref: str, who: str):
        if ref not in signals:
            raise FluxlockError(f"scenario element {who!r}: internal reference {ref!r} missing")
        for cand in (ref, ref.split(".", 1)[0]):
            used.add(cand)
        return signals[ref]

    spectra: dict = {}
    reports: dict = {}

    for kind, name, entry in config.elements:
        child = root.child("element", name)
        try:
            if kind == "laser":
                if entry["kind"] == "potential":
                    spec = PotentialLaserSpec(entry["gain"], entry["loss"], entry["saturation"], entry["noise_psd"])
                    signals[name] = nonlinear_laser(spec, grid, child)
                else:
                    spec = LinearLaserSpec(entry["amplitude"], entry["drift_rate"])
                    maker = phasor_laser if entry["kind"] == "phasor" else linearized_laser
                    signals[name] = maker(spec, grid, child)
            elif kind == "splitter":
                ins = []
                for i, ref in enumerate(entry["inputs"]):
                    if ref == "vacuum":
                        ins.append(vacuum_field(grid, child.child(f"vacuum_{i}")))
                    else:
                        ins.append(get(ref, name))
                out_a, out_b = beam_splitter(ins[0], ins[1], entry["mixing_angle"])
                signals[f"{name}.a"] = out_a
                signals[f"{name}.b"] = out_b
            elif kind == "delay":
                signals[name] = delay(get(entry["input"], name), entry["lag"], child.child("line"))
            elif kind == "gate":
                signals[name] = time_gate(get(entry["input"], name), entry["windows"], child.child("blocked"))
            elif kind == "shift":
                signals[name] = phase_shift(get(entry["input"], name), entry["phi"])
            elif kind == "control":
                master = get(entry["master"], name)
                if entry["type"] == "feedback":
                    fspec = FeedbackSpec(
                        mixing_angle=entry["mixing_angle"],
                        loop_gain=entry["loop_gain"],
                        loop_delay=entry["loop_delay"],
                        filter_bandwidth=entry["filter_bandwidth"],
                        lead_time=entry["lead_time"],
                    )
                    slave_spec = LinearLaserSpec(entry["slave_amplitude"], entry["slave_drift_rate"])
                    res = feedback_lock(slave_spec, master, fspec, child)
                    signals[f"{name}.out"] = res.output
                    signals[f"{name}.error"] = res.error
                    signals[f"{name}.correction"] = res.applied_correction
                    signals[f"{name}.phase"] = res.phase
                else:
                    gain = entry["gain"]
                    scale = entry["gain_scale"]
                    ffspec = FeedforwardSpec(
                        mixing_angle=entry["mixing_angle"],
                        gain=gain,
                        actuation=entry["actuation"],
                        actuator_limit=entry["actuator_limit"],
                    )
                    if entry["type"] == "feedforward":
                        slave = get(entry["slave"], name)
                        ffspec = _scaled_spec(ffspec, scale, slave, master)
                        res = feedforward_lock(slave, master, ffspec, child)
                        signals[f"{name}.out"] = res.locked_output
                        signals[f"{name}.error"] = res.error
                        signals[f"{name}.applied_phase"] = res.applied_phase
                        if entry["unlock_time"] is not None:
                            signals[f"{name}.coast"] = unlock_and_coast(res, entry["unlock_time"])
                    else:
                        sa = get(entry["slaves"][0], name)
                        sb = get(entry["slaves"][1], name)
                        ffspec = _scaled_spec(ffspec, scale, sa, master)
                        res_a, res_b = dual_lock(sa, sb, master, ffspec, child)
                        signals[f"{name}.a"] = res_a.locked_output
                        signals[f"{name}.b"] = res_b.locked_output
                        signals[f"{name}.error_a"] = res_a.error
                        signals[f"{name}.error_b"] = res_b.error
                        signals[f"{name}.beat"] = balanced_homodyne(
                            phase_shift(res_a.locked_output, math.pi / 2.0), res_b.locked_output
                        )
                        if entry["unlock_time"] is not None:
                            signals[f"{name}.coast_a"] = unlock_and_coast(res_a, entry["unlock_time"])
                            signals[f"{name}.coast_b"] = unlock_and_coast(res_b, entry["unlock_time"])
            elif kind == "detect":
                if entry["type"] == "balanced_homodyne":
                    sig = get(entry["signal"], name)
                    if entry["shift"]:
                        sig = phase_shift(sig, entry["shift"])
                    signals[name] = balanced_homodyne(sig, get(entry["reference"], name))
                elif entry["type"] == "error_signal":
                    signals[name] = error_signal(get(entry["tap"], name), get(entry["reference"], name))
                else:
                    fn = linearized_flux if entry["linearized"] else photocurrent
                    signals[name] = fn(get(entry["signal"], name))
            elif kind == "analysis":
                _run_analysis(name, entry, signals, get, spectra, reports)
        except FluxlockError as exc:
            raise _annotate(exc, kind, name)

    # unused-element warnings: an element is used when its signal feeds
    # another element or an analysis, or is selected for export.
    warnings: list[str] = []
    exported = _trace_names(config, signals)
    for kind, name, _ in config.elements:
        if kind == "analysis":
            continue
        outs = [s for s in signals if s == name or s.startswith(name + ".")]
        contributes = any(s in exported for s in outs) or name in used or any(s in used for s in outs)
        if not contributes:
            warnings.append(f"unused element '{kind} {name}': it feeds no analysis, element, or exported trace")

    wall = time.perf_counter() - t_begin
    trace_out = {nm: signals[nm] for nm in exported}
    sample_count = sum(len(tr.samples) for tr in signals.values() if hasattr(tr, "samples"))
    return RunResult(
        traces=trace_out,
        spectra=spectra,
        reports=reports,
        config_echo=config.echo,
        seed=use_seed,
        wall_time_s=wall,
        sample_count=sample_count,
        warnings=tuple(warnings),
    )


def _annotate(exc: FluxlockError, kind: str, name: str):
    exc.args = (f"scenario element '{kind} {name}': {exc.args[0] if exc.args else exc}",) + exc.args[1:]
    return exc


def _scaled_spec(spec: FeedforwardSpec, scale: float, slave, master) -> FeedforwardSpec:
    """Fold ``gain_scale`` into an explicit gain (relative to nominal)."""
    if scale == 1.0:
        return spec
    from .control import nominal_gain

    base = spec.gain
    if base is None:
        base = nominal_gain(spec.mixing_angle, abs(slave.mean_amplitude), abs(master.mean_amplitude))
    return FeedforwardSpec(spec.mixing_angle, base * scale, spec.actuation, spec.actuator_limit)


def _run_analysis(name, entry, signals, get, spectra, reports):
    atype = entry["type"]
    if atype == "coherence":
        rep = coherence_metric(
            get(entry["signal_a"], name),
            get(entry["signal_b"], name),
            entry["block_duration"],
            window=entry["window"],
        )
        reports[name] = {
            "type": "coherence",
            "g1_modulus": rep.g1_modulus,
            "condition_ratio": rep.condition_ratio,
            "block_count": rep.block_count,
            "window": list(rep.window),
            "passed": None,
        }
        return
    trace = _slice_trace(get(entry["signal"], name), entry["window"])
    if atype == "variance":
        samples = trace.samples
        if np.iscomplexobj(samples):
            samples = np.abs(samples - trace.mean_amplitude) if isinstance(trace, FieldTrace) else np.abs(samples)
        reports[name] = {
            "type": "variance",
            "mean": float(np.mean(samples)),
            "variance": float(np.var(samples)),
            "count": int(samples.size),
            "passed": None,
        }
        return
    estimator = welch_psd if atype == "psd" else increment_psd
    est = estimator(trace, segment_length=entry["segment_length"], overlap=entry["overlap"])
    spectra[name] = est
    if atype == "power_law":
        fit = power_law_fit(est, entry["band"])
        rep = {
            "type": "power_law",
            "band": list(entry["band"]),
            "exponent": fit.exponent,
            "prefactor": fit.prefactor,
            "r_squared": fit.r_squared,
            "passed": None,
        }
        if entry["expected_exponent"] is not None:
            rep["expected_exponent"] = entry["expected_exponent"]
            rep["tolerance"] = entry["tolerance"]
            rep["passed"] = bool(abs(fit.exponent - entry["expected_exponent"]) <= entry["tolerance"])
        reports[name] = rep
        return
    if entry.get("compare") is None:
        return
    compare = entry["compare"]
    try:
        reference = float(compare)
    except ValueError:
        reference = analytic_curve(compare, est.omega, **entry["compare_params"])
    rep = compare_psd(est, reference, entry["band"], entry["tolerance"])
    reports[name] = {
        "type": "comparison",
        "band": list(rep.band),
        "measured_mean": rep.measured_mean,
        "reference_mean": rep.reference_mean,
        "ratio": rep.ratio,
        "tolerance": rep.tolerance,
        "n_bins": rep.n_bins,
        "reference": compare,
        "passed": rep.passed,
    }


def _trace_names(config: ScenarioConfig, signals: dict):
    selection = config.traces
    names = [nm for nm, tr in signals.items() if hasattr(tr, "samples")]
    if selection == "all":
        return names
    if selection == "none":
        return []
    return [nm for nm in names if nm in selection]


# --------------------------------------------------------------------------
# persistence


def _fmt(x: float) -> str:
    """Shortest decimal form that round-trips the exact binary value."""
    return repr(float(x))


def _trace_unit(trace) -> str:
    if isinstance(trace, FieldTrace):
        return "sqrt(Hz)"
    if isinstance(trace, PhotocurrentTrace):
        return "Hz"
    return "a.u."


def export(result: RunResult, out_dir: str) -> dict:
    """Write a run's exports and return the manifest dict.

    Files: ``traces.csv`` (time plus one column per real signal, a
    ``.re``/``.im`` pair per complex one), ``psd.csv`` (angular frequency
    plus one column per spectrum), ``reports.json`` and
    ``manifest.json``.  Only non-empty files are written; the manifest is
    always written.  All numbers are serialized with round-trip
    precision, lines end with LF, and nothing in the manifest depends on
    the wall clock, so identical runs export identical bytes.
    """
    os.makedirs(out_dir, exist_ok=True)
    written: dict[str, str] = {}

    if result.traces:
        path = os.path.join(out_dir, "traces.csv")
        _write_traces_csv(path, result.traces)
        written["traces"] = "traces.csv"
    if result.spectra:
        path = os.path.join(out_dir, "psd.csv")
        _write_psd_csv(path, result.spectra)
        written["psd"] = "psd.csv"
    if result.reports:
        path = os.path.join(out_dir, "reports.json")
        payload = {"schema_version": SCHEMA_VERSION, "reports": result.reports}
        _write_json(path, payload)
        written["reports"] = "reports.json"

    # sanitize before returning so the caller sees exactly the written payload
    manifest = _jsonable({
        "schema_version": SCHEMA_VERSION,
        "package": "fluxlock",
        "seed": result.seed,
        "config_echo": result.config_echo,
        "files": written,
        "kernel_backend": _kernels.KERNEL_BACKEND,
        "warnings": list(result.warnings),
    })
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest


def _write_json(path: str, payload: dict):
    try:
        with open(path, "w", newline="\n") as fh:
            json.dump(_jsonable(payload), fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise FluxlockError(f"cannot write {path}: {exc}") from exc


def _jsonable(obj):
    """Recursively coerce to types the strict JSON encoder accepts.

    Non-finite floats become the strings "inf"/"-inf"/"nan" (JSON has no
    spelling for them, and silently bending them to huge numbers would
    lie in the config echo).
    """
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_traces_csv(path: str, traces: dict):
    grids = {tr.grid for tr in traces.values()}
    if len(grids) > 1:
        # heterogeneous grids get one time base each, padded with blanks
        return _write_ragged_traces_csv(path, traces)
    grid = next(iter(grids))
    header = ["t [s]"]
    columns = []
    for name, tr in traces.items():
        unit = _trace_unit(tr)
        if np.iscomplexobj(tr.samples):
            header += [f"{name}.re [{unit}]", f"{name}.im [{unit}]"]
            columns += [tr.samples.real, tr.samples.imag]
        else:
            header.append(f"{name} [{unit}]")
            columns.append(tr.samples)
    times = grid.times
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for i in range(grid.n):
        row = [_fmt(times[i])] + [_fmt(c[i]) for c in columns]
        buf.write(",".join(row) + "\n")
    _write_text(path, buf.getvalue())


def _write_ragged_traces_csv(path: str, traces: dict):
    header = []
    columns = []
    for name, tr in traces.items():
        unit = _trace_unit(tr)
        header.append(f"{name}.t [s]")
        columns.append(tr.grid.times)
        if np.iscomplexobj(tr.samples):
            header += [f"{name}.re [{unit}]", f"{name}.im [{unit}]"]
            columns += [tr.samples.real, tr.samples.imag]
        else:
            header.append(f"{name} [{unit}]")
            columns.append(tr.samples)
    n = max(len(c) for c in columns)
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for i in range(n):
        buf.write(",".join(_fmt(c[i]) if i < len(c) else "" for c in columns) + "\n")
    _write_text(path, buf.getvalue())


def _write_psd_csv(path: str, spectra: dict):
    axes = [est.omega for est in spectra.values()]
    shared = all(len(ax) == len(axes[0]) and np.array_equal(ax, axes[0]) for ax in axes[1:])
    buf = io.StringIO()
    if shared:
        names = list(spectra)
        buf.write(",".join(["omega [rad/s]"] + [f"{nm} [psd]" for nm in names]) + "\n")
        omega = axes[0]
        cols = [spectra[nm].psd for nm in names]
        for i in range(len(omega)):
            buf.write(",".join([_fmt(omega[i])] + [_fmt(c[i]) for c in cols]) + "\n")
    else:
        header = []
        cols = []
        for nm, est in spectra.items():
            header += [f"{nm}.omega [rad/s]", f"{nm} [psd]"]
            cols += [est.omega, est.psd]
        n = max(len(c) for c in cols)
        buf.write(",".join(header) + "\n")
        for i in range(n):
            buf.write(",".join(_fmt(c[i]) if i < len(c) else "" for c in cols) + "\n")
    _write_text(path, buf.getvalue())


def _write_text(path: str, text: str):
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise FluxlockError(f"cannot write {path}: {exc}") from exc
