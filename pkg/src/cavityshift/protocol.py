"""Measurement procedure: fixed-field temperature sweeps of R(T) for the
paired film and cavity samples, plus the on-disk run format.

A dataset is a pure function of (model params, instrument config, plan,
seed): curves may be generated in any order or concurrently and always
come out bit-identical, because each curve owns a substream keyed by
(field index, kind, repetition).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np

from . import model
from .errors import InputError
from .fileio import atomic_write_text, fmt, write_json
from .instrument import InstrumentConfig, measure_profile, noise_stream

FORMAT_VERSION = "1"

KIND_CODES = {"film": 0, "cavity": 1}

#: Fraction of the temperature grid counted as "central" for coverage.
CENTRAL_FRACTION = 0.8


@dataclass(frozen=True)
class SweepPlan:
    """One acquisition plan: the fields to visit and the shared T grid."""

    fields: tuple[float, ...]
    t_center_guess: float       # K
    t_span: float               # K
    n_points: int = 200
    repetitions: int = 1

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(float(f) for f in self.fields))
        if len(self.fields) == 0:
            raise InputError("plan needs at least one field")
        if any(f < 0 for f in self.fields):
            raise InputError("fields must be nonnegative")
        if any(b <= a for a, b in zip(self.fields, self.fields[1:])):
            raise InputError("fields must be strictly increasing")
        if self.n_points < 20:
            raise InputError(f"n_points must be >= 20, got {self.n_points}")
        if not (self.t_span > 0):
            raise InputError(f"t_span must be > 0, got {self.t_span}")
        if self.repetitions < 1:
            raise InputError(f"repetitions must be >= 1, got {self.repetitions}")


@dataclass
class TransitionCurve:
    """One fixed-field R(T) sweep.

    ``oracle_t_star`` is the generating midpoint, kept only for oracle
    and test comparisons; analysis must never consume it.
    """

    field: float
    kind: str
    temperatures: np.ndarray    # K, nondecreasing
    resistances: np.ndarray     # ohm
    repetition: int = 0
    seed_path: str = ""
    flags: tuple[str, ...] = ()
    oracle_t_star: float | None = dataclass_field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise InputError(f"kind must be 'film' or 'cavity', got {self.kind!r}")
        self.temperatures = np.asarray(self.temperatures, dtype=float)
        self.resistances = np.asarray(self.resistances, dtype=float)
        if self.temperatures.shape != self.resistances.shape:
            raise InputError("temperature and resistance arrays differ in length")
        if np.any(np.diff(self.temperatures) < 0):
            raise InputError("temperatures must be nondecreasing")
        clamped = any(f.startswith("clamped") for f in self.flags)
        if not clamped and np.any(np.diff(self.temperatures) <= 0):
            raise InputError("temperatures must be strictly increasing")

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.temperatures.tolist(), self.resistances.tolist()))


def plan_sweep(params: model.ModelParams, cfg: InstrumentConfig,
               fields) -> SweepPlan:
    """Plan covering every transition of the given field list.

    Centers the grid between Tc and the deepest film transition and
    spans eight transition widths, which keeps both plateaus and every
    midpoint inside the central part of the sweep.
    """
    fields = tuple(float(f) for f in fields)
    if len(fields) == 0:
        raise InputError("field list is empty")
    deepest = model.film_delta(params, max(fields))  # mK
    center = params.t_c - 0.5 * deepest * 1e-3
    span = 8.0 * cfg.transition_width * 1e-3
    return SweepPlan(fields=fields, t_center_guess=center, t_span=span)


def temperature_grid(plan: SweepPlan) -> np.ndarray:
    half = 0.5 * plan.t_span
    return np.linspace(plan.t_center_guess - half, plan.t_center_guess + half,
                       plan.n_points)


def acquire_curve(params: model.ModelParams, cfg: InstrumentConfig,
                  plan: SweepPlan, field: float, kind: str, repetition: int = 0,
                  substream_prefix: tuple[int, ...] = ()) -> TransitionCurve:
    """Sweep one curve at a fixed field, single monotone up-sweep."""
    if field not in plan.fields:
        raise InputError(f"field {field} G is not part of the plan")
    if kind not in KIND_CODES:
        raise InputError(f"kind must be 'film' or 'cavity', got {kind!r}")
    if not (0 <= repetition < plan.repetitions):
        raise InputError(f"repetition {repetition} outside plan range")

    delta_mk = (model.film_delta(params, field) if kind == "film"
                else model.cavity_delta(params, field))
    t_star = params.t_c - delta_mk * 1e-3

    grid = temperature_grid(plan)
    clamped_idx = np.nonzero(grid < cfg.base_temperature)[0]
    setpoints = np.maximum(grid, cfg.base_temperature)

    path = (*substream_prefix, plan.fields.index(field), KIND_CODES[kind], repetition)
    rng = noise_stream(cfg.seed, *path)
    resistances = measure_profile(cfg, setpoints, t_star, rng)

    flags = [f"clamped:{i}" for i in clamped_idx.tolist()]
    margin = 0.5 * (1.0 - CENTRAL_FRACTION) * plan.t_span
    if not (setpoints[0] + margin <= t_star <= setpoints[-1] - margin):
        flags.append("midpoint-outside-central-80pct")

    return TransitionCurve(
        field=field, kind=kind, temperatures=setpoints, resistances=resistances,
        repetition=repetition, seed_path="/".join(str(p) for p in path),
        flags=tuple(flags), oracle_t_star=t_star)


def run_paired_experiment(params: model.ModelParams, cfg: InstrumentConfig,
                          plan: SweepPlan,
                          substream_prefix: tuple[int, ...] = ()) -> list[TransitionCurve]:
    """Full dataset: one film and one cavity curve per field and repetition.

    Curves are keyed by (field, kind, repetition); assembly order is
    fixed (field-major, film before cavity) but any other order would
    produce the same curves.
    """
    curves = []
    for field in plan.fields:
        for repetition in range(plan.repetitions):
            for kind in ("film", "cavity"):
                curves.append(acquire_curve(params, cfg, plan, field, kind,
                                            repetition, substream_prefix))
    return curves


# --- run-file format -------------------------------------------------------

def curve_filename(index: int, kind: str, repetition: int) -> str:
    return f"curve_{index:03d}_{kind}_rep{repetition}.csv"


def write_curve_csv(path: str | Path, curve: TransitionCurve) -> Path:
    lines = [
        f"# format_version={FORMAT_VERSION}",
        f"# field_gauss={fmt(curve.field)}",
        f"# kind={curve.kind}",
        f"# repetition={curve.repetition}",
        f"# seed_path={curve.seed_path}",
        f"# flags={';'.join(curve.flags)}",
    ]
    if curve.oracle_t_star is not None:
        lines.append(f"# oracle_t_star_K={fmt(curve.oracle_t_star)}")
    lines.append("temperature_K,resistance_ohm")
    for t, r in zip(curve.temperatures, curve.resistances):
        lines.append(f"{fmt(t)},{fmt(r)}")
    return atomic_write_text(path, "\n".join(lines) + "\n")


def read_curve_csv(path: str | Path) -> TransitionCurve:
    meta: dict[str, str] = {}
    temps: list[float] = []
    res: list[float] = []
    with open(path, "r", newline="\n") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = value
            elif line[0].isdigit() or line[0] in "+-.":
                t_text, _, r_text = line.partition(",")
                temps.append(float(t_text))
                res.append(float(r_text))
    if "field_gauss" not in meta or "kind" not in meta:
        raise InputError(f"curve file {path} is missing header metadata")
    flags = tuple(f for f in meta.get("flags", "").split(";") if f)
    oracle = meta.get("oracle_t_star_K")
    return TransitionCurve(
        field=float(meta["field_gauss"]), kind=meta["kind"],
        temperatures=np.array(temps), resistances=np.array(res),
        repetition=int(meta.get("repetition", 0)),
        seed_path=meta.get("seed_path", ""), flags=flags,
        oracle_t_star=float(oracle) if oracle is not None else None)


def write_run(out_dir: str | Path, curves: list[TransitionCurve],
              config_dict: dict) -> Path:
    """Write one CSV per curve plus the JSON manifest; returns its path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    field_order: list[float] = []
    for curve in curves:
        if curve.field not in field_order:
            field_order.append(curve.field)
        name = curve_filename(field_order.index(curve.field), curve.kind,
                              curve.repetition)
        write_curve_csv(out_dir / name, curve)
        entries.append({
            "file": name,
            "field_gauss": curve.field,
            "kind": curve.kind,
            "repetition": curve.repetition,
            "seed_path": curve.seed_path,
            "n_points": int(len(curve.temperatures)),
        })
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": config_dict,
        "curves": entries,
    }
    return write_json(out_dir / "run.json", manifest)


def read_run(manifest_path: str | Path) -> tuple[list[TransitionCurve], dict]:
    """Load a dataset back; the CSV round trip is bit-exact."""
    manifest_path = Path(manifest_path)
    with open(manifest_path) as handle:
        manifest = json.load(handle)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise InputError(
            f"unsupported run format {manifest.get('format_version')!r}")
    curves = [read_curve_csv(manifest_path.parent / entry["file"])
              for entry in manifest["curves"]]
    return curves, manifest.get("config", {})
