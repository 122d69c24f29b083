"""CSV and JSON readers and writers for reports, traces and configs.

Numbers are written in ``%.16e`` (17 significant digits) with LF line
endings, so every double survives a write/read round trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .exponents import NetworkParams
from .rootfinding import Eigenvalue, SpectrumReport
from .simulator import EnergyTrace

VERSION = "0.1.0"
SPECTRUM_FIELDS = [
    "branch",
    "label",
    "index",
    "re",
    "im",
    "multiplicity",
    "newton_residual",
    "asymptotic_re",
    "asymptotic_im",
]


def fmt(x: float) -> str:
    return f"{float(x):.16e}"


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


# --- spectra ------------------------------------------------------------


def write_spectrum_csv(report_or_values, path) -> None:
    """One row per eigenvalue; plain complex lists get empty branch/label."""
    evs = report_or_values.eigenvalues if isinstance(report_or_values, SpectrumReport) else report_or_values
    with open(path, "w", newline="") as fh:
        out = _writer(fh)
        out.writerow(SPECTRUM_FIELDS)
        for i, e in enumerate(evs):
            if isinstance(e, Eigenvalue):
                ref = complex(e.asymptotic_ref)
                out.writerow(
                    [e.branch, e.label, e.index, fmt(e.value.real), fmt(e.value.imag), e.multiplicity,
                     fmt(e.newton_residual), fmt(ref.real), fmt(ref.imag)]
                )
            else:
                z = complex(e)
                out.writerow(["", "", i, fmt(z.real), fmt(z.imag), 1, fmt(math.nan), fmt(math.nan), fmt(math.nan)])


def read_spectrum_csv(path) -> list:
    """Read rows written by :func:`write_spectrum_csv` as ``Eigenvalue`` objects."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                Eigenvalue(
                    value=complex(float(row["re"]), float(row["im"])),
                    branch=row["branch"],
                    index=int(row["index"]),
                    multiplicity=int(row["multiplicity"]),
                    newton_residual=float(row["newton_residual"]),
                    asymptotic_ref=complex(float(row["asymptotic_re"]), float(row["asymptotic_im"])),
                    label=row["label"],
                )
            )
    return out


def spectrum_summary(report: SpectrumReport) -> dict:
    return {
        "interlacing_ok": bool(report.interlacing_ok),
        "interlacing_detail": report.interlacing_detail,
        "n_max": report.n_max,
        "count": len(report.eigenvalues),
        "count_by_branch": {b: sum(e.branch == b for e in report.eigenvalues) for b in ("D", "H")},
        "region": report.region.to_dict() if report.region else None,
        "coincidences": [[z.real, z.imag, h.real, h.imag] for z, h in report.coincidences],
        "spectral_abscissa": max((e.value.real for e in report.eigenvalues), default=None),
    }


# --- traces -------------------------------------------------------------


def write_trace_csv(trace: EnergyTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        out = _writer(fh)
        out.writerow(["t", "energy", "dissipation"])
        for t, e, d in zip(trace.times, trace.energy, trace.boundary_dissipation):
            out.writerow([fmt(t), fmt(e), fmt(d)])


def read_trace_csv(path) -> EnergyTrace:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return EnergyTrace(data[:, 0], data[:, 1], data[:, 2])


def write_table_csv(rows: list, header: list, path) -> None:
    """Generic table; floats are formatted, other values written as-is."""
    with open(path, "w", newline="") as fh:
        out = _writer(fh)
        out.writerow(header)
        for r in rows:
            out.writerow([fmt(v) if isinstance(v, float) else v for v in r])


def read_table_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- json ---------------------------------------------------------------


def _default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(path, payload: dict, config: "RunConfig | None" = None, wall_time: float | None = None) -> dict:
    doc = {"version": VERSION}
    if config is not None:
        doc["config"] = config.to_dict()
    if wall_time is not None:
        doc["wall_time"] = wall_time
    doc.update(payload)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=_default) + "\n")
    return doc


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


# --- run configuration --------------------------------------------------


@dataclass
class RunConfig:
    """Everything a CLI run depends on.

    Attributes
    ----------
    command : str
    params : NetworkParams
    options : dict
        Command-specific settings (``n_max``, ``N``, ``dt``, ``T_final``,
        tolerances, output directory).
    preset : str or None
        Name of an initial-data preset for ``simulate``.
    """

    command: str
    params: NetworkParams = field(default_factory=NetworkParams)
    options: dict = field(default_factory=dict)
    preset: str | None = None

    def to_dict(self) -> dict:
        return {"command": self.command, "params": self.params.to_dict(), "options": dict(self.options), "preset": self.preset}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - {"command", "params", "options", "preset"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "command" not in d:
            raise ValueError("config needs a 'command'")
        return cls(d["command"], NetworkParams.from_dict(d.get("params", asdict(NetworkParams()))), dict(d.get("options", {})), d.get("preset"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))
