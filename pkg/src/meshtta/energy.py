"""Power, energy and area model calibrated to measured FPGA/ASIC figures.

All powers are per PE unless stated otherwise. Public functions take and
return SI units (Hz, W, J); the calibration tables are kept in the units they
were measured in (µW, mW).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources

MHZ = 1e6
ANCHOR_HZ = 10 * MHZ
MAX_HZ = 200 * MHZ
PE_SIDE_MM = 0.055


@dataclass(frozen=True)
class AsicCorner:
    name: str
    voltage: float
    temperature: float
    static_uw: dict[float, float]
    dynamic_uw: dict[float, float]
    total_uw: dict[float, float]
    ratio: dict[float, float]

    @property
    def frequencies(self) -> list[float]:
        return sorted(self.static_uw)


def _load_corners() -> dict[str, AsicCorner]:
    text = resources.files("meshtta").joinpath("data", "asic_corners.csv").read_text()
    rows = csv.DictReader(io.StringIO("".join(l for l in text.splitlines(True)
                                              if not l.startswith("#"))))
    tables: dict[str, dict] = {}
    for r in rows:
        t = tables.setdefault(r["corner"], {
            "voltage": float(r["voltage_v"]), "temperature": float(r["temperature_c"]),
            "static_uw": {}, "dynamic_uw": {}, "total_uw": {}, "ratio": {}})
        f = float(r["freq_mhz"]) * MHZ
        t["static_uw"][f] = float(r["static_uw"])
        t["dynamic_uw"][f] = float(r["dynamic_uw"])
        t["total_uw"][f] = float(r["total_uw"])
        t["ratio"][f] = float(r["static_over_total"])
    return {name: AsicCorner(name, **t) for name, t in tables.items()}


CORNERS = _load_corners()


def get_corner(name: str) -> AsicCorner:
    try:
        return CORNERS[name]
    except KeyError:
        raise KeyError(f"unknown corner {name!r}; known: {', '.join(CORNERS)}") from None


def _check_freq(f: float) -> None:
    if not 0 < f <= MAX_HZ:
        raise ValueError(f"frequency {f} Hz outside the modelled range (0, 200 MHz]")


def _tabulated(table: dict[float, float], f: float) -> float | None:
    for tf, v in table.items():
        if math.isclose(tf, f, rel_tol=1e-9):
            return v
    return None


def dynamic_power(corner: AsicCorner, f: float) -> float:
    """Table value at measured frequencies, else linear through the 10 MHz point."""
    _check_freq(f)
    v = _tabulated(corner.dynamic_uw, f)
    if v is None:
        v = corner.dynamic_uw[ANCHOR_HZ] * f / ANCHOR_HZ
    return v * 1e-6


def anchored_dynamic_power(corner: AsicCorner, f: float) -> float:
    """The linear model alone, even at measured frequencies."""
    _check_freq(f)
    return corner.dynamic_uw[ANCHOR_HZ] * f / ANCHOR_HZ * 1e-6


def static_power(corner: AsicCorner, f: float) -> float:
    """Leakage at the nearest measured frequency (ties go to the lower one)."""
    _check_freq(f)
    nearest = min(corner.frequencies, key=lambda tf: (abs(tf - f), tf))
    return corner.static_uw[nearest] * 1e-6


def total_power(corner: AsicCorner, f: float) -> float:
    """Printed total at measured frequencies, else static + dynamic."""
    v = _tabulated(corner.total_uw, f)
    if v is not None:
        _check_freq(f)
        return v * 1e-6
    return static_power(corner, f) + dynamic_power(corner, f)


def program_energy(corner: AsicCorner, f: float, cycles: int, n_pe: int) -> float:
    """Joules for ``n_pe`` PEs running ``cycles`` cycles at ``f``."""
    if cycles <= 0:
        raise ValueError("cycles must be positive")
    if n_pe < 0:
        raise ValueError("n_pe must be non-negative")
    return n_pe * (static_power(corner, f) + dynamic_power(corner, f)) * cycles / f


class SleepMode(Enum):
    CLOCK_GATED = "clock"   # dynamic power stops, leakage remains
    POWER_GATED = "power"   # both stop


@dataclass(frozen=True)
class DutyCycle:
    cycles_per_frame: int
    frequency: float
    frame_rate: float
    sleep_mode: SleepMode = SleepMode.CLOCK_GATED

    @property
    def active_fraction(self) -> float:
        return self.cycles_per_frame * self.frame_rate / self.frequency


def average_frame_power(corner: AsicCorner, duty: DutyCycle, n_pe: int) -> float:
    """Mean array power when the work is done early and the array then sleeps."""
    alpha = duty.active_fraction
    if alpha > 1:
        raise ValueError(f"{duty.cycles_per_frame} cycles at {duty.frequency} Hz do not "
                         f"fit in a 1/{duty.frame_rate} s frame")
    s, d = static_power(corner, duty.frequency), dynamic_power(corner, duty.frequency)
    sleep = s if SleepMode(duty.sleep_mode) is SleepMode.CLOCK_GATED else 0.0
    return n_pe * (alpha * (s + d) + (1 - alpha) * sleep)


def area(rows: int, cols: int) -> float:
    """Silicon area in mm², linear in the number of PEs."""
    if rows < 1 or cols < 1:
        raise ValueError("array dimensions must be positive")
    return rows * cols * PE_SIDE_MM ** 2


# ---------------------------------------------------------------------------
# FPGA (Cyclone IV EP4CE115, 10x11 reference build)

@dataclass(frozen=True)
class FpgaModel:
    static_mw: float = 104.30
    core_dynamic_mw: float = 1.0
    clock_hz: float = 50 * MHZ
    reference_dims: tuple[int, int] = (10, 11)
    reference_dynamic_mw: float = 113.79
    reference_total_mw: float = 234.30
    cells_per_core: int = 630
    reference_cells: int = 69_983
    device_cells: int = 81_264

    @property
    def reference_pes(self) -> int:
        return self.reference_dims[0] * self.reference_dims[1]

    @property
    def interconnect_mw(self) -> float:
        return round(self.reference_dynamic_mw - self.reference_pes * self.core_dynamic_mw, 6)

    @property
    def cell_overhead(self) -> int:
        return self.reference_cells - self.reference_pes * self.cells_per_core


FPGA = FpgaModel()


def fpga_program_energy(cycles: int, n_pe: int, f: float = FPGA.clock_hz,
                        model: FpgaModel = FPGA) -> float:
    """Per-core dynamic energy; the device's fixed static draw is not attributed."""
    if cycles <= 0:
        raise ValueError("cycles must be positive")
    core_w = model.core_dynamic_mw * 1e-3 * f / model.clock_hz
    return n_pe * core_w * cycles / f


def fpga_report(rows: int, cols: int, model: FpgaModel = FPGA) -> dict:
    if rows < 1 or cols < 1:
        raise ValueError("array dimensions must be positive")
    n = rows * cols
    dynamic = n * model.core_dynamic_mw + model.interconnect_mw
    rep = {
        "pes": n,
        "static_mw": model.static_mw,
        "dynamic_mw": round(dynamic, 6),
        "total_mw": round(model.static_mw + dynamic, 6),
        "logic_cells_cores": n * model.cells_per_core,
        "logic_cells": n * model.cells_per_core + model.cell_overhead,
        "logic_cell_overhead": model.cell_overhead,
        "device_cells": model.device_cells,
    }
    if sorted((rows, cols)) == sorted(model.reference_dims):
        printed = model.reference_total_mw
        rep["reported_total_mw"] = printed
        rep["total_discrepancy_mw"] = round(printed - rep["total_mw"], 6)
    return rep
