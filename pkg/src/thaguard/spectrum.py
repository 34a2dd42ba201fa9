"""Wavelength-resolved transmittance in the dB domain.

All spectra are immutable values. dB is the working unit everywhere; the
linear domain is only entered at the photon-budget boundary (see
``security``) and when reducing raw intensity scans.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class SpectrumError(ValueError):
    """Invalid spectral data or an incompatible spectral operation."""


def _frozen(values: Iterable[float]) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class WavelengthGrid:
    """Strictly increasing wavelength samples in nanometres."""

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(np.atleast_1d(self.points))
        if pts.ndim != 1 or pts.size == 0:
            raise SpectrumError("wavelength grid must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
            raise SpectrumError("wavelengths must be finite and > 0 nm")
        if np.any(np.diff(pts) <= 0):
            bad = int(np.argmax(np.diff(pts) <= 0))
            raise SpectrumError(
                f"wavelengths must be strictly increasing (at {pts[bad + 1]:g} nm)"
            )
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, lo: float, hi: float, step: float = 1.0) -> "WavelengthGrid":
        """Inclusive grid ``lo, lo+step, ..., hi``."""
        if step <= 0 or hi < lo:
            raise SpectrumError(f"bad grid {lo}:{hi}:{step}")
        n = int(round((hi - lo) / step))
        if not math.isclose(lo + n * step, hi, rel_tol=0, abs_tol=1e-9 * max(1.0, hi)):
            raise SpectrumError(f"grid step {step} does not divide {lo}..{hi}")
        return cls(lo + step * np.arange(n + 1))

    @classmethod
    def parse(cls, text: str) -> "WavelengthGrid":
        """Parse ``lo:hi:step`` (step optional, default 1 nm)."""
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise SpectrumError(f"grid must look like lo:hi[:step], got {text!r}")
        try:
            nums = [float(p) for p in parts]
        except ValueError as exc:
            raise SpectrumError(f"grid must look like lo:hi[:step], got {text!r}") from exc
        return cls.uniform(*nums)

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, WavelengthGrid):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(
            np.array_equal(self.points, other.points)
        )

    def __hash__(self) -> int:
        return hash(self.points.tobytes())

    @property
    def span(self) -> tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])


def default_grid() -> WavelengthGrid:
    """Analysis grid: 1500-2100 nm inclusive at 1 nm pitch (601 points)."""
    return WavelengthGrid.uniform(1500.0, 2100.0, 1.0)


@dataclass(frozen=True, eq=False)
class TransmittanceSpectrum:
    """Transmittance values in dB aligned to a wavelength grid.

    ``uncertainty_db`` holds optional non-negative half-widths. Passivity
    (values <= 0 dB) is checked at ingestion time, not here, so that
    intermediate results such as reduced scans can carry gain.
    """

    grid: WavelengthGrid
    values_db: np.ndarray
    uncertainty_db: np.ndarray | None = None

    def __post_init__(self):
        vals = _frozen(np.atleast_1d(self.values_db))
        if vals.shape != (len(self.grid),):
            raise SpectrumError(
                f"{vals.size} values for a grid of {len(self.grid)} points"
            )
        if not np.all(np.isfinite(vals)):
            bad = self.grid.points[~np.isfinite(vals)][0]
            raise SpectrumError(f"non-finite transmittance at {bad:g} nm")
        object.__setattr__(self, "values_db", vals)
        if self.uncertainty_db is not None:
            unc = _frozen(np.atleast_1d(self.uncertainty_db))
            if unc.shape != vals.shape:
                raise SpectrumError("uncertainty length does not match the grid")
            if not np.all(np.isfinite(unc)) or np.any(unc < 0):
                raise SpectrumError("uncertainties must be finite and >= 0 dB")
            object.__setattr__(self, "uncertainty_db", unc)

    @classmethod
    def flat(cls, grid: WavelengthGrid, value_db: float) -> "TransmittanceSpectrum":
        return cls(grid, np.full(len(grid), float(value_db)))

    @property
    def wavelengths(self) -> np.ndarray:
        return self.grid.points

    def is_passive(self) -> bool:
        return bool(np.all(self.values_db <= 0))

    def require_passive(self, label: str = "spectrum") -> "TransmittanceSpectrum":
        if not self.is_passive():
            i = int(np.argmax(self.values_db > 0))
            raise SpectrumError(
                f"{label}: positive transmittance {self.values_db[i]:g} dB at "
                f"{self.grid.points[i]:g} nm (swapped I_ref/I_mes columns? "
                "pass allow_gain to accept)"
            )
        return self

    def at(self, wavelength_nm: float) -> float:
        """Transmittance at one wavelength, linearly interpolated in dB."""
        lo, hi = self.grid.span
        if not lo <= wavelength_nm <= hi:
            raise SpectrumError(f"{wavelength_nm:g} nm outside spectrum span {lo:g}-{hi:g} nm")
        return float(np.interp(wavelength_nm, self.grid.points, self.values_db))

    def shifted(self, delta_db: float) -> "TransmittanceSpectrum":
        return TransmittanceSpectrum(self.grid, self.values_db + delta_db, self.uncertainty_db)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TransmittanceSpectrum):
            return NotImplemented
        if self.grid != other.grid or not np.array_equal(self.values_db, other.values_db):
            return False
        if (self.uncertainty_db is None) != (other.uncertainty_db is None):
            return False
        return self.uncertainty_db is None or bool(
            np.array_equal(self.uncertainty_db, other.uncertainty_db)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class RawScan:
    """Intensity scan with and without an element under test.

    ``i_ref`` is measured without the element, ``i_mes`` with it, and
    ``t_f`` is the linear transmission of the neutral filters in the beam.
    """

    grid: WavelengthGrid
    i_ref: np.ndarray
    i_mes: np.ndarray
    t_f: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.grid)
        t_f = np.ones(n) if self.t_f is None else self.t_f
        for name, raw in (("i_ref", self.i_ref), ("i_mes", self.i_mes), ("t_f", t_f)):
            arr = _frozen(np.broadcast_to(np.asarray(raw, dtype=float), (n,)))
            bad = ~np.isfinite(arr) | (arr <= 0)
            if name == "t_f":
                bad |= arr > 1
            if np.any(bad):
                where = self.grid.points[bad][0]
                rule = "in (0, 1]" if name == "t_f" else "> 0"
                raise SpectrumError(f"{name} must be {rule}; violated at {where:g} nm")
            object.__setattr__(self, name, arr)


def db_to_linear(x_db):
    """``10**(x/10)``; accepts scalars or arrays."""
    out = np.power(10.0, np.asarray(x_db, dtype=float) / 10.0)
    return out if np.ndim(x_db) else float(out)


def linear_to_db(ratio):
    """``10*log10(r)`` for r > 0."""
    r = np.asarray(ratio, dtype=float)
    if np.any(~(r > 0)):
        raise SpectrumError("linear ratio must be > 0 to convert to dB")
    out = 10.0 * np.log10(r)
    return out if np.ndim(ratio) else float(out)


def reduce_raw_scan(raw: RawScan) -> TransmittanceSpectrum:
    """Convert a raw intensity scan into transmittance.

    Uses ``T_dB = -10 log10(I_ref * T_f / I_mes)`` pointwise, exactly as
    the measurement procedure is written. No clamping is applied, so a
    filter with ``T_f < 1`` and equal intensities produces positive dB.
    """
    return TransmittanceSpectrum(raw.grid, -10.0 * np.log10(raw.i_ref * raw.t_f / raw.i_mes))


OUT_OF_RANGE_POLICIES = ("error", "clamp-to-edge", "fill")


def resample(
    s: TransmittanceSpectrum,
    target: WavelengthGrid,
    policy: str = "error",
    fill_db: float = 0.0,
) -> TransmittanceSpectrum:
    """Linearly interpolate ``s`` (in dB) onto ``target``.

    Parameters
    ----------
    policy : {"error", "clamp-to-edge", "fill"}
        What to do with target points outside the source span. ``fill``
        writes ``fill_db`` there.
    """
    if policy not in OUT_OF_RANGE_POLICIES:
        raise SpectrumError(f"unknown out-of-range policy {policy!r}")
    if s.grid == target:
        return s
    src = s.grid.points
    x = target.points
    outside = (x < src[0]) | (x > src[-1])
    if policy == "error" and np.any(outside):
        raise SpectrumError(
            f"target grid {target.span[0]:g}-{target.span[1]:g} nm exceeds "
            f"source span {src[0]:g}-{src[-1]:g} nm"
        )
    values = np.interp(x, src, s.values_db)
    unc = None
    if s.uncertainty_db is not None:
        unc = np.interp(x, src, s.uncertainty_db)
    if policy == "fill":
        values[outside] = fill_db
        if unc is not None:
            unc[outside] = 0.0
    return TransmittanceSpectrum(target, values, unc)


def _check_aligned(a: TransmittanceSpectrum, b: TransmittanceSpectrum) -> None:
    if a.grid != b.grid:
        raise SpectrumError("spectra are on different grids; resample first")


def add_db(a: TransmittanceSpectrum, b: TransmittanceSpectrum) -> TransmittanceSpectrum:
    """Cascade two elements: pointwise dB sum, uncertainties in quadrature."""
    _check_aligned(a, b)
    unc = None
    if a.uncertainty_db is not None and b.uncertainty_db is not None:
        unc = np.hypot(a.uncertainty_db, b.uncertainty_db)
    return TransmittanceSpectrum(a.grid, a.values_db + b.values_db, unc)


def sum_db(spectra: Sequence[TransmittanceSpectrum], grid: WavelengthGrid) -> TransmittanceSpectrum:
    """dB sum of any number of aligned spectra; the empty sum is 0 dB flat.

    Uncertainty is kept only when every term carries one.
    """
    for s in spectra:
        if s.grid != grid:
            raise SpectrumError("spectra are on different grids; resample first")
    if not spectra:
        return TransmittanceSpectrum.flat(grid, 0.0)
    # correctly rounded per-wavelength sums: independent of term order and
    # monotone when a non-positive term is added
    stack = np.array([s.values_db for s in spectra])
    values = np.array([math.fsum(col) for col in stack.T])
    unc = None
    if all(s.uncertainty_db is not None for s in spectra):
        unc = np.sqrt(np.array([math.fsum(col) for col in (np.array([s.uncertainty_db for s in spectra]) ** 2).T]))
    return TransmittanceSpectrum(grid, values, unc)


# --- CSV I/O -----------------------------------------------------------------

SPECTRUM_HEADER = ("wavelength_nm", "transmittance_db")
RAW_HEADER = ("wavelength_nm", "i_ref", "i_mes", "t_f")


def fmt(x: float) -> str:
    """Canonical 6-significant-digit number formatting for all outputs."""
    s = f"{x:.6g}"
    return "0" if s == "-0" else s


def _rows(text: str):
    """Yield (line_no, fields) for non-comment, non-blank CSV lines."""
    reader = csv.reader(io.StringIO(text))
    for line_no, row in enumerate(reader, start=1):
        if not row or not "".join(row).strip():
            continue
        if row[0].lstrip().startswith("#"):
            continue
        yield line_no, [c.strip() for c in row]


def read_table(path: Path, required: Sequence[str], optional: Sequence[str] = ()):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpectrumError(f"{path}: cannot read ({exc.strerror})") from exc
    rows = _rows(text)
    try:
        line_no, header = next(rows)
    except StopIteration:
        raise SpectrumError(f"{path}: empty file") from None
    allowed = tuple(required) + tuple(optional)
    if tuple(header[: len(required)]) != tuple(required) or any(h not in allowed for h in header):
        raise SpectrumError(
            f"{path}:{line_no}: header must be {','.join(required)}"
            + (f"[,{','.join(optional)}]" if optional else "")
            + f", got {','.join(header)}"
        )
    cols: dict[str, list[float]] = {h: [] for h in header}
    for line_no, fields in rows:
        if len(fields) != len(header):
            raise SpectrumError(f"{path}:{line_no}: expected {len(header)} fields, got {len(fields)}")
        for h, v in zip(header, fields):
            try:
                x = float(v)
            except ValueError:
                raise SpectrumError(f"{path}:{line_no}: {h} is not a number: {v!r}") from None
            if not math.isfinite(x):
                raise SpectrumError(f"{path}:{line_no}: {h} is not finite")
            cols[h].append(x)
    if not cols[header[0]]:
        raise SpectrumError(f"{path}: no data rows")
    wl = cols["wavelength_nm"]
    for k in range(1, len(wl)):
        if wl[k] <= wl[k - 1]:
            raise SpectrumError(f"{path}: wavelengths not strictly increasing at row {k + 1} ({wl[k]:g} nm)")
    return {h: np.array(v) for h, v in cols.items()}


def read_spectrum_csv(path, allow_gain: bool = False) -> TransmittanceSpectrum:
    """Load ``wavelength_nm,transmittance_db[,uncertainty_db]``.

    Positive dB values are rejected unless ``allow_gain`` is set.
    """
    cols = read_table(path, SPECTRUM_HEADER, ("uncertainty_db",))
    try:
        s = TransmittanceSpectrum(
            WavelengthGrid(cols["wavelength_nm"]),
            cols["transmittance_db"],
            cols.get("uncertainty_db"),
        )
    except SpectrumError as exc:
        raise SpectrumError(f"{path}: {exc}") from None
    if not allow_gain:
        s.require_passive(str(path))
    return s


def read_raw_scan_csv(path, t_f: np.ndarray | None = None) -> RawScan:
    """Load ``wavelength_nm,i_ref,i_mes,t_f``.

    The ``t_f`` column may be omitted when a filter transmission array is
    passed explicitly.
    """
    cols = read_table(path, RAW_HEADER[:3], ("t_f",))
    if t_f is None:
        if "t_f" not in cols:
            raise SpectrumError(f"{path}: no t_f column and no filter transmission given")
        t_f = cols["t_f"]
    try:
        return RawScan(WavelengthGrid(cols["wavelength_nm"]), cols["i_ref"], cols["i_mes"], t_f)
    except SpectrumError as exc:
        raise SpectrumError(f"{path}: {exc}") from None


def spectrum_to_csv(s: TransmittanceSpectrum, comment: str | None = None) -> str:
    out = io.StringIO()
    if comment:
        for line in comment.splitlines():
            out.write(f"# {line}\n")
    header = list(SPECTRUM_HEADER)
    if s.uncertainty_db is not None:
        header.append("uncertainty_db")
    out.write(",".join(header) + "\n")
    for i, wl in enumerate(s.grid.points):
        row = [fmt(wl), fmt(s.values_db[i])]
        if s.uncertainty_db is not None:
            row.append(fmt(s.uncertainty_db[i]))
        out.write(",".join(row) + "\n")
    return out.getvalue()
