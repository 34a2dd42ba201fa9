"""Eavesdropper photon budget and Holevo information bound.

Pipeline per wavelength: composite transmittance T (dB) -> mean photon
number of the returning probe mu_p -> Holevo quantity chi(mu_p). Grid
points where chi exceeds the tolerance form loophole intervals.
"""

from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .spectrum import TransmittanceSpectrum, WavelengthGrid, fmt

PLANCK = 6.62607015e-34  # J s, exact
LIGHT_SPEED = 299792458.0  # m/s, exact
FIBER_FUSE_CAP_W = 10.0
PHOTON_ENERGY_MODES = ("per_wavelength", "fixed_1550")


class SecurityError(ValueError):
    pass


@dataclass(frozen=True)
class ProbeBudget:
    """Eve's probe assumptions.

    ``sideband_ratio_m`` is the fraction of probe power in the
    phase-carrying sidebands. Input powers above the ~10 W fibre-fuse
    limit are allowed but flagged via :attr:`exceeds_fiber_fuse_cap`.
    """

    input_power_w: float = FIBER_FUSE_CAP_W
    sideband_ratio_m: float = 0.1
    rep_rate_hz: float = 1e8
    photon_energy_mode: str = "per_wavelength"

    def __post_init__(self):
        if not (math.isfinite(self.input_power_w) and self.input_power_w >= 0):
            raise SecurityError("input power must be finite and >= 0 W")
        if not 0 <= self.sideband_ratio_m <= 1:
            raise SecurityError(f"sideband ratio must be in [0, 1], got {self.sideband_ratio_m}")
        if not (math.isfinite(self.rep_rate_hz) and self.rep_rate_hz > 0):
            raise SecurityError("repetition rate must be > 0 Hz")
        if self.photon_energy_mode not in PHOTON_ENERGY_MODES:
            raise SecurityError(f"photon_energy_mode must be one of {PHOTON_ENERGY_MODES}")

    @property
    def exceeds_fiber_fuse_cap(self) -> bool:
        return self.input_power_w > FIBER_FUSE_CAP_W

    @classmethod
    def from_json(cls, obj) -> "ProbeBudget":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise SecurityError(f"unknown budget field(s): {', '.join(sorted(unknown))}")
        return cls(**obj)

    def to_json(self) -> dict:
        return {**asdict(self), "exceeds_fiber_fuse_cap": self.exceeds_fiber_fuse_cap}


@dataclass(frozen=True)
class SecurityThresholds:
    chi_max: float = 1e-2
    t_secure_db: float = -140.0

    def __post_init__(self):
        if not 0 < self.chi_max < 1:
            raise SecurityError(f"chi_max must be in (0, 1), got {self.chi_max}")
        if not math.isfinite(self.t_secure_db):
            raise SecurityError("t_secure_db must be finite")

    @classmethod
    def from_json(cls, obj) -> "SecurityThresholds":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise SecurityError(f"unknown threshold field(s): {', '.join(sorted(unknown))}")
        return cls(**obj)


def photon_energy(lambda_nm, mode: str = "per_wavelength"):
    """Photon energy in joules; ``fixed_1550`` ignores ``lambda_nm``."""
    if mode == "fixed_1550":
        lam = np.full(np.shape(lambda_nm), 1550.0)
    else:
        lam = np.asarray(lambda_nm, dtype=float)
    out = PLANCK * LIGHT_SPEED / (lam * 1e-9)
    return out if np.ndim(lambda_nm) else float(out)


def mean_photon_number(t_db, lambda_nm, budget: ProbeBudget = ProbeBudget()):
    """Mean photon number per modulation period leaving the module.

    ``mu_p = M * P * 10**(T/10) / (E_ph * f_rep)``. ``T`` is the full
    double-pass composite, reflection included.
    """
    t = np.asarray(t_db, dtype=float)
    e_ph = photon_energy(lambda_nm, budget.photon_energy_mode)
    mu = budget.sideband_ratio_m * budget.input_power_w * np.power(10.0, t / 10.0) / (e_ph * budget.rep_rate_hz)
    return mu if np.ndim(mu) else float(mu)


def log10_photon_scale(lambda_nm: float = 1550.0, budget: ProbeBudget = ProbeBudget()) -> float:
    """``log10(P / (E_ph f_rep))``: the additive exponent in mu_p = M 10**(T/10 + k)."""
    return math.log10(budget.input_power_w / (photon_energy(lambda_nm, budget.photon_energy_mode) * budget.rep_rate_hz))


def binary_entropy(x):
    """``h(x) = -x log2 x - (1-x) log2(1-x)`` with ``h(0) = h(1) = 0``."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise SecurityError("binary entropy argument must be in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(x > 0, -x * np.log2(np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, -(1 - x) * np.log1p(-np.where(x < 1, x, 0.0)) / math.log(2), 0.0)
    out = a + b
    return out if np.ndim(out) else float(out)


def holevo_two_state(mu):
    """Holevo quantity of two equiprobable phase states with overlap ``exp(-2 mu)``."""
    m = np.asarray(mu, dtype=float)
    if np.any(~(m >= 0)):
        raise SecurityError("mean photon number must be >= 0")
    # (1 - e^{-2mu})/2 via expm1 keeps precision for tiny mu
    chi = np.clip(binary_entropy(-np.expm1(-2.0 * m) / 2.0), 0.0, 1.0)
    return chi if np.ndim(chi) else float(chi)


def von_neumann_entropy(eigenvalues) -> float:
    """Entropy in bits of a spectrum of density-matrix eigenvalues."""
    ev = np.asarray(eigenvalues, dtype=float)
    ev = ev[ev > 0]
    return float(-np.sum(ev * np.log2(ev)))


def holevo_general(gram, probs, atol: float = 1e-9) -> float:
    """Holevo quantity of a pure-state ensemble from its Gram matrix.

    For pure states the average-state entropy term vanishes and
    ``S(sum_k p_k |psi_k><psi_k|)`` equals the entropy of the eigenvalues
    of ``sqrt(P) G sqrt(P)``, so no explicit state vectors are needed.

    Parameters
    ----------
    gram : array_like, shape (n, n)
        Overlaps ``<psi_i|psi_j>``; Hermitian, PSD, unit diagonal.
    probs : array_like, shape (n,)
        Prior probabilities.
    """
    g = np.atleast_2d(np.asarray(gram, dtype=complex))
    p = np.atleast_1d(np.asarray(probs, dtype=float))
    n = p.size
    if g.shape != (n, n):
        raise SecurityError(f"Gram matrix shape {g.shape} does not match {n} probabilities")
    if np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=atol):
        raise SecurityError("probabilities must be non-negative and sum to 1")
    if not np.allclose(g, g.conj().T, atol=atol):
        raise SecurityError("Gram matrix must be Hermitian")
    if not np.allclose(np.diag(g).real, 1.0, atol=atol):
        raise SecurityError("Gram matrix must have a unit diagonal (normalised states)")
    if np.linalg.eigvalsh(g).min() < -atol:
        raise SecurityError("Gram matrix must be positive semidefinite")
    sq = np.sqrt(p)
    weighted = sq[:, None] * g * sq[None, :]
    return max(0.0, von_neumann_entropy(np.linalg.eigvalsh(weighted)))


def two_state_gram(overlap: float) -> np.ndarray:
    return np.array([[1.0, overlap], [overlap, 1.0]])


def loophole_intervals(grid: WavelengthGrid, mask) -> list[tuple[float, float]]:
    """Maximal runs of ``True`` in ``mask`` as closed (lo_nm, hi_nm) pairs."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return []
    edges = np.diff(np.concatenate(([0], mask.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1) - 1
    pts = grid.points
    return [(float(pts[a]), float(pts[b])) for a, b in zip(starts, stops)]


@dataclass(frozen=True, eq=False)
class InfoBoundCurve:
    grid: WavelengthGrid
    t_db: np.ndarray
    mu_p: np.ndarray
    chi: np.ndarray
    loopholes: list[tuple[float, float]]
    budget: ProbeBudget = field(default_factory=ProbeBudget)
    thresholds: SecurityThresholds = field(default_factory=SecurityThresholds)

    @property
    def worst_index(self) -> int:
        # mu_p does not saturate the way chi does, so it ranks points reliably
        return int(np.argmax(self.mu_p)) if np.any(self.mu_p > 0) else int(np.argmax(self.t_db))

    @property
    def worst_chi(self) -> float:
        return float(self.chi.max())

    @property
    def secure(self) -> bool:
        return not self.loopholes

    def worst_point(self) -> dict:
        i = self.worst_index
        return {
            "wavelength_nm": float(self.grid.points[i]),
            "t_db": float(self.t_db[i]),
            "mu_p": float(self.mu_p[i]),
            "chi": float(self.chi[i]),
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("wavelength_nm,t_db,mu_p,chi\n")
        for row in zip(self.grid.points, self.t_db, self.mu_p, self.chi):
            out.write(",".join(fmt(v) for v in row) + "\n")
        return out.getvalue()

    def report(self) -> dict:
        i_max = int(np.argmax(self.t_db))
        i_min = int(np.argmin(self.t_db))
        return {
            "secure": self.secure,
            "loopholes": [{"lo_nm": lo, "hi_nm": hi} for lo, hi in self.loopholes],
            "worst": self.worst_point(),
            "t_max": {"wavelength_nm": float(self.grid.points[i_max]), "t_db": float(self.t_db[i_max])},
            "t_min": {"wavelength_nm": float(self.grid.points[i_min]), "t_db": float(self.t_db[i_min])},
            "below_t_secure": bool(np.all(self.t_db <= self.thresholds.t_secure_db)),
            "budget": self.budget.to_json(),
            "thresholds": asdict(self.thresholds),
            "grid": {"lo_nm": self.grid.span[0], "hi_nm": self.grid.span[1], "points": len(self.grid)},
        }


def evaluate(
    composite: TransmittanceSpectrum,
    budget: ProbeBudget = ProbeBudget(),
    thresholds: SecurityThresholds = SecurityThresholds(),
) -> InfoBoundCurve:
    """Run T -> mu_p -> chi on every grid point and locate loopholes."""
    t = np.array(composite.values_db)
    mu = np.asarray(mean_photon_number(t, composite.grid.points, budget), dtype=float)
    chi = np.asarray(holevo_two_state(mu), dtype=float)
    return InfoBoundCurve(
        composite.grid, t, mu, chi, loophole_intervals(composite.grid, chi > thresholds.chi_max), budget, thresholds
    )
