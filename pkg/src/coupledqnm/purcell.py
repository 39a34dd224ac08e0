"""Classical Purcell factors and spectrum containers.

Model functions take internal frequencies (``c/a``) and points in units of
``a``; :class:`Spectrum` stores its grid in rad/s.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .cqt import HybridPair
from .disk import Geometry, find_bare_mode
from .oracle import DEFAULT_M_MAX
from .greens import green_nm, green_qnm, im_g_phase_decomposition
from .units import C_LIGHT

CSV_FORMAT = "{:.17g}"


def background_im_g(omega, c: float = C_LIGHT):
    """``Im G_B = omega^2 / (4 c^2)`` of the homogeneous 2D TM background.

    With ``c = 1`` this is the internal-unit value ``omega^2 / 4``.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    out = omega**2 / (4.0 * c**2)
    return out[()] if out.ndim == 0 else out


def _im_gb(omega):
    return background_im_g(omega, c=1.0)


def purcell_cqnm(pair: HybridPair, r0, omega):
    """``1 + Im G^QNM(r0, r0) / Im G_B`` from the two hybrid QNMs."""
    return 1.0 + np.imag(green_qnm(pair, r0, r0, omega)) / _im_gb(omega)


def purcell_cqnm_pm(pair: HybridPair, r0, omega, branch: str):
    """Contribution of one hybrid (``"+"`` or ``"-"``); may be negative."""
    tp, tm = im_g_phase_decomposition(pair, r0, omega)
    if branch == "+":
        return tp / _im_gb(omega)
    if branch == "-":
        return tm / _im_gb(omega)
    raise ValueError(f"branch must be '+' or '-', got {branch!r}")


def purcell_cnm(pair: HybridPair, r0, omega):
    """``1 + Im G^NM(r0, r0) / Im G_B``, the phase-free normal-mode form."""
    return 1.0 + np.imag(green_nm(pair, r0, r0, omega)) / _im_gb(omega)


@dataclass
class Spectrum:
    """Purcell spectra on a common grid.

    Attributes
    ----------
    omega_grid : ndarray
        Real angular frequencies in rad/s.
    columns : dict
        Model tag to dimensionless Purcell factor array.
    metadata : dict
        Geometry, dipole position, mode identifiers and per-column errors.
    """

    omega_grid: np.ndarray
    columns: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega_grid = np.asarray(self.omega_grid, dtype=float)
        for k, v in list(self.columns.items()):
            self.add(k, v)

    def add(self, tag: str, values):
        values = np.asarray(values, dtype=float)
        if values.shape != self.omega_grid.shape:
            raise ValueError(f"column {tag!r} has shape {values.shape}, grid has {self.omega_grid.shape}")
        self.columns[tag] = values

    def to_csv(self, path=None) -> str:
        """Write ``omega_rad_s,<tag>...`` rows with 17 significant digits."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        tags = list(self.columns)
        w.writerow(["omega_rad_s"] + tags)
        for i, om in enumerate(self.omega_grid):
            w.writerow([CSV_FORMAT.format(om)] + [CSV_FORMAT.format(self.columns[t][i]) for t in tags])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


# ---------------------------------------------------------------------------
# sweep orchestration

MODEL_TAGS = ("cQNM", "cQNM+", "cQNM-", "cNM", "cNMI", "qQNM", "qNM-JC", "qNMI", "oracle")
TERM_TAGS = tuple(f"{p}_{t}" for p in ("cNMI", "qNMI") for t in ("LL", "LR", "RL", "RR"))
ALL_TAGS = MODEL_TAGS + TERM_TAGS


@dataclass(frozen=True)
class SpectrumConfig:
    """Inputs of one spectrum run.

    ``span_gamma_R`` is the half-width of the grid in units of ``gamma_R``
    around ``omega_L`` (shifted by ``center_offset_gamma_R``).
    """

    geometry: Geometry
    dipole_side: str = "L"
    dipole_distance: float = 10e-9
    m: int = 37
    q: int = 1
    points: int = 400
    span_gamma_R: float = 25.0
    center_offset_gamma_R: float = 0.0
    models: tuple = ("cQNM",)
    M_max: int = DEFAULT_M_MAX
    threads: int = 1
    kappa_method: str = "addition"

    def __post_init__(self):
        bad = [t for t in self.models if t not in ALL_TAGS]
        if bad:
            raise ValueError(f"unknown model tag(s): {', '.join(bad)}")
        if self.points < 2:
            raise ValueError("points must be at least 2")
        if self.dipole_side not in ("L", "R"):
            raise ValueError("dipole_side must be 'L' or 'R'")


def bare_modes(geometry, m: int = 37, q: int = 1):
    """Bare QNMs of both disks, cached on the inputs that determine them."""
    return (_bare_cached(m, q, complex(geometry.n_L), geometry.n_B, geometry.radius_a, "L"),
            _bare_cached(m, q, complex(geometry.n_R), geometry.n_B, geometry.radius_a, "R"))


@lru_cache(maxsize=64)
def _bare_cached(m, q, n, n_B, a, label):
    return find_bare_mode(m, q, n, n_B=n_B, a=a, label=label)


def spectrum_grid(pair: HybridPair, points: int, span_gamma_R: float, offset_gamma_R: float = 0.0):
    """Uniform internal-frequency grid about ``omega_L``."""
    wl = pair.mode_L.ka.real
    gr = -pair.mode_R.ka.imag
    c = wl + offset_gamma_R * gr
    return np.linspace(c - span_gamma_R * gr, c + span_gamma_R * gr, points)


def spectrum_sweep(config: SpectrumConfig) -> Spectrum:
    """Evaluate every requested model column on the configured grid.

    A failing column is filled with NaN and its error recorded under
    ``metadata["errors"]``; oracle points fail individually.
    """
    from concurrent.futures import ThreadPoolExecutor

    from . import improved_nm, oracle, quantum
    from .cqt import hybridize

    g = config.geometry
    mL, mR = bare_modes(g, config.m, config.q)
    pair = hybridize(mL, mR, g, kappa_method=config.kappa_method)
    r0 = g.dipole_near(config.dipole_side, config.dipole_distance)
    w = spectrum_grid(pair, config.points, config.span_gamma_R, config.center_offset_gamma_R)
    unit = C_LIGHT / g.radius_a
    spec = Spectrum(w * unit, metadata={
        "geometry": {"radius_a": g.radius_a, "n_L": [complex(g.n_L).real, complex(g.n_L).imag],
                     "n_R": [complex(g.n_R).real, complex(g.n_R).imag], "n_B": g.n_B, "d_gap": g.d_gap},
        "dipole": {"side": config.dipole_side, "distance_m": config.dipole_distance,
                   "position_internal": list(r0)},
        "modes": {"m": config.m, "q": config.q, "omega_L": [mL.ka.real * unit, mL.ka.imag * unit],
                  "omega_R": [mR.ka.real * unit, mR.ka.imag * unit]},
        "errors": {},
    })
    cache: dict = {}

    def S():
        if "S" not in cache:
            cache["S"] = quantum.s_nrad_pole(pair)
        return cache["S"]

    def nmi():
        if "nmi" not in cache:
            cache["nmi"] = improved_nm.nmi_from_pair(pair)
        return cache["nmi"]

    def oracle_col():
        cfg = oracle.ScatterConfig(g, M_max=config.M_max)

        def one(x):
            try:
                return float(oracle.purcell_oracle(cfg, r0, [x])[0])
            except (oracle.LinearSystemError, ArithmeticError, ValueError):
                return np.nan

        with ThreadPoolExecutor(max_workers=max(1, config.threads)) as ex:
            vals = np.array(list(ex.map(one, w)))
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            spec.metadata["errors"]["oracle"] = {"failed_points": bad.tolist()}
        return vals

    builders = {
        "cQNM": lambda: purcell_cqnm(pair, r0, w),
        "cQNM+": lambda: purcell_cqnm_pm(pair, r0, w, "+"),
        "cQNM-": lambda: purcell_cqnm_pm(pair, r0, w, "-"),
        "cNM": lambda: purcell_cnm(pair, r0, w),
        "cNMI": lambda: improved_nm.purcell_cnmi(nmi(), r0, w)[0],
        "qQNM": lambda: quantum.purcell_quantum(S(), quantum.emitter_couplings(pair, S(), r0), w),
        "qNM-JC": lambda: quantum.purcell_qnm_jc(pair, r0, w),
        "qNMI": lambda: improved_nm.purcell_qnmi(nmi(), r0, w)[0],
        "oracle": oracle_col,
    }
    for t in ("LL", "LR", "RL", "RR"):
        builders[f"cNMI_{t}"] = lambda t=t: improved_nm.purcell_cnmi(nmi(), r0, w)[1][t]
        builders[f"qNMI_{t}"] = lambda t=t: improved_nm.purcell_qnmi(nmi(), r0, w)[1][t]
    for tag in config.models:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                spec.add(tag, builders[tag]())
        except Exception as exc:  # recorded per column, other columns continue
            spec.add(tag, np.full(w.shape, np.nan))
            spec.metadata["errors"][tag] = f"{type(exc).__name__}: {exc}"
    spec.metadata["pair"] = pair.si_dict()
    return spec
