"""Command-line driver.

Every run reads one TOML configuration (SI units) and writes deterministic
CSV/JSON artifacts plus a ``manifest.json`` holding the configuration echo,
package versions and wall times. Exit status: 0 success, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import scipy
import tomli

from . import __version__
from .disk import ConvergenceError, DegenerateNormError, Geometry, WrongRadialOrderError
from .oracle import DEFAULT_M_MAX
from .purcell import ALL_TAGS, SpectrumConfig, bare_modes, spectrum_sweep
from .units import C_LIGHT

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
PAPER_GAPS_NM = (600, 750, 800, 850, 900, 1000, 1100, 1200)
BENCH_GAPS_NM = (750, 800, 850, 900)
SUBCOMMANDS = ("bare", "hybridize", "sweep", "spectrum", "quantum", "dynamics", "oracle", "reproduce-paper")


class ConfigError(ValueError):
    """Invalid or unparseable run configuration."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class GeometryBlock:
    radius_a: float = 5e-6
    n_L: complex = 2 + 1e-5j
    n_R: complex = 2 + 1e-4j
    n_B: float = 1.0
    gaps: tuple = (800e-9,)
    dipole_sides: tuple = ("L",)
    dipole_distance: float = 10e-9


@dataclass(frozen=True)
class ModeBlock:
    m: int = 37
    q: int = 1


@dataclass(frozen=True)
class GridBlock:
    points: int = 400
    span_gamma_R: float = 25.0
    center_offset_gamma_R: float = 0.0


@dataclass(frozen=True)
class TruncationBlock:
    M_max: int = DEFAULT_M_MAX
    N_fock: int = 3
    disk_nr: int = 64
    disk_nphi: int = 256
    kappa_method: str = "addition"


@dataclass(frozen=True)
class DynamicsBlock:
    omega0_offset_gamma_L: float = 0.0
    coupling_target: float = 0.02
    points: int = 400
    span_decay_times: float = 3.0


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryBlock = field(default_factory=GeometryBlock)
    mode: ModeBlock = field(default_factory=ModeBlock)
    grid: GridBlock = field(default_factory=GridBlock)
    models: tuple = ("cQNM", "cNM", "cNMI", "qQNM", "qNM-JC", "qNMI", "oracle")
    truncation: TruncationBlock = field(default_factory=TruncationBlock)
    dynamics: DynamicsBlock = field(default_factory=DynamicsBlock)
    output_dir: str = "out"
    threads: int = 1

    def echo(self) -> dict:
        """Every effective parameter, JSON-ready."""
        def conv(v):
            if isinstance(v, complex):
                return [v.real, v.imag]
            if isinstance(v, tuple):
                return [conv(x) for x in v]
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            return v
        return conv(asdict(self))

    def geometry_for(self, gap: float) -> Geometry:
        g = self.geometry
        return Geometry(radius_a=g.radius_a, n_L=g.n_L, n_R=g.n_R, n_B=g.n_B, d_gap=gap)


def _complex(value, name):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(x, (int, float)) for x in value):
        return complex(value[0], value[1])
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", "").replace("i", "j"))
        except ValueError:
            pass
    raise ConfigError(f"{name}: expected a number, [re, im] pair or complex string, got {value!r}")


def _block(cls, data: dict, name: str, converters: dict | None = None):
    converters = converters or {}
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"[{name}]: unknown key(s) {', '.join(sorted(unknown))}")
    kw = {}
    for k, v in data.items():
        conv = converters.get(k)
        default = getattr(cls(), k)
        if conv is None and isinstance(default, int) and not isinstance(v, int):
            raise ConfigError(f"[{name}] {k}: expected an integer, got {v!r}")
        try:
            kw[k] = conv(v) if conv else type(default)(v)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{name}] {k}: {exc}") from None
    return cls(**kw)


def _tuple_of(kind, name):
    def conv(v):
        if not isinstance(v, (list, tuple)):
            v = [v]
        try:
            return tuple(kind(x) for x in v)
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: cannot convert {v!r}") from None
    return conv


def parse_config(text: str) -> RunConfig:
    """Parse and validate TOML text into a :class:`RunConfig`."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None
    allowed = {"geometry", "mode", "grid", "models", "truncation", "dynamics", "output", "run"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    gdata = dict(raw.get("geometry", {}))
    if "d_gap" in gdata:
        if "gaps" in gdata:
            raise ConfigError("[geometry]: give either d_gap or gaps, not both")
        gdata["gaps"] = gdata.pop("d_gap")
    if "dipole_side" in gdata:
        gdata["dipole_sides"] = gdata.pop("dipole_side")
    geom = _block(GeometryBlock, gdata, "geometry", {
        "n_L": lambda v: _complex(v, "n_L"), "n_R": lambda v: _complex(v, "n_R"),
        "gaps": _tuple_of(float, "gaps"), "dipole_sides": _tuple_of(str, "dipole_sides"),
    })
    mode = _block(ModeBlock, raw.get("mode", {}), "mode")
    grid = _block(GridBlock, raw.get("grid", {}), "grid")
    trunc = _block(TruncationBlock, raw.get("truncation", {}), "truncation")
    dyn = _block(DynamicsBlock, raw.get("dynamics", {}), "dynamics")
    models = raw.get("models", RunConfig.models)
    if isinstance(models, dict):
        models = models.get("list", RunConfig.models)
    models = _tuple_of(str, "models")(models)
    out = raw.get("output", {})
    run = raw.get("run", {})
    cfg = RunConfig(geom, mode, grid, models, trunc, dyn,
                    str(out.get("dir", RunConfig.output_dir)), int(run.get("threads", 1)))
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Raise :class:`ConfigError` naming the first violated invariant."""
    g = cfg.geometry
    bad = [t for t in cfg.models if t not in ALL_TAGS]
    if bad:
        raise ConfigError(f"unknown model tag(s): {', '.join(bad)}")
    if not g.gaps:
        raise ConfigError("at least one gap is required")
    for side in g.dipole_sides:
        if side not in ("L", "R"):
            raise ConfigError(f"dipole side must be 'L' or 'R', got {side!r}")
    if not g.dipole_distance > 0:
        raise ConfigError("dipole_distance must be positive (exterior emitter)")
    try:
        for gap in g.gaps:
            cfg.geometry_for(gap)
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from None
    if g.dipole_distance >= min(g.gaps):
        raise ConfigError("dipole_distance must be smaller than every gap")
    if cfg.mode.m < 0 or cfg.mode.q < 1:
        raise ConfigError("mode requires m >= 0 and q >= 1")
    if cfg.grid.points < 2 or cfg.grid.span_gamma_R <= 0:
        raise ConfigError("grid requires points >= 2 and span_gamma_R > 0")
    if cfg.truncation.M_max < cfg.mode.m + 15:
        raise ConfigError("truncation.M_max must be at least m + 15")
    if not 2 <= cfg.truncation.N_fock <= 6:
        raise ConfigError("truncation.N_fock must lie in [2, 6]")
    if cfg.truncation.kappa_method not in ("addition", "quadrature"):
        raise ConfigError("truncation.kappa_method must be 'addition' or 'quadrature'")
    if cfg.threads < 1:
        raise ConfigError("threads must be positive")


def load_config(path) -> RunConfig:
    """Read and validate a TOML configuration file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text())


def paper_config() -> RunConfig:
    """Geometry and mode of the reference study with its eight gaps."""
    return RunConfig(geometry=GeometryBlock(gaps=tuple(g / 1e9 for g in PAPER_GAPS_NM),
                                            dipole_sides=("L", "R")))


# ---------------------------------------------------------------------------
# artifacts


def _cz(z):
    z = complex(z)
    return [z.real, z.imag]


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _gap_tag(gap: float) -> str:
    return f"{int(round(gap * 1e9))}nm"


class Runner:
    """Executes subcommands and collects the manifest."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.out.mkdir(parents=True, exist_ok=True)
        self.timings: dict = {}
        self.failures: dict = {}
        self.artifacts: list = []
        self.unit = C_LIGHT / cfg.geometry.radius_a

    def _write(self, name: str, writer):
        path = self.out / name
        writer(path)
        self.artifacts.append(name)

    def _pair(self, gap):
        from .cqt import hybridize
        g = self.cfg.geometry_for(gap)
        mL, mR = bare_modes(g, self.cfg.mode.m, self.cfg.mode.q)
        t = self.cfg.truncation
        kw = {} if t.kappa_method == "addition" else {"nr": t.disk_nr, "nphi": t.disk_nphi}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return hybridize(mL, mR, g, kappa_method=t.kappa_method, **kw)

    def bare(self):
        g = self.cfg.geometry_for(self.cfg.geometry.gaps[0])
        for mode in bare_modes(g, self.cfg.mode.m, self.cfg.mode.q):
            self._write(f"bare_{mode.label}.json", lambda p, m=mode: _dump(p, m.to_dict()))

    def hybridize(self):
        for gap in self.cfg.geometry.gaps:
            pair = self._pair(gap)
            self._write(f"hybrid_{_gap_tag(gap)}.json", lambda p, pr=pair: _dump(p, pr.si_dict()))

    def sweep(self):
        rows = ["d_gap_m,omega_plus_re,omega_plus_im,omega_minus_re,omega_minus_im,"
                "kappa_LR_re,kappa_LR_im,kappa_RL_re,kappa_RL_im,near_ep"]
        f = "{:.17g}".format
        for gap in self.cfg.geometry.gaps:
            p = self._pair(gap)
            vals = [p.omega_plus, p.omega_minus, p.kappa_LR, p.kappa_RL]
            nums = [x for v in vals for x in (v.real * self.unit, v.imag * self.unit)]
            rows.append(",".join([f(gap)] + [f(x) for x in nums] + [str(int(p.near_ep))]))
        self._write("eigen_sweep.csv", lambda p: p.write_text("\n".join(rows) + "\n"))

    def _spectra(self, models, prefix):
        c = self.cfg
        for gap in c.geometry.gaps:
            for side in c.geometry.dipole_sides:
                sc = SpectrumConfig(c.geometry_for(gap), side, c.geometry.dipole_distance, c.mode.m, c.mode.q,
                                    c.grid.points, c.grid.span_gamma_R, c.grid.center_offset_gamma_R,
                                    tuple(models), c.truncation.M_max, c.threads, c.truncation.kappa_method)
                spec = spectrum_sweep(sc)
                name = f"{prefix}_{_gap_tag(gap)}_d{side}.csv"
                self._write(name, spec.to_csv)
                if spec.metadata["errors"]:
                    self.failures[name] = spec.metadata["errors"]

    def spectrum(self):
        self._spectra(self.cfg.models, "spectrum")

    def oracle(self):
        self._spectra(("oracle",), "oracle")

    def quantum(self):
        from . import quantum as qm
        prev = None
        out = {}
        for gap in sorted(self.cfg.geometry.gaps, reverse=True):
            pair = self._pair(gap)
            S = qm.s_nrad_pole(pair)
            Sf = qm.s_nrad_full(pair)
            entry = {"S_pole": [[_cz(x) for x in row] for row in S.entries],
                     "S_full": [[_cz(x) for x in row] for row in Sf.entries],
                     "S_assumption": "S = S_nrad (radiative part neglected)"}
            for side in self.cfg.geometry.dipole_sides:
                r0 = self.cfg.geometry_for(gap).dipole_near(side, self.cfg.geometry.dipole_distance)
                qp = qm.quantum_params(pair, r0, S, previous_U=prev)
                entry[f"d{side}"] = qp.to_dict()
            prev = qm.quantum_params(pair, None, S, previous_U=prev).U
            out[_gap_tag(gap)] = entry
        for tag in sorted(out, key=lambda s: int(s[:-2])):
            self._write(f"quantum_{tag}.json", lambda p, e=out[tag]: _dump(p, e))

    def dynamics(self):
        from . import dynamics as dy
        from . import quantum as qm
        c = self.cfg
        summary = {}
        for gap in c.geometry.gaps:
            pair = self._pair(gap)
            S = qm.s_nrad_pole(pair)
            w0 = pair.mode_L.ka.real + c.dynamics.omega0_offset_gamma_L * (-pair.mode_L.ka.imag)
            for side in c.geometry.dipole_sides:
                r0 = c.geometry_for(gap).dipole_near(side, c.geometry.dipole_distance)
                qp = qm.quantum_params(pair, r0, S)
                cpl = qm.emitter_couplings(pair, S, r0)
                scale = dy.bad_cavity_scale(cpl.gs, -pair.omegas.imag, c.dynamics.coupling_target)
                expected = float(qm.gamma_qqnm(S, cpl, w0)[0]) * scale**2
                H, A, R, ops = dy.qnm_transformed_system(qp, w0, c.truncation.N_fock, scale)
                rate, traj = dy.decay_run(H, A, R, ops, expected, c.dynamics.span_decay_times,
                                          c.dynamics.points, time_unit=1.0 / self.unit)
                name = f"trajectory_{_gap_tag(gap)}_d{side}.csv"
                self._write(name, traj.to_csv)
                summary[name] = {"fitted_rate_rad_s": rate * self.unit,
                                 "gamma_qqnm_rad_s": expected * self.unit,
                                 "relative_difference": rate / expected - 1,
                                 "dipole_scale": scale, "max_trace_error": float(traj.trace_error.max())}
        self._write("dynamics_summary.json", lambda p: _dump(p, summary))

    def fields(self, nx: int = 161, ny: int = 61):
        """Hybrid-mode field maps over both disks, one CSV per gap and branch."""
        from .cqt import eval_hybrid_field
        from .disk import field_grid_rows
        a = self.cfg.geometry.radius_a
        header = "x_m,y_m,re_f,im_f,abs2_f,cos2phi_f,sin2phi_f"
        f = "{:.17g}".format
        for gap in self.cfg.geometry.gaps:
            pair = self._pair(gap)
            half = 2.0 + 0.5 * gap / a + 0.2
            xs, ys = np.linspace(-half, half, nx), np.linspace(-1.2, 1.2, ny)
            for branch, tag in (("+", "plus"), ("-", "minus")):
                rows = field_grid_rows(lambda X, Y, b=branch: eval_hybrid_field(pair, b, X, Y), xs, ys)
                rows[:, :2] *= a
                text = "\n".join([header] + [",".join(f(v) for v in r) for r in rows]) + "\n"
                self._write(f"field_{_gap_tag(gap)}_{tag}.csv", lambda p, t=text: p.write_text(t))

    def reproduce_paper(self):
        for step in ("bare", "hybridize", "sweep", "fields", "spectrum", "quantum", "dynamics"):
            self.run_step(step)

    def run_step(self, name):
        t0 = time.perf_counter()
        getattr(self, name.replace("-", "_"))()
        self.timings[name] = time.perf_counter() - t0

    def manifest(self, command: str, started: str) -> dict:
        return {
            "command": command,
            "started_utc": started,
            "config": self.cfg.echo(),
            "internal_units": {"length": "disk radius a (m)", "frequency": "c/a (rad/s)",
                               "frequency_unit_rad_s": self.unit},
            "versions": {"coupledqnm": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                         "python": platform.python_version()},
            "wall_times_s": self.timings,
            "artifacts": self.artifacts,
            "failures": self.failures,
        }


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coupledqnm", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="TOML configuration file; defaults apply when omitted")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--threads", type=int, help="worker threads for frequency grids")
    ap.add_argument("--models", help="comma-separated model tags (overrides the config)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = load_config(args.config)
        elif args.command == "reproduce-paper":
            cfg = paper_config()
        else:
            cfg = RunConfig()
        if args.models:
            cfg = replace(cfg, models=tuple(t.strip() for t in args.models.split(",") if t.strip()))
        if args.threads is not None:
            cfg = replace(cfg, threads=args.threads)
        if args.out:
            cfg = replace(cfg, output_dir=args.out)
        validate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    started = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    runner = Runner(cfg, Path(cfg.output_dir))
    status = EXIT_OK
    try:
        runner.run_step(args.command)
    except (ConvergenceError, WrongRadialOrderError, DegenerateNormError, ArithmeticError,
            np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        runner.failures[args.command] = f"{type(exc).__name__}: {exc}"
        print(f"numerical failure: {exc}", file=sys.stderr)
        status = EXIT_NUMERIC
    _dump(runner.out / "manifest.json", runner.manifest(args.command, started))
    return status


if __name__ == "__main__":
    sys.exit(main())
