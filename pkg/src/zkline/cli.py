"""Command-line front end: configuration, experiment runners, and file I/O.

Subcommands
    spectrum   tabulate the transverse instability spectrum at c_star
    simulate   drive the full flow and record snapshots + a time series
    decompose  split a stored snapshot into its spectral blocks
    shoot      realize graph coefficients above sampled base points
    distance   measure the quasi-distance axioms on random tube states
    sweep      run an exit-time scan over a (c, L) product grid

Configuration is plain text, one ``key = value`` per line with ``#``
comments; every key can also be set on the command line via
``--set key=value``.  All text outputs start with a ``# key = value``
metadata block echoing the parsed configuration, and floats are written
with 17 significant digits so that identical configurations reproduce
byte-identical files.

Exit codes: 0 on success, 2 for configuration errors, 3 when the
computation itself fails (blowup, non-convergence, resonance, ...).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import math
import struct
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .decomp import decompose, energy_report, fit_modulation, project
from .dynamics import ModulatedState
from .errors import ConfigError, ZkError, NumericsError
from .grid import Field2D, Grid2D, energy, h1_norm, mass
from .manifold import exit_time, shoot_graph, tube_distance
from .metric import MobileParams, distance_prepared, prepare_state
from .soliton import q_values
from .spectral import apply_l_x, check_pairing_sign, unstable_modes

FORMAT_VERSION = "zkline-1"
_SNAP_MAGIC = b"ZKS1"


@dataclass(frozen=True)
class RunConfig:
    """Parsed run configuration; field order is the echo order."""

    c_star: float = 1.0
    L: float = 1.0
    nx: int = 128
    ny: int = 8
    x_half_width: float = 24.0
    dt: float = 0.01
    t_max: float = 10.0
    delta: float = 0.01
    epsilon: float = 0.01
    seed: int = 0
    output_dir: str = "zkline-out"
    # command-specific options
    write_modes: int = 0  # spectrum: also dump eigenfunction samples
    initial: str = "soliton"  # simulate: soliton | mode | <file>.zks
    amplitude: float = 1e-3  # simulate "mode" / sweep perturbation size
    snapshot_every: float = 0.5  # simulate: snapshot cadence (time units)
    radius: float = 1e-3  # shoot: sample radius (0 = the soliton itself)
    n_shots: int = 1  # shoot: number of sampled base points
    n_samples: int = 20  # distance: number of sampled state triples
    input: str = ""  # decompose: path of the snapshot to split
    sweep_c: str = ""  # sweep: comma-separated speeds
    sweep_l: str = ""  # sweep: comma-separated torus scales (default: L)
    workers: int = 1  # sweep: worker processes


_FIELDS = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _convert(key: str, raw: str, where: str) -> object:
    kind = _FIELDS[key]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: invalid value for '{key}': {raw!r}") from exc


def parse_config_text(text: str, source: str = "<config>") -> dict[str, object]:
    """Parse ``key = value`` lines; unknown keys are rejected with their
    line number."""
    out: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        bare = line.split("#", 1)[0].strip()
        if not bare:
            continue
        if "=" not in bare:
            raise ConfigError(f"{source}, line {lineno}: expected 'key = value'")
        key, _, raw = bare.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"{source}, line {lineno}: unknown key '{key}'")
        out[key] = _convert(key, raw, f"{source}, line {lineno}")
    return out


def load_config(path: str | None, overrides: list[str]) -> RunConfig:
    values: dict[str, object] = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {p}: {exc}") from exc
        values.update(parse_config_text(text, source=str(p)))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"--set: unknown key '{key}'")
        values[key] = _convert(key, raw, "--set")
    return RunConfig(**values)


def _validate(cfg: RunConfig) -> None:
    def positive(name: str) -> None:
        if not (getattr(cfg, name) > 0):
            raise ConfigError(f"{name} must be positive")

    for name in ("c_star", "L", "x_half_width", "dt", "t_max", "delta", "epsilon"):
        positive(name)
    for name, floor in (("nx", 32), ("ny", 8)):
        n = getattr(cfg, name)
        if n < floor or (n & (n - 1)) != 0:
            raise ConfigError(f"{name} must be a power of two >= {floor}")
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative")
    if cfg.n_shots < 1 or cfg.n_samples < 1 or cfg.workers < 1:
        raise ConfigError("n_shots, n_samples and workers must be at least 1")
    if cfg.amplitude < 0 or cfg.radius < 0:
        raise ConfigError("amplitude and radius must be nonnegative")
    if cfg.snapshot_every <= 0:
        raise ConfigError("snapshot_every must be positive")


# -- serialization helpers -----------------------------------------------------


def _fmt(value: object) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _metadata(cfg: RunConfig, command: str, extra: dict[str, object] | None = None):
    lines = [f"# format = {FORMAT_VERSION}", f"# command = {command}"]
    for f in dataclasses.fields(RunConfig):
        lines.append(f"# {f.name} = {_fmt(getattr(cfg, f.name))}")
    for key, value in (extra or {}).items():
        lines.append(f"# {key} = {_fmt(value)}")
    return lines

def _write_csv(
    path: Path,
    cfg: RunConfig,
    command: str,
    header: list[str],
    rows: list[list[object]],
    extra: dict[str, object] | None = None,
) -> None:
    lines = _metadata(cfg, command, extra)
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_snapshot(
    path: Path, grid: Grid2D, values: np.ndarray, t: float, c: float, rho: float
) -> None:
    """Binary snapshot: magic ZKS1, u32 nx, u32 ny, f64 x_half_width,
    torus_scale, t, c, rho, then nx*ny f64 samples (x fastest), all
    little-endian."""
    with open(path, "wb") as fh:
        fh.write(_SNAP_MAGIC)
        fh.write(struct.pack("<II", grid.nx, grid.ny))
        fh.write(
            struct.pack("<5d", grid.x_half_width, grid.torus_scale, t, c, rho)
        )
        fh.write(np.asarray(values, dtype="<f8").tobytes(order="F"))


def read_snapshot(path: Path) -> tuple[Field2D, float, float, float]:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read snapshot {path}: {exc}") from exc
    if buf[:4] != _SNAP_MAGIC:
        raise ConfigError(f"{path}: not a ZKS1 snapshot")
    nx, ny = struct.unpack_from("<II", buf, 4)
    x_half_width, torus_scale, t, c, rho = struct.unpack_from("<5d", buf, 12)
    if len(buf) != 52 + 8 * nx * ny:
        raise ConfigError(f"{path}: truncated snapshot")
    flat = np.frombuffer(buf, dtype="<f8", count=nx * ny, offset=52)
    values = flat.reshape((nx, ny), order="F").copy()
    try:
        grid = Grid2D(x_half_width, nx, torus_scale, ny)
    except ValueError as exc:
        raise ConfigError(f"{path}: bad grid header: {exc}") from exc
    return Field2D(grid, values), t, c, rho


def _grid_of(cfg: RunConfig) -> Grid2D:
    try:
        return Grid2D(cfg.x_half_width, cfg.nx, cfg.L, cfg.ny)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _soliton_2d(grid: Grid2D, c: float) -> np.ndarray:
    return np.repeat(q_values(c, grid.x)[:, None], grid.ny, axis=1)


# -- spectrum -------------------------------------------------------------------


def cmd_spectrum(cfg: RunConfig) -> None:
    grid = _grid_of(cfg)
    spec = unstable_modes(cfg.c_star, grid)
    rows: list[list[object]] = []
    for mode in spec.modes:
        self_pair, _ = check_pairing_sign(mode, cfg.c_star, grid)
        a = (mode.k / grid.torus_scale) ** 2
        fm = mode.f_minus.values
        mirror = grid.ddx_values(apply_l_x(cfg.c_star, a, grid, fm)) + mode.rate * fm
        sym = float(np.linalg.norm(mirror) / np.linalg.norm(fm))
        rows.append([mode.k, mode.rate, abs(self_pair), sym])
    extra: dict[str, object] = {"n0": spec.n0}
    if spec.n0 == 0:
        extra["note"] = "stable regime"
    out = Path(cfg.output_dir)
    _write_csv(
        out / "spectrum.csv",
        cfg,
        "spectrum",
        ["k", "lambda", "check_pairing", "check_symmetry"],
        rows,
        extra,
    )
    if cfg.write_modes and spec.n0 > 0:
        header = ["x"]
        cols = [grid.x]
        for mode in spec.modes:
            header += [f"f_plus_{mode.k}", f"f_minus_{mode.k}"]
            cols += [mode.f_plus.values, mode.f_minus.values]
        mode_rows = [list(r) for r in zip(*cols)]
        _write_csv(out / "modes.csv", cfg, "spectrum", header, mode_rows, extra)
    if spec.n0 == 0:
        print("stable regime: no transverse instability")
    else:
        rates = ", ".join(_fmt(m.rate) for m in spec.modes)
        print(f"n0 = {spec.n0}; growth rates: {rates}")


# -- simulate -------------------------------------------------------------------


def _coeff_header(n0: int) -> list[str]:
    names = []
    for sign in ("plus", "minus"):
        for k in range(1, n0 + 1):
            names += [f"lam_{sign}_{k}_0", f"lam_{sign}_{k}_1"]
    return names + ["mu1", "mu2"]


def _initial_state(cfg: RunConfig, grid: Grid2D):
    if cfg.initial == "soliton":
        return Field2D(grid, _soliton_2d(grid, cfg.c_star)), cfg.c_star, 0.0
    if cfg.initial == "mode":
        spec = unstable_modes(cfg.c_star, grid)
        if spec.n0 == 0:
            raise ConfigError("initial=mode: no unstable mode in the stable regime")
        m = spec.modes[0]
        vals = _soliton_2d(grid, cfg.c_star)
        vals = vals + cfg.amplitude * m.f_plus.values[:, None] * spec.cos_k[0][None, :]
        return Field2D(grid, vals), cfg.c_star, 0.0
    if cfg.initial.endswith(".zks"):
        u, _, c, rho = read_snapshot(Path(cfg.initial))
        if not u.grid.compatible(grid):
            raise ConfigError(f"{cfg.initial}: snapshot grid differs from config grid")
        return u, c, rho
    raise ConfigError(f"initial must be soliton, mode, or a .zks file: {cfg.initial!r}")


def cmd_simulate(cfg: RunConfig) -> None:
    from .dynamics import evolve_full

    grid = _grid_of(cfg)
    u0, c_guess, rho_guess = _initial_state(cfg, grid)
    spec = unstable_modes(cfg.c_star, grid)
    obs_every = max(1, int(round(cfg.snapshot_every / cfg.dt)))
    if abs(obs_every * cfg.dt - cfg.snapshot_every) > 1e-9 * max(1.0, cfg.snapshot_every):
        raise ConfigError("snapshot_every must be an integer multiple of dt")
    steps = int(round(cfg.t_max / cfg.dt))
    if abs(steps * cfg.dt - cfg.t_max) > 1e-9 * max(1.0, cfg.t_max):
        raise ConfigError("t_max must be an integer multiple of dt")

    out = Path(cfg.output_dir)
    observations: list[tuple[float, Field2D]] = []
    evolve_full(
        u0,
        cfg.t_max,
        cfg.dt,
        observer=lambda k, t, u: observations.append((t, u)),
        observe_every=obs_every,
    )

    rows: list[list[object]] = []
    note: str | None = None
    c_prev, rho_prev, t_prev = c_guess, rho_guess, observations[0][0]
    for idx, (t, u) in enumerate(observations):
        write_snapshot(out / f"snap_{idx:06d}.zks", grid, u.values, t, c_prev, rho_prev)
        try:
            c_fit, rho_fit, v = fit_modulation(
                u, spec, c_guess=c_prev, rho_guess=rho_prev + c_prev * (t - t_prev)
            )
        except NumericsError as exc:
            note = f"modulation fit failed at t={_fmt(t)}: {exc}"
            break
        dist, _ = tube_distance(u, cfg.c_star)
        dec = decompose(v, spec)
        coeffs = list(dec.lam_plus.ravel()) + list(dec.lam_minus.ravel())
        rows.append(
            [t, c_fit, rho_fit, mass(u), energy(u), dist]
            + coeffs
            + [dec.mu1, dec.mu2]
        )
        # rewrite the snapshot header with the fitted frame
        write_snapshot(out / f"snap_{idx:06d}.zks", grid, u.values, t, c_fit, rho_fit)
        c_prev, rho_prev, t_prev = c_fit, rho_fit, t

    extra: dict[str, object] = {"snapshots": len(observations)}
    if note is not None:
        extra["note"] = note
    header = ["t", "c", "rho", "mass", "energy", "tube_dist"] + _coeff_header(spec.n0)
    _write_csv(out / "series.csv", cfg, "simulate", header, rows, extra)
    if note is not None:
        raise NumericsError(note)
    final = rows[-1]
    print(
        f"simulated to t={_fmt(final[0])}: c={_fmt(final[1])} "
        f"tube_distance={_fmt(final[5])}"
    )


# -- decompose ------------------------------------------------------------------


def cmd_decompose(cfg: RunConfig) -> None:
    if not cfg.input:
        raise ConfigError("decompose needs input = <snapshot.zks>")
    u, t, c_hdr, rho_hdr = read_snapshot(Path(cfg.input))
    spec = unstable_modes(cfg.c_star, u.grid)
    c_fit, rho_fit, v = fit_modulation(u, spec, c_guess=c_hdr, rho_guess=rho_hdr)
    dec = decompose(v, spec)
    dist, _ = tube_distance(u, cfg.c_star)
    rows: list[list[object]] = []
    for sign, block in (("plus", dec.lam_plus), ("minus", dec.lam_minus)):
        for i, mode in enumerate(spec.modes):
            rows.append([f"lam_{sign}", mode.k, 0, block[i, 0]])
            rows.append([f"lam_{sign}", mode.k, 1, block[i, 1]])
    rows.append(["mu1", 0, 0, dec.mu1])
    rows.append(["mu2", 0, 0, dec.mu2])
    rows.append(["gamma_h1", 0, 0, h1_norm(dec.gamma)])
    extra = {
        "input_t": t,
        "fitted_c": c_fit,
        "fitted_rho": rho_fit,
        "tube_distance": dist,
    }
    _write_csv(
        Path(cfg.output_dir) / "decompose.csv",
        cfg,
        "decompose",
        ["block", "k", "j", "value"],
        rows,
        extra,
    )
    print(
        f"decomposed {cfg.input}: c={_fmt(c_fit)} rho={_fmt(rho_fit)} "
        f"tube_distance={_fmt(dist)}"
    )


# -- shoot ----------------------------------------------------------------------


def _clean_sample(spec, vals: np.ndarray) -> np.ndarray:
    f = Field2D(spec.grid, vals)
    return vals - project(f, "P_plus", spec).values


def _shoot_sample(spec, rng: np.random.Generator, radius: float):
    """A base point of the graph: P_plus-free data of size ~radius plus a
    comparable speed offset."""
    grid = spec.grid
    if radius == 0.0:
        return Field2D(grid, np.zeros((grid.nx, grid.ny))), spec.c_star
    xg, yg = np.meshgrid(grid.x, grid.y, indexing="ij")
    ky = 1 + int(rng.integers(0, 2))
    vals = rng.standard_normal() * (
        np.exp(-0.3 * (xg - rng.uniform(-4.0, 4.0)) ** 2)
        * np.cos(ky * yg / grid.torus_scale)
    )
    for i, mode in enumerate(spec.modes):
        pair = rng.standard_normal(2)
        trig = pair[0] * spec.cos_k[i] + pair[1] * spec.sin_k[i]
        vals = vals + mode.f_minus.values[:, None] * trig[None, :]
    clean = _clean_sample(spec, vals)
    e = energy_report(Field2D(grid, clean), spec).value
    w = Field2D(grid, clean * (0.6 * radius / e))
    c = spec.c_star * math.exp(rng.uniform(-0.2, 0.2) * radius)
    return w, c


def cmd_shoot(cfg: RunConfig) -> None:
    grid = _grid_of(cfg)
    spec = unstable_modes(cfg.c_star, grid)
    rng = np.random.default_rng(cfg.seed)
    out = Path(cfg.output_dir)
    header = ["shot", "inputs_hash", "c"]
    for mode in spec.modes:
        header += [f"a_plus_{mode.k}_0", f"a_plus_{mode.k}_1"]
    header += ["persist_time", "converged", "bracket_width"]
    rows: list[list[object]] = []
    for i in range(cfg.n_shots):
        w, c = _shoot_sample(spec, rng, cfg.radius)
        digest = hashlib.sha256(
            w.values.tobytes() + struct.pack("<d", c)
        ).hexdigest()[:16]
        write_snapshot(out / f"shot_{i:03d}_w.zks", grid, w.values, 0.0, c, 0.0)
        res = shoot_graph(w, c, spec, cfg.epsilon, cfg.t_max, dt=cfg.dt)
        rows.append(
            [i, digest, c]
            + list(res.a_plus)
            + [res.persist_time, int(res.converged), res.bracket_width]
        )
        amax = max(abs(v) for v in res.a_plus) if res.a_plus.size else 0.0
        print(
            f"shot {i}: max|a_plus|={_fmt(amax)} "
            f"persist={_fmt(res.persist_time)} converged={res.converged}"
        )
    _write_csv(out / "shoot.csv", cfg, "shoot", header, rows)


# -- distance -------------------------------------------------------------------


def _distance_sample(spec, rng: np.random.Generator, scale: float):
    grid = spec.grid
    xg, yg = np.meshgrid(grid.x, grid.y, indexing="ij")
    ky = 1 + int(rng.integers(0, 2))
    vals = rng.standard_normal() * (
        np.exp(-0.3 * (xg - rng.uniform(-4.0, 4.0)) ** 2)
        * np.cos(ky * yg / grid.torus_scale + rng.uniform(0.0, 2.0 * math.pi))
    )
    for i, mode in enumerate(spec.modes):
        pair = 0.5 * rng.standard_normal(2)
        trig = pair[0] * spec.cos_k[i] + pair[1] * spec.sin_k[i]
        vals = vals + mode.f_minus.values[:, None] * trig[None, :]
    e = energy_report(Field2D(grid, vals), spec).value
    v = Field2D(grid, vals * (scale * rng.uniform(0.3, 1.0) / e))
    c = spec.c_star * math.exp(rng.uniform(-0.5, 0.5) * scale)
    return v, c


def cmd_distance(cfg: RunConfig) -> None:
    from .metric import quasi_axioms_report

    grid = _grid_of(cfg)
    spec = unstable_modes(cfg.c_star, grid)
    rng = np.random.default_rng(cfg.seed)
    params = MobileParams(delta=cfg.delta)
    triples = [
        tuple(_distance_sample(spec, rng, cfg.delta) for _ in range(3))
        for _ in range(cfg.n_samples)
    ]
    rows: list[list[object]] = []
    for idx, (sa, sb, sc) in enumerate(triples):
        a = prepare_state(sa[0], sa[1], params, spec)
        b = prepare_state(sb[0], sb[1], params, spec)
        c = prepare_state(sc[0], sc[1], params, spec)
        rows.append(
            [
                idx,
                distance_prepared(a, b, params, spec).value,
                distance_prepared(b, a, params, spec).value,
                distance_prepared(a, c, params, spec).value,
                distance_prepared(c, b, params, spec).value,
                distance_prepared(a, a, params, spec).value,
            ]
        )
    report = quasi_axioms_report(triples, params, spec)
    extra = {
        "symmetry_max": report.symmetry_max,
        "identity_max": report.identity_max,
        "triangle_constant": report.triangle_constant,
        "lower_constant": report.lower_constant,
        "upper_constant": report.upper_constant,
        "axioms_ok": int(report.ok),
    }
    _write_csv(
        Path(cfg.output_dir) / "distance.csv",
        cfg,
        "distance",
        ["triple", "m_ab", "m_ba", "m_ac", "m_cb", "m_aa"],
        rows,
        extra,
    )
    status = "ok" if report.ok else "FAILED: " + "; ".join(report.failures)
    print(
        f"distance axioms over {report.n_triples} triples: {status} "
        f"(triangle constant {_fmt(report.triangle_constant)})"
    )


# -- sweep ----------------------------------------------------------------------


def _run_sweep_point(cfg: RunConfig) -> list[object]:
    grid = Grid2D(cfg.x_half_width, cfg.nx, cfg.L, cfg.ny)
    vals = _soliton_2d(grid, cfg.c_star)
    pert = (
        cfg.amplitude
        * np.exp(-0.3 * grid.x**2)[:, None]
        * np.cos(grid.y / cfg.L)[None, :]
    )
    u0 = Field2D(grid, vals + pert)
    t_exit = exit_time(u0, cfg.c_star, cfg.epsilon, cfg.t_max, dt=cfg.dt)
    exited = t_exit is not None
    row = [cfg.c_star, cfg.L, t_exit if exited else "", int(exited)]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "exit.csv", cfg, "sweep", ["c", "L", "exit_time", "exited"], [row]
    )
    return row


def cmd_sweep(cfg: RunConfig) -> None:
    if not cfg.sweep_c:
        raise ConfigError("sweep needs sweep_c = <comma-separated speeds>")
    try:
        c_tokens = [(tok.strip(), float(tok)) for tok in cfg.sweep_c.split(",")]
        l_tokens = (
            [(tok.strip(), float(tok)) for tok in cfg.sweep_l.split(",")]
            if cfg.sweep_l
            else [(_fmt(cfg.L), cfg.L)]
        )
    except ValueError as exc:
        raise ConfigError(f"bad sweep list: {exc}") from exc

    out = Path(cfg.output_dir)
    points = []
    for c_tok, c_val in c_tokens:
        for l_tok, l_val in l_tokens:
            sub = out / f"c_{c_tok}_L_{l_tok}"
            points.append(
                dataclasses.replace(
                    cfg, c_star=c_val, L=l_val, output_dir=str(sub)
                )
            )
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_sweep_point, points))
    else:
        results = [_run_sweep_point(p) for p in points]
    rows = [[i] + r for i, r in enumerate(results)]
    _write_csv(
        out / "summary.csv",
        cfg,
        "sweep",
        ["point", "c", "L", "exit_time", "exited"],
        rows,
    )
    for row in rows:
        state = f"exit_time={_fmt(row[3])}" if row[4] else "no exit"
        print(f"c={_fmt(row[1])} L={_fmt(row[2])}: {state}")


# -- entry point ----------------------------------------------------------------

COMMANDS = {
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "decompose": cmd_decompose,
    "shoot": cmd_shoot,
    "distance": cmd_distance,
    "sweep": cmd_sweep,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zkline",
        description="Spectral toolkit for transverse dynamics of ZK line solitons.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", default=None, help="configuration file")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a single configuration key",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        _validate(cfg)
        Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ZkError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
