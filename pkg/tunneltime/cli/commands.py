"""Flask CLI commands: `flask --app run <command>` writes a CSV plus a metadata sidecar."""
import functools
import os

import click
import numpy as np
from flask import current_app

from tunneltime import __version__
from tunneltime.cli import bp
from tunneltime.exceptions import ConfigError, OutputError, TunnelTimeError, ValidationError
from tunneltime.helpers import read_key_values, stopwatch, utcnow, write_csv, write_sidecar
from tunneltime.oracle import (
    COMPARISON_HEADER,
    compare_with_solver,
    comparison_rows,
    convergence_study,
    default_grid,
)
from tunneltime.quantities import BarrierSpec
from tunneltime.resonances import POLE_HEADER, find_poles, pole_rows
from tunneltime.scaling import OPACITY_HEADER, Reference, find_window, opacity_rows, opacity_scan
from tunneltime.solver import build_model
from tunneltime.tfa import (
    POSITION_HEADER,
    cutoff_crossing,
    energy_position_scan,
    position_rows,
    spectrogram,
)
from tunneltime.transients import BASIN_HEADER, basin_rows, basin_scan, profile_with_peak


def _floats(value):
    if isinstance(value, (tuple, list)):
        return tuple(float(v) for v in value)
    return tuple(float(v) for v in str(value).split(",") if v.strip())


def _flag(value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(value)


CONVERTERS = {
    "V_eV": float,
    "L_nm": float,
    "m_rel": float,
    "E_eV": float,
    "probe_nm": float,
    "t_lo_fs": float,
    "t_hi_fs": float,
    "points": int,
    "tail_tol": float,
    "out": str,
    "workers": int,
    "count": int,
    "spectrogram": _flag,
    "L_lo_nm": float,
    "L_hi_nm": float,
    "L_points": int,
    "x_lo_over_L": float,
    "x_hi_over_L": float,
    "x_points": int,
    "energies": _floats,
    "u": _floats,
    "alpha_lo": float,
    "alpha_hi": float,
    "alpha_points": int,
    "window": _flag,
    "u_window": float,
    "bisect_tol": float,
    "t_final_fs": float,
    "dx_nm": float,
    "probes_nm": _floats,
    "refinements": int,
    "study_dx_nm": float,
    "study_t_final_fs": float,
}


class RunConfig(dict):
    """Effective settings of one command run, keyed like the command's options."""

    def __init__(self, command, values):
        super().__init__(values)
        self.command = command

    @property
    def spec(self):
        return BarrierSpec(V=self["V_eV"], L=self["L_nm"], m_rel=self["m_rel"], E=self["E_eV"])

    def metadata(self):
        return {f"config.{key}": _flat(value) for key, value in self.items()}


def resolve_config(command, defaults, params):
    """App config < --config file < flags."""
    cfg = current_app.config
    effective = {
        "V_eV": cfg["V_EV"],
        "L_nm": cfg["L_NM"],
        "m_rel": cfg["M_REL"],
        "E_eV": cfg["E_EV"],
        "tail_tol": cfg["TAIL_TOL"],
        "workers": cfg["WORKERS"],
        "out": os.path.join(cfg["OUTPUT_DIR"], f"{command}.csv"),
    }
    effective.update(defaults)
    params = dict(params)
    path = params.pop("config", None)
    if path:
        allowed = {key: CONVERTERS[key] for key in effective}
        effective.update(read_key_values(path, allowed))
    for key, value in params.items():
        if value is None or value == ():
            continue
        if key not in effective:
            raise ConfigError(f"unknown option {key!r}", key=key)
        effective[key] = value
    if effective["workers"] < 1:
        raise ValidationError("workers must be >= 1", field="workers")
    return RunConfig(command, effective)


def emit(command, effective, header, rows, seconds, extra=None):
    out = effective["out"]
    directory = os.path.dirname(out)
    if directory:
        try:
            os.makedirs(directory, exist_ok=True)
        except OSError as e:
            raise OutputError(f"cannot create {directory}: {e}") from e
    write_csv(out, header, rows)
    metadata = effective.metadata()
    metadata.update(extra or {})
    metadata.update({
        "command": command,
        "version": __version__,
        "duration_s": seconds,
        "created_at": utcnow().isoformat(),
        "rows": len(rows),
    })
    write_sidecar(out + ".meta", metadata)
    click.echo(f"wrote {len(rows)} rows to {out}")


def _flat(value):
    if isinstance(value, tuple):
        return ",".join(f"{v:.17g}" for v in value)
    return value


def reported(fn):
    """Maps library errors to exit codes 2 (input), 3 (numerical) and 4 (I/O)."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except TunnelTimeError as e:
            current_app.logger.error("%s failed: %s", click.get_current_context().info_name, e)
            click.echo(f"error: {e}", err=True)
            click.get_current_context().exit(e.exit_code)

    return wrapper


def common_options(fn):
    options = [
        click.option("--V-eV", "V_eV", type=float, help="Barrier height (eV)."),
        click.option("--L-nm", "L_nm", type=float, help="Barrier width (nm)."),
        click.option("--m-rel", "m_rel", type=float, help="Effective mass / electron mass."),
        click.option("--E-eV", "E_eV", type=float, help="Incidence energy (eV)."),
        click.option("--tail-tol", "tail_tol", type=float, help="Pole-sum truncation tolerance."),
        click.option("--workers", type=int, help="Worker threads for scans."),
        click.option("--out", type=click.Path(dir_okay=False), help="Output CSV path."),
        click.option("--config", type=click.Path(dir_okay=False), help="key = value config file."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def time_options(fn):
    options = [
        click.option("--probe-nm", "probe_nm", type=float, help="Probe position (nm), default L."),
        click.option("--t-lo-fs", "t_lo_fs", type=float, help="First time (fs)."),
        click.option("--t-hi-fs", "t_hi_fs", type=float, help="Last time (fs)."),
        click.option("--points", type=int, help="Number of time samples."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


@bp.cli.command("poles")
@common_options
@click.option("--count", type=int, help="Number of poles n = 1..count.")
@reported
def poles_command(**params):
    """Resonance pole table."""
    effective = resolve_config("poles", {"count": 20}, params)
    spec = effective.spec
    with stopwatch() as clock:
        found = find_poles(spec, effective["count"], workers=effective["workers"])
    emit("poles", effective, POLE_HEADER, pole_rows(found), clock["seconds"],
         {"max_residual": max(p.residual for p in found)})


def _time_grid(effective):
    t_lo, t_hi, points = effective["t_lo_fs"], effective["t_hi_fs"], effective["points"]
    if not 0 < t_lo < t_hi:
        raise ValidationError(f"need 0 < t_lo_fs < t_hi_fs, got {t_lo}, {t_hi}", field="t_lo_fs")
    if points < 2:
        raise ValidationError("points must be >= 2", field="points")
    return np.linspace(t_lo, t_hi, points)


@bp.cli.command("evolve")
@common_options
@time_options
@click.option("--spectrogram/--no-spectrogram", "spectrogram", default=None,
              help="Add omega_av/omega_V and sigma columns.")
@reported
def evolve_command(**params):
    """Normalized density |psi(x, t)|^2 / |T|^2 at a probe."""
    defaults = {"probe_nm": None, "t_lo_fs": 0.05, "t_hi_fs": 20.0, "points": 2000,
                "spectrogram": False}
    effective = resolve_config("evolve", defaults, params)
    spec = effective.spec
    x = effective["probe_nm"] if effective["probe_nm"] is not None else spec.L
    effective["probe_nm"] = x
    with stopwatch() as clock:
        model = build_model(spec, effective["tail_tol"], current_app.config["POLE_CAP"])
        t = _time_grid(effective)
        profile = profile_with_peak(model, x, t)
        header = ["t_fs", "density"]
        columns = [profile.t_grid, profile.density]
        if effective["spectrogram"]:
            result = spectrogram(model, x, t, with_marker=False)
            header += ["omega_rel", "sigma_per_fs", "valid"]
            columns += [
                np.where(result.valid, result.omega_rel, np.nan),
                np.where(result.valid, result.sigma, np.nan),
                result.valid,
            ]
    rows = [[_cell(c[i]) for c in columns] for i in range(t.size)]
    extra = {
        "region": model.region(x),
        "pole_count": model.pole_count,
        "tail_estimate": model.tail_estimate,
        "transmission": model.transmission,
        "t_max_fs": profile.t_max,
        "peak_value": profile.peak_value,
        "secondary_maxima_fs": ",".join(f"{s:.17g}" for s in profile.secondary_maxima),
    }
    emit("evolve", effective, header, rows, clock["seconds"], extra)


def _cell(value):
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    return float(value)


@bp.cli.command("basin")
@common_options
@click.option("--L-lo-nm", "L_lo_nm", type=float, help="Smallest barrier width (nm).")
@click.option("--L-hi-nm", "L_hi_nm", type=float, help="Largest barrier width (nm).")
@click.option("--L-points", "L_points", type=int, help="Number of widths.")
@reported
def basin_command(**params):
    """t_max at x = L as a function of the barrier width."""
    defaults = {"L_lo_nm": 2.0, "L_hi_nm": 20.0, "L_points": 37}
    effective = resolve_config("basin", defaults, params)
    spec = effective.spec
    grid = np.linspace(effective["L_lo_nm"], effective["L_hi_nm"], effective["L_points"])
    with stopwatch() as clock:
        rows = basin_scan(spec, grid, effective["tail_tol"], effective["workers"])
    emit("basin", effective, BASIN_HEADER, basin_rows(rows), clock["seconds"],
         {"failed_rows": sum(1 for r in rows if r.error)})


@bp.cli.command("posscan")
@common_options
@click.option("--x-lo-over-L", "x_lo_over_L", type=float, help="First probe as a fraction of L.")
@click.option("--x-hi-over-L", "x_hi_over_L", type=float, help="Last probe as a fraction of L.")
@click.option("--x-points", "x_points", type=int, help="Number of probes.")
@click.option("--energies", type=_floats, help="Comma separated incidence energies (eV).")
@reported
def posscan_command(**params):
    """omega_av/omega_V at t_max(x) across positions, one block per energy."""
    defaults = {"x_lo_over_L": 0.05, "x_hi_over_L": 3.0, "x_points": 60, "energies": ()}
    effective = resolve_config("posscan", defaults, params)
    spec = effective.spec
    energies = effective["energies"] or (spec.E,)
    x_grid = spec.L * np.linspace(effective["x_lo_over_L"], effective["x_hi_over_L"],
                                  effective["x_points"])
    with stopwatch() as clock:
        scans = energy_position_scan(spec, energies, x_grid, effective["tail_tol"],
                                     effective["workers"])
    rows, extra = [], {}
    for E, scan in scans.items():
        rows.extend([E] + row for row in position_rows(scan))
        extra[f"crossing_x_over_L.E_{E:g}"] = cutoff_crossing(scan)
    emit("posscan", effective, ["E_eV"] + POSITION_HEADER, rows, clock["seconds"], extra)


@bp.cli.command("opacity")
@common_options
@click.option("--u", type=_floats, help="Comma separated V/E ratios.")
@click.option("--alpha-lo", "alpha_lo", type=float, help="Smallest opacity.")
@click.option("--alpha-hi", "alpha_hi", type=float, help="Largest opacity.")
@click.option("--alpha-points", "alpha_points", type=int, help="Number of opacities.")
@click.option("--window/--no-window", "window", default=None, help="Also bisect the opacity window.")
@click.option("--u-window", "u_window", type=float, help="V/E ratio for the window search.")
@click.option("--bisect-tol", "bisect_tol", type=float, help="Window bisection tolerance.")
@reported
def opacity_command(**params):
    """omega_av/omega_V at t_max(x = L) against the opacity, per u."""
    defaults = {"u": (5.0, 10.0, 300.0), "alpha_lo": 1.5, "alpha_hi": 4.0, "alpha_points": 26,
                "window": True, "u_window": 300.0, "bisect_tol": 1e-3}
    effective = resolve_config("opacity", defaults, params)
    reference = Reference(V=effective["V_eV"], m_rel=effective["m_rel"])
    grid = np.linspace(effective["alpha_lo"], effective["alpha_hi"], effective["alpha_points"])
    extra = {}
    with stopwatch() as clock:
        curves = opacity_scan(list(effective["u"]), grid, reference, effective["tail_tol"],
                              effective["workers"])
        if effective["window"]:
            window = find_window(effective["u_window"], reference, effective["bisect_tol"],
                                 tail_tol=effective["tail_tol"], workers=effective["workers"])
            extra = {
                "alpha_min": window.alpha_min,
                "alpha_max": window.alpha_max,
                "monotone_existence": window.monotone_existence,
            }
            click.echo(f"opacity window u={window.u:g}: "
                       f"{window.alpha_min:.4f} <= alpha <= {window.alpha_max:.4f}")
    rows = [[curve.u] + row for curve in curves for row in opacity_rows(curve)]
    emit("opacity", effective, ["u"] + OPACITY_HEADER, rows, clock["seconds"], extra)


@bp.cli.command("oracle-compare")
@common_options
@click.option("--t-final-fs", "t_final_fs", type=float, help="Length of the finite-difference run (fs).")
@click.option("--dx-nm", "dx_nm", type=float, help="Grid spacing (nm), default L/400.")
@click.option("--probes-nm", "probes_nm", type=_floats,
              help="Comma separated probes (nm), default L/2, L and 2L.")
@click.option("--refinements", type=int, help="Levels of the convergence study, 0 to skip.")
@click.option("--study-dx-nm", "study_dx_nm", type=float, help="Coarsest dx of the convergence study (nm).")
@click.option("--study-t-final-fs", "study_t_final_fs", type=float,
              help="Length of the convergence study runs (fs).")
@reported
def oracle_compare_command(**params):
    """Resonance expansion against the Crank-Nicolson integrator.

    The convergence study runs on its own coarse, short grid.
    """
    defaults = {"t_final_fs": 20.0, "dx_nm": None, "probes_nm": (), "refinements": 0,
                "study_dx_nm": 0.04, "study_t_final_fs": 3.0}
    effective = resolve_config("oracle-compare", defaults, params)
    spec = effective.spec
    probes = effective["probes_nm"] or None
    with stopwatch() as clock:
        grid = default_grid(spec, t_final=effective["t_final_fs"], probes=probes,
                            dx=effective["dx_nm"])
        comparison = compare_with_solver(spec, grid, effective["tail_tol"])
        extra = {"max_rel_deviation": comparison.max_rel_deviation,
                 "pole_count": comparison.pole_count, "dx_nm": grid.dx, "dt_fs": grid.dt}
        if effective["refinements"]:
            base = default_grid(spec, t_final=effective["study_t_final_fs"], probes=grid.probes,
                                dx=effective["study_dx_nm"])
            report = convergence_study(spec, base, effective["refinements"])
            extra.update({"p_dx": report.p_dx, "p_dt": report.p_dt,
                          "monotone_refinement": report.monotone})
    click.echo(f"max relative deviation {comparison.max_rel_deviation:.3e}")
    emit("oracle-compare", effective, COMPARISON_HEADER, comparison_rows(comparison, grid.probes),
         clock["seconds"], extra)
