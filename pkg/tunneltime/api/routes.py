import numpy as np
from flask import current_app, jsonify, request

from tunneltime import __version__
from tunneltime.api import bp
from tunneltime.exceptions import TunnelTimeError, ValidationError
from tunneltime.quantities import BarrierSpec
from tunneltime.resonances import find_poles
from tunneltime.scaling import Reference, find_window
from tunneltime.solver import build_model
from tunneltime.tfa import classify_tunneling, spectrogram
from tunneltime.transients import find_tmax, profile_with_peak

WINDOW_MIN_BISECT_TOL = 1e-2


def _arg(name, default, convert=float):
    raw = request.args.get(name)
    if raw is None or raw == "":
        return default
    try:
        return convert(raw)
    except ValueError:
        raise ValidationError(f"bad value for {name}: {raw!r}", field=name)


def _spec():
    cfg = current_app.config
    return BarrierSpec(
        V=_arg("V_eV", cfg["V_EV"]),
        L=_arg("L_nm", cfg["L_NM"]),
        m_rel=_arg("m_rel", cfg["M_REL"]),
        E=_arg("E_eV", cfg["E_EV"]),
    )


def _model(spec):
    cfg = current_app.config
    return build_model(spec, _arg("tail_tol", cfg["TAIL_TOL"]), cfg["POLE_CAP"])


def _t_grid():
    t_lo = _arg("t_lo_fs", 0.05)
    t_hi = _arg("t_hi_fs", 20.0)
    points = _arg("points", 400, int)
    if not 0 < t_lo < t_hi or points < 2:
        raise ValidationError("need 0 < t_lo_fs < t_hi_fs and points >= 2", field="t_grid")
    return np.linspace(t_lo, t_hi, points)


def _listed(values, valid=None):
    values = np.asarray(values, dtype=float)
    if valid is None:
        valid = np.isfinite(values)
    return [float(v) if ok else None for v, ok in zip(values, valid)]


@bp.errorhandler(TunnelTimeError)
def tunneltime_error(e):
    status = 400 if e.exit_code == 2 else 422
    current_app.logger.warning("api %s failed: %s", request.path, e)
    return jsonify(error=str(e)), status


@bp.route("/health")
def health():
    return jsonify(status="ok", version=__version__)


@bp.route("/poles")
def poles():
    spec = _spec()
    count = _arg("count", 20, int)
    found = find_poles(spec, count)
    return jsonify(
        spec=spec.as_dict(),
        poles=[
            {"n": p.n, "re_k": p.k.real, "im_k": p.k.imag, "re_E": p.E.real,
             "im_E": p.E.imag, "residual": p.residual}
            for p in found
        ],
    )


@bp.route("/transient")
def transient():
    spec = _spec()
    model = _model(spec)
    x = _arg("probe_nm", spec.L)
    profile = profile_with_peak(model, x, _t_grid())
    return jsonify(
        spec=spec.as_dict(),
        probe_nm=x,
        pole_count=model.pole_count,
        t_fs=profile.t_grid.tolist(),
        density=_listed(profile.density),
        t_max_fs=profile.t_max,
        peak_value=profile.peak_value,
        secondary_maxima_fs=list(profile.secondary_maxima),
    )


@bp.route("/spectrogram")
def spectrogram_view():
    spec = _spec()
    model = _model(spec)
    x = _arg("probe_nm", spec.L)
    result = spectrogram(model, x, _t_grid())
    return jsonify(
        spec=spec.as_dict(),
        probe_nm=x,
        t_fs=result.t_grid.tolist(),
        omega_rel=_listed(result.omega_rel, result.valid),
        sigma_per_fs=_listed(result.sigma, result.valid),
        t_max_fs=result.t_max_marker,
    )


@bp.route("/classify")
def classify():
    spec = _spec()
    model = _model(spec)
    x = _arg("probe_nm", spec.L)
    result = classify_tunneling(model, x)
    peak = find_tmax(model, x) if result.t_max is None else None
    return jsonify(
        spec=spec.as_dict(),
        probe_nm=x,
        label=result.label,
        t_max_fs=result.t_max,
        omega_rel=result.omega_rel,
        sigma_per_fs=result.sigma,
        window_fs=list(peak.window) if peak else None,
    )


@bp.route("/window")
def window():
    """Opacity window at a coarse bisection tolerance.

    Every bisection step builds a model, so the request is capped at
    bisect_tol >= WINDOW_MIN_BISECT_TOL; tighter windows go through `flask opacity`.
    """
    cfg = current_app.config
    u = _arg("u", 300.0)
    reference = Reference(V=_arg("V_eV", cfg["V_EV"]), m_rel=_arg("m_rel", cfg["M_REL"]))
    bisect_tol = _arg("bisect_tol", WINDOW_MIN_BISECT_TOL)
    if not bisect_tol >= WINDOW_MIN_BISECT_TOL:
        raise ValidationError(
            f"bisect_tol must be >= {WINDOW_MIN_BISECT_TOL:g} here; use the opacity command for tighter windows",
            field="bisect_tol",
        )
    result = find_window(u, reference, bisect_tol, tail_tol=cfg["TAIL_TOL"])
    return jsonify(
        u=result.u,
        alpha_min=result.alpha_min,
        alpha_max=result.alpha_max,
        monotone_existence=result.monotone_existence,
    )
