"""Line-oriented ``key = value`` configuration with sections.

Every key has a documented default except the background state and the
nozzle length. Unknown sections or keys, duplicates and malformed values
raise ``ConfigError`` carrying the offending line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .profiles import FAMILIES, Profile
from .thermo import BackgroundState, GasModel, PrimitiveState

PERTURBATION_KEYS = ("sub_p", "sub_B", "sub_A", "sup_u", "sup_v", "sup_p", "sup_rho", "exit_angle")
COMPAT_TOL = 1e-9

PRESSURE_CONTINUITY = "inlet pressure continuity at the contact"
CORNER_SLIP = "corner slip compatibility"
EXIT_COMPAT = "exit angle compatibility at the contact"


@dataclass(frozen=True)
class Controls:
    """Tolerances and limits of the three nested fixed-point loops."""

    tol_inner: float = 1e-8
    tol_outer: float = 1e-7
    tol_flux: float = 1e-10
    max_inner: int = 200
    max_outer: int = 100
    max_flux: int = 50
    damping: float = 0.7
    secant_after: int = 20
    trust_region: float = 0.2
    exit_compat: str = "shift"


@dataclass(frozen=True)
class ProblemSpec:
    gas: GasModel
    background: BackgroundState
    length: float = 1.0
    lower: Profile = field(default_factory=Profile)
    upper: Profile = field(default_factory=Profile)
    epsilon: float = 0.0
    perturbations: tuple = tuple((k, Profile()) for k in PERTURBATION_KEYS)
    nx: int = 129
    ny_sub: int = 65
    ny_sup: int = 65
    controls: Controls = field(default_factory=Controls)
    output_dir: str = "out"
    emit_plots: bool = False

    def profile(self, key: str) -> Profile:
        return dict(self.perturbations)[key]

    def replace(self, **kw) -> "ProblemSpec":
        import dataclasses

        return dataclasses.replace(self, **kw)

    def with_profiles(self, **profiles) -> "ProblemSpec":
        d = dict(self.perturbations)
        for k, v in profiles.items():
            if k not in d:
                raise KeyError(k)
            d[k] = v
        return self.replace(perturbations=tuple((k, d[k]) for k in PERTURBATION_KEYS))


# section -> key -> (type, default); default None means mandatory
_SCHEMA = {
    "gas": {"gamma": (float, 1.4), "kappa": (float, 1.0), "c_nu": (float, 1.0)},
    "background": {"p": (float, None), "u_sub": (float, None), "rho_sub": (float, None),
                   "u_sup": (float, None), "rho_sup": (float, None), "delta0": (float, 0.05)},
    "nozzle": {"length": (float, None), "y_top": (float, 1.0), "y_bottom": (float, -1.0),
               "lower": ("profile", "none"), "lower_scale": (float, 1.0),
               "upper": ("profile", "none"), "upper_scale": (float, 1.0)},
    "perturbation": {"epsilon": (float, 0.0),
                     **{k: ("profile", "none") for k in PERTURBATION_KEYS},
                     **{k + "_scale": (float, 1.0) for k in PERTURBATION_KEYS}},
    "grid": {"nx": (int, 129), "ny_sub": (int, 65), "ny_sup": (int, 65)},
    "solver": {f.name: (type(f.default), f.default) for f in fields(Controls)},
    "output": {"dir": (str, "out"), "emit_plots": (bool, False)},
}


def _parse_float(text):
    parts = text.split("/")
    if len(parts) > 2:
        raise ValueError(text)
    val = float(parts[0]) if len(parts) == 1 else float(parts[0]) / float(parts[1])
    if not math.isfinite(val):
        raise ValueError(text)
    return val


def _parse_bool(text):
    t = text.lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(text)


def _convert(kind, text):
    if kind is float:
        return _parse_float(text)
    if kind is int:
        return int(text)
    if kind is bool:
        return _parse_bool(text)
    if kind == "profile":
        ok = text[len("table:"):].strip() if text.startswith("table:") else text in FAMILIES and text != "table"
        if not ok:
            raise ValueError(text)
        return text
    return text


def read_raw(text: str):
    """Parse text into ``{section: {key: (value_text, line)}}``."""
    out: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            if section in out:
                raise ConfigError(f"duplicate section [{section}]", lineno)
            out[section] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if section is None:
            raise ConfigError("key outside any section", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if key in out[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        if not val:
            raise ConfigError(f"empty value for {key!r}", lineno)
        out[section][key] = (val, lineno)
    return out


def parse_config_text(text: str, base_dir: Path | None = None) -> ProblemSpec:
    raw = read_raw(text)
    vals: dict = {}
    lines: dict = {}
    for sec, schema in _SCHEMA.items():
        given = raw.get(sec, {})
        for key, (kind, default) in schema.items():
            if key in given:
                text_val, lineno = given[key]
                try:
                    vals[(sec, key)] = _convert(kind, text_val)
                except ValueError:
                    raise ConfigError(f"malformed value {text_val!r} for {key!r}", lineno) from None
                lines[(sec, key)] = lineno
            elif default is None:
                raise ConfigError(f"missing mandatory key {key!r} in [{sec}]")
            else:
                vals[(sec, key)] = default

    def line(*keys):
        for k in keys:
            if k in lines:
                return lines[k]
        return None

    def v(sec, key):
        return vals[(sec, key)]

    def check(cond, msg, key):
        if not cond:
            raise ConfigError(msg, line(key))

    try:
        gas = GasModel(v("gas", "gamma"), v("gas", "kappa"), v("gas", "c_nu"))
    except ValueError as exc:
        raise ConfigError(str(exc), line(("gas", "gamma"), ("gas", "kappa"), ("gas", "c_nu"))) from None
    try:
        p = v("background", "p")
        bg = BackgroundState(PrimitiveState(v("background", "u_sub"), 0.0, p, v("background", "rho_sub")),
                             PrimitiveState(v("background", "u_sup"), 0.0, p, v("background", "rho_sup")),
                             v("background", "delta0"), v("nozzle", "y_top"), v("nozzle", "y_bottom"))
    except ValueError as exc:
        raise ConfigError(str(exc), line(("background", "p"))) from None
    check(bg.sub.u > 0 and bg.sup.u > 0, "background velocities must be positive", ("background", "u_sub"))
    check(v("nozzle", "length") > 0, "nozzle length must be positive", ("nozzle", "length"))
    check(v("nozzle", "y_bottom") < 0 < v("nozzle", "y_top"), "need y_bottom < 0 < y_top", ("nozzle", "y_top"))
    eps = v("perturbation", "epsilon")
    check(eps >= 0.0, f"epsilon must be non-negative, got {eps}", ("perturbation", "epsilon"))
    for key in ("nx", "ny_sub", "ny_sup"):
        check(v("grid", key) >= 17, f"{key} must be at least 17", ("grid", key))
    ctl_kw = {f.name: v("solver", f.name) for f in fields(Controls)}
    ctl = Controls(**ctl_kw)
    check(ctl.exit_compat in ("shift", "pin"), "exit_compat must be 'shift' or 'pin'", ("solver", "exit_compat"))
    check(0.0 < ctl.damping <= 1.0, "damping must lie in (0, 1]", ("solver", "damping"))
    for key in ("tol_inner", "tol_outer", "tol_flux", "trust_region"):
        check(getattr(ctl, key) > 0.0, f"{key} must be positive", ("solver", key))
    for key in ("max_inner", "max_outer", "max_flux"):
        check(getattr(ctl, key) >= 1, f"{key} must be at least 1", ("solver", key))

    def prof(sec, key):
        try:
            return Profile.parse(v(sec, key), v(sec, key + "_scale"), base_dir)
        except ValueError as exc:
            raise ConfigError(str(exc), line((sec, key))) from None

    spec = ProblemSpec(
        gas=gas, background=bg, length=v("nozzle", "length"),
        lower=prof("nozzle", "lower"), upper=prof("nozzle", "upper"), epsilon=eps,
        perturbations=tuple((k, prof("perturbation", k)) for k in PERTURBATION_KEYS),
        nx=v("grid", "nx"), ny_sub=v("grid", "ny_sub"), ny_sup=v("grid", "ny_sup"),
        controls=ctl, output_dir=v("output", "dir"), emit_plots=v("output", "emit_plots"),
    )
    for cond, msg, keys in compatibility_violations(spec):
        raise ConfigError(msg, line(*[("perturbation", k) if k != "lower" else ("nozzle", "lower") for k in keys],
                                    ("perturbation", "epsilon")), cond)
    return spec


def compatibility_violations(spec: ProblemSpec):
    """Yield ``(condition, message, keys)`` for each violated inlet/exit compatibility."""
    eps = spec.epsilon
    P = spec.profile
    sub_p0 = spec.background.sub.p * (1.0 + eps * float(P("sub_p")(0.0)))
    sup_p0 = spec.background.sup.p * (1.0 + eps * float(P("sup_p")(1.0)))
    if abs(sub_p0 - sup_p0) > COMPAT_TOL:
        yield (PRESSURE_CONTINUITY,
               f"subsonic inlet pressure {sub_p0!r} differs from supersonic inlet pressure {sup_p0!r} at the contact",
               ("sub_p", "sup_p"))
    slope_in = eps * float(P("sup_v")(0.0)) / (1.0 + eps * float(P("sup_u")(0.0)))
    slope_wall = eps * float(spec.lower(0.0, 1)) / spec.length
    if abs(slope_in - slope_wall) > COMPAT_TOL:
        yield (CORNER_SLIP,
               f"inlet flow slope {slope_in!r} at the lower corner differs from the wall slope {slope_wall!r}",
               ("sup_v", "lower"))
    if spec.controls.exit_compat == "pin":
        others = [k for k in PERTURBATION_KEYS if k != "exit_angle" and not P(k).is_zero]
        walls = not (spec.lower.is_zero and spec.upper.is_zero)
        w0 = eps * float(P("exit_angle")(0.0))
        if not others and not walls and abs(w0) > COMPAT_TOL:
            yield (EXIT_COMPAT, f"exit angle {w0!r} at the contact must vanish for an unperturbed contact",
                   ("exit_angle",))


def parse_config(path) -> ProblemSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, base_dir=path.parent)


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_config(spec: ProblemSpec) -> str:
    """Serialize a spec so that ``parse_config_text(write_config(s)) == s``."""
    bg = spec.background
    out = [
        "[gas]", f"gamma = {_fmt(spec.gas.gamma)}", f"kappa = {_fmt(spec.gas.kappa)}",
        f"c_nu = {_fmt(spec.gas.c_nu)}", "",
        "[background]", f"p = {_fmt(bg.sub.p)}", f"u_sub = {_fmt(bg.sub.u)}", f"rho_sub = {_fmt(bg.sub.rho)}",
        f"u_sup = {_fmt(bg.sup.u)}", f"rho_sup = {_fmt(bg.sup.rho)}", f"delta0 = {_fmt(bg.delta0)}", "",
        "[nozzle]", f"length = {_fmt(spec.length)}", f"y_top = {_fmt(bg.y_top)}",
        f"y_bottom = {_fmt(bg.y_bottom)}",
        f"lower = {spec.lower.spec_text()}", f"lower_scale = {_fmt(spec.lower.scale)}",
        f"upper = {spec.upper.spec_text()}", f"upper_scale = {_fmt(spec.upper.scale)}", "",
        "[perturbation]", f"epsilon = {_fmt(spec.epsilon)}",
    ]
    for k, prof in spec.perturbations:
        out += [f"{k} = {prof.spec_text()}", f"{k}_scale = {_fmt(prof.scale)}"]
    out += ["", "[grid]", f"nx = {spec.nx}", f"ny_sub = {spec.ny_sub}", f"ny_sup = {spec.ny_sup}", "", "[solver]"]
    for f in fields(Controls):
        out.append(f"{f.name} = {_fmt(getattr(spec.controls, f.name))}")
    out += ["", "[output]", f"dir = {spec.output_dir}", f"emit_plots = {_fmt(spec.emit_plots)}", ""]
    return "\n".join(out)
