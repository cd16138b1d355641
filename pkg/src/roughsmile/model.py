"""Model specification: parametric function families and named presets.

Functions enter the model only through an enumerated registry of parametric
families, so that nonnegativity of the volatility function, boundedness of the
coefficient functions and availability of derivatives are checkable by
construction instead of being promises about user-supplied callables.

Roles and admitted families:

* ``f`` (stochastic volatility function, must be >= 0):
  ``constant``, ``linear``, ``bergomi_f``, ``sqrt_plus``;
* ``psi`` (transformation of the convolved driver):
  ``identity_psi``, ``exp_psi``, ``shift_psi``, ``softplus_psi``;
* ``sigma`` (local volatility): ``constant``, ``tanh_bounded`` --- linear is
  rejected because the short-time theory needs bounded derivatives;
* ``a``, ``b`` (vol-driver diffusion/drift): ``constant``, ``tanh_bounded``,
  plus ``linear`` admitted with a deviation warning.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from . import kernels
from .errors import ConfigError, DerivativeUnavailable, InvalidInputError
from .kernels import KernelSpec

_FAMILY_PARAMS = {
    "constant": ("c",),
    "linear": ("m", "c"),
    "tanh_bounded": ("scale", "center"),
    "bergomi_f": ("xi", "eta", "H"),
    "sqrt_plus": ("floor",),
    "exp_psi": (),
    "identity_psi": (),
    "shift_psi": ("c",),
    "softplus_psi": ("k",),
}

F_FAMILIES = ("constant", "linear", "bergomi_f", "sqrt_plus")
PSI_FAMILIES = ("identity_psi", "exp_psi", "shift_psi", "softplus_psi")
COEFF_FAMILIES = ("constant", "tanh_bounded")  # linear admitted for a, b only

# JSON wire names for the psi families drop the suffix; both spellings parse.
_WIRE_ALIASES = {
    "identity": "identity_psi",
    "exp": "exp_psi",
    "shift": "shift_psi",
    "softplus": "softplus_psi",
}
_WIRE_NAMES = {v: k for k, v in _WIRE_ALIASES.items()}


@dataclass(frozen=True)
class FunctionFamily:
    """One member of the parametric function registry."""

    tag: str
    params: dict

    def __post_init__(self):
        if self.tag not in _FAMILY_PARAMS:
            raise ConfigError(f"unknown function family {self.tag!r}")
        expected = set(_FAMILY_PARAMS[self.tag])
        got = set(self.params)
        if expected != got:
            raise ConfigError(
                f"family {self.tag!r} expects parameters {sorted(expected)}, got {sorted(got)}"
            )
        for name, val in self.params.items():
            if not np.isfinite(val):
                raise ConfigError(f"family {self.tag!r}: parameter {name} must be finite")
        if self.tag == "bergomi_f" and self.params["xi"] <= 0.0:
            raise ConfigError("bergomi_f requires xi > 0")
        if self.tag == "bergomi_f" and not (0.0 < self.params["H"] < 1.0):
            raise ConfigError("bergomi_f requires H in (0, 1)")
        if self.tag == "sqrt_plus" and self.params["floor"] < 0.0:
            raise ConfigError("sqrt_plus requires floor >= 0")
        if self.tag == "softplus_psi" and self.params["k"] <= 0.0:
            raise ConfigError("softplus_psi requires k > 0")

    def __call__(self, v, t=0.0):
        return eval_family(self, v, t)


def family(tag: str, **params) -> FunctionFamily:
    """Construct a registry family, e.g. ``family("constant", c=0.3)``."""
    return FunctionFamily(tag, {k: float(v) for k, v in params.items()})


def eval_family(ff: FunctionFamily, v, t=0.0, want: str = "value"):
    """Evaluate a family or its v-derivative; vectorized over ``v``.

    Time-independent families ignore ``t``. Requesting ``dv`` exactly at a
    kink (sqrt_plus at its floor) raises :class:`DerivativeUnavailable` so
    callers can fall back to finite differences.
    """
    if want not in ("value", "dv"):
        raise InvalidInputError(f"want must be 'value' or 'dv', got {want!r}")
    v = np.asarray(v, dtype=np.float64)
    scalar = v.ndim == 0
    p = ff.params
    tag = ff.tag

    if tag == "constant":
        out = np.full_like(v, p["c"]) if want == "value" else np.zeros_like(v)
    elif tag == "linear":
        out = p["m"] * v + p["c"] if want == "value" else np.full_like(v, p["m"])
    elif tag == "tanh_bounded":
        th = np.tanh(v - p["center"])
        out = p["scale"] * th if want == "value" else p["scale"] * (1.0 - th * th)
    elif tag == "bergomi_f":
        eta = p["eta"]
        tpow = np.asarray(t, dtype=np.float64) ** (2.0 * p["H"])
        val = np.sqrt(p["xi"]) * np.exp(0.5 * eta * v - 0.25 * eta * eta * tpow)
        out = val if want == "value" else 0.5 * eta * val
    elif tag == "sqrt_plus":
        floor = p["floor"]
        if want == "value":
            out = np.sqrt(np.maximum(v, floor))
        else:
            if np.any(v == floor):
                raise DerivativeUnavailable(
                    f"sqrt_plus has a kink at v = floor = {floor}"
                )
            out = np.where(v > floor, 0.5 / np.sqrt(np.maximum(v, floor)), 0.0)
    elif tag == "exp_psi":
        out = np.exp(v)
    elif tag == "identity_psi":
        out = v.copy() if want == "value" else np.ones_like(v)
    elif tag == "shift_psi":
        out = v + p["c"] if want == "value" else np.ones_like(v)
    else:  # softplus_psi
        k = p["k"]
        out = np.logaddexp(0.0, k * v) / k if want == "value" else expit(k * v)
    return float(out) if scalar else out


@dataclass(frozen=True)
class ModelSpec:
    """Full rough-volatility model specification."""

    sigma: FunctionFamily
    f: FunctionFamily
    psi: FunctionFamily
    a: FunctionFamily
    b: FunctionFamily
    rho: float
    y0: float
    a0: float
    kernel: KernelSpec

    def with_(self, **kwargs) -> "ModelSpec":
        """Copy with fields replaced (convenience for tests and sweeps)."""
        return replace(self, **kwargs)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple
    warnings: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(m: ModelSpec) -> ValidationReport:
    """Check model invariants; returns diagnostics instead of raising.

    The probe grid for nonnegativity of f is v in [-10, 10], t in [0, 1].
    """
    violations = []
    warnings = []

    if not (-1.0 < m.rho < 1.0):
        violations.append("correlation degenerate: rho must satisfy |rho| < 1")
    if not m.kernel.mu < 0.0:
        violations.append("mu must be negative for short-time asymptotics")

    if m.f.tag not in F_FAMILIES:
        violations.append(f"f family {m.f.tag!r} is not admitted for the f role")
    else:
        vgrid = np.linspace(-10.0, 10.0, 201)
        fmin = min(
            float(eval_family(m.f, vgrid, t).min()) for t in (0.0, 0.25, 0.5, 0.75, 1.0)
        )
        if fmin < 0.0:
            violations.append("f takes negative values on the probe grid")

    if m.psi.tag not in PSI_FAMILIES:
        violations.append(f"psi family {m.psi.tag!r} is not admitted for the psi role")
    if m.sigma.tag not in COEFF_FAMILIES:
        violations.append(
            f"sigma family {m.sigma.tag!r} rejected: needs bounded derivatives"
        )
    for role, ff in (("a", m.a), ("b", m.b)):
        if ff.tag in COEFF_FAMILIES:
            continue
        if ff.tag == "linear":
            warnings.append(
                f"{role} family 'linear' is unbounded; admitted with deviation flag"
            )
        else:
            violations.append(f"{role} family {ff.tag!r} is not admitted")

    return ValidationReport(tuple(violations), tuple(warnings))


PRESETS = ("rough_bergomi", "rough_heston_like", "black_scholes")


def preset(name: str) -> ModelSpec:
    """Named model presets used throughout the docs and the test suite."""
    if name == "rough_bergomi":
        return ModelSpec(
            sigma=family("constant", c=1.0),
            f=family("bergomi_f", xi=0.04, eta=1.5, H=0.3),
            psi=family("identity_psi"),
            a=family("constant", c=1.0),
            b=family("constant", c=0.0),
            rho=-0.7,
            y0=0.0,
            a0=0.0,
            kernel=kernels.riemann_liouville(0.3),
        )
    if name == "rough_heston_like":
        return ModelSpec(
            sigma=family("constant", c=1.0),
            f=family("sqrt_plus", floor=0.0),
            psi=family("softplus_psi", k=10.0),
            a=family("tanh_bounded", scale=1.0, center=-1.0),
            b=family("constant", c=0.0),
            rho=-0.5,
            y0=0.0,
            a0=0.0,
            kernel=kernels.riemann_liouville(0.3),
        )
    if name == "black_scholes":
        return ModelSpec(
            sigma=family("constant", c=1.0),
            f=family("constant", c=0.3),
            psi=family("identity_psi"),
            a=family("constant", c=1.0),
            b=family("constant", c=0.0),
            rho=0.0,
            y0=0.0,
            a0=0.0,
            kernel=kernels.riemann_liouville(0.3),
        )
    raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")


def family_to_json(ff: FunctionFamily) -> dict:
    out = {"family": _WIRE_NAMES.get(ff.tag, ff.tag)}
    out.update(ff.params)
    return out


def family_from_json(d: dict) -> FunctionFamily:
    if not isinstance(d, dict) or "family" not in d:
        raise ConfigError("family config must be an object with a 'family' key")
    tag = _WIRE_ALIASES.get(d["family"], d["family"])
    params = {k: v for k, v in d.items() if k != "family"}
    try:
        return family(tag, **params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for family {tag!r}: {exc}") from exc


def model_to_json(m: ModelSpec) -> dict:
    return {
        "sigma": family_to_json(m.sigma),
        "f": family_to_json(m.f),
        "psi": family_to_json(m.psi),
        "a": family_to_json(m.a),
        "b": family_to_json(m.b),
        "rho": m.rho,
        "y0": m.y0,
        "a0": m.a0,
        "kernel": kernels.kernel_to_json(m.kernel),
    }


def model_from_json(d: dict) -> ModelSpec:
    required = ("sigma", "f", "psi", "a", "b", "rho", "y0", "a0", "kernel")
    missing = [k for k in required if k not in d]
    if missing:
        raise ConfigError(f"model config missing keys: {', '.join(missing)}")
    try:
        return ModelSpec(
            sigma=family_from_json(d["sigma"]),
            f=family_from_json(d["f"]),
            psi=family_from_json(d["psi"]),
            a=family_from_json(d["a"]),
            b=family_from_json(d["b"]),
            rho=float(d["rho"]),
            y0=float(d["y0"]),
            a0=float(d["a0"]),
            kernel=kernels.kernel_from_json(d["kernel"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"model config invalid: {exc}") from exc


def load_model(path) -> ModelSpec:
    """Read a model config from a JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return model_from_json(d)
