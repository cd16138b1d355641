"""Short-maturity rate functions and smile asymptotics for rough volatility.

Library layout (one module per concern):

* :mod:`roughsmile.grid` -- uniform-grid paths, discrete Holder norms;
* :mod:`roughsmile.kernels` -- singular kernel families and grid operators;
* :mod:`roughsmile.model` -- function-family registry, model specs, presets;
* :mod:`roughsmile.rate` -- the variational rate solver, tail rate, smile;
* :mod:`roughsmile.lift` -- Young pairing, Chen checks, skeleton ODE;
* :mod:`roughsmile.approx` -- stopping-time integrand freezing diagnostics;
* :mod:`roughsmile.mc` -- Monte Carlo simulation and validation experiments;
* :mod:`roughsmile.cli` -- the ``roughsmile`` batch command.
"""

from ._accel import HAVE_COMPILED
from .grid import GridFunction, holder_dist, holder_norm, modulus, resample
from .kernels import (
    KernelSpec,
    apply_k0,
    apply_k_eps,
    apply_k_path,
    conv_weights,
    gamma_fractional,
    kernel_eval,
    keps_convergence_report,
    power_law,
    riemann_liouville,
)
from .model import FunctionFamily, ModelSpec, eval_family, family, load_model, preset, validate
from .rate import RateResult, SmileTable, lambda_star, smile, solve_rate
from .mc import MCConfig, bs_price, implied_vol, option_price, simulate_terminal, tail_prob

__version__ = "0.1.0"

__all__ = [
    "GridFunction", "holder_norm", "holder_dist", "modulus", "resample",
    "KernelSpec", "riemann_liouville", "gamma_fractional", "power_law",
    "kernel_eval", "conv_weights", "apply_k0", "apply_k_path", "apply_k_eps",
    "keps_convergence_report",
    "FunctionFamily", "ModelSpec", "family", "eval_family", "preset",
    "validate", "load_model",
    "RateResult", "SmileTable", "solve_rate", "lambda_star", "smile",
    "MCConfig", "simulate_terminal", "tail_prob", "option_price", "bs_price",
    "implied_vol",
    "HAVE_COMPILED",
]
