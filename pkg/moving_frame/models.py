# Copyright (c) 2026, moving_frame developers
# All rights reserved.
#
# Redistribution and use in source and binary forms, with or without
# modification, are permitted provided that the following conditions are met:
#
# * Redistributions of source code must retain the above copyright notice, this
#   list of conditions and the following disclaimer.
#
# * Redistributions in binary form must reproduce the above copyright notice,
#   this list of conditions and the following disclaimer in the documentation
#   and/or other materials provided with the distribution.
#
# * Neither the name of the copyright holder nor the names of its
#   contributors may be used to endorse or promote products derived from
#   this software without specific prior written permission.
#
# THIS SOFTWARE IS PROVIDED BY THE COPYRIGHT HOLDERS AND CONTRIBUTORS "AS IS"
# AND ANY EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT LIMITED TO, THE
# IMPLIED WARRANTIES OF MERCHANTABILITY AND FITNESS FOR A PARTICULAR PURPOSE ARE
# DISCLAIMED. IN NO EVENT SHALL THE COPYRIGHT HOLDER OR CONTRIBUTORS BE LIABLE
# FOR ANY DIRECT, INDIRECT, INCIDENTAL, SPECIAL, EXEMPLARY, OR CONSEQUENTIAL
# DAMAGES (INCLUDING, BUT NOT LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR
# SERVICES; LOSS OF USE, DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER
# CAUSED AND ON ANY THEORY OF LIABILITY, WHETHER IN CONTRACT, STRICT LIABILITY,
# OR TORT (INCLUDING NEGLIGENCE OR OTHERWISE) ARISING IN ANY WAY OUT OF THE USE
# OF THIS SOFTWARE, EVEN IF ADVISED OF THE POSSIBILITY OF SUCH DAMAGE.


import numpy as np

from moving_frame.core.conditions import example_staircase
from moving_frame.core.sde import CoefficientSet
from moving_frame.errors import DomainError

_geometric_defaults = {
    "mu": 0.05,
    "sigma": 0.2,
    "jump": 1.0,
}

_linear_defaults = {
    "mu": -1.0,
    "sigma": 0.0,
    "jump": 0.0,
}

_sin_drift_defaults = {
    "scale": 1.0,
    "sigma": 0.1,
    "jump": 0.0,
}

_staircase_defaults = {
    "scale": 1.0,
    "sigma": 0.0,
}

_cubic_defaults = {
    "coef": 1.0,
    "sigma": 0.0,
}

_power_defaults = {
    "coef": 1.0,
    "p": 2.0,
    "sigma": 0.0,
}

_custom_table_defaults = {
    "x": [-1.0, 1.0],
    "y": [-1.0, 1.0],
    "sigma": 0.0,
}


def _additive(sigma, dim, noise_dim):
    E = sigma * np.eye(dim, noise_dim)

    def b(t, y):
        return E

    return None if sigma == 0 else b


def _mark_jump(scale, dim):
    "c(t, y, x) = scale * x, x broadcast over the state coordinates."

    def c(t, y, x):
        return scale * np.broadcast_to(x, (dim,))

    return None if scale == 0 else c


def zero(dim=1, noise_dim=1):
    return CoefficientSet(dim, noise_dim, regularity=("globally_lipschitz",), name="zero")


def geometric(mu, sigma, jump, dim=1, noise_dim=1):
    """a = mu y, b = sigma diag(y) (coordinate k driven by Wiener coordinate k),
    c(t, y, x) = jump * y * x_0."""
    E = np.eye(dim, noise_dim)
    return CoefficientSet(
        dim,
        noise_dim,
        drift=lambda t, y: mu * y,
        diffusion=lambda t, y: sigma * y[:, None] * E,
        jump=lambda t, y, x: jump * y * x[0],
        regularity=("globally_lipschitz",),
        name="geometric",
    )


def linear(mu, sigma, jump, dim=1, noise_dim=1):
    "a = mu y, additive noise sigma, additive jumps jump * x."
    return CoefficientSet(
        dim,
        noise_dim,
        drift=lambda t, y: mu * y,
        diffusion=_additive(sigma, dim, noise_dim),
        jump=_mark_jump(jump, dim),
        regularity=("globally_lipschitz",),
        name="linear",
    )


def sin_drift(scale, sigma, jump, dim=1, noise_dim=1):
    "a = scale * y * sin(||y||): locally Lipschitz with linear growth."
    return CoefficientSet(
        dim,
        noise_dim,
        drift=lambda t, y: scale * y * np.sin(np.linalg.norm(y)),
        diffusion=_additive(sigma, dim, noise_dim),
        jump=_mark_jump(jump, dim),
        regularity=("locally_lipschitz", "linear_growth"),
        name="sin-drift",
    )


def staircase(scale, sigma, dim=1, noise_dim=1):
    "Coordinate-wise staircase drift; Lipschitz constant n+1 on [n, n+1]."
    return CoefficientSet(
        dim,
        noise_dim,
        drift=lambda t, y: scale * example_staircase(y),
        diffusion=_additive(sigma, dim, noise_dim),
        regularity=("locally_lipschitz", "linear_growth"),
        name="staircase",
    )


def cubic(coef, sigma, dim=1, noise_dim=1):
    "a = coef * ||y||^2 y: locally Lipschitz, no linear growth."
    return CoefficientSet(
        dim,
        noise_dim,
        drift=lambda t, y: coef * np.dot(y, y) * y,
        diffusion=_additive(sigma, dim, noise_dim),
        regularity=("locally_lipschitz", "locally_bounded"),
        name="cubic",
    )


def power(coef, p, sigma, dim=1, noise_dim=1):
    "a = coef * sign(y) |y|^p coordinate-wise. Locally Lipschitz only for p >= 1."
    if p <= 0:
        raise DomainError("power exponent must be positive")
    flags = ["locally_bounded"]
    if p >= 1:
        flags.append("locally_lipschitz")
    if p == 1:
        flags.append("linear_growth")
    return CoefficientSet(
        dim,
        noise_dim,
        drift=lambda t, y: coef * np.sign(y) * np.abs(y) ** p,
        diffusion=_additive(sigma, dim, noise_dim),
        regularity=flags,
        name="power",
    )


def custom_table(x, y, sigma, dim=1, noise_dim=1):
    """Piecewise-linear drift through the points (x_i, y_i), constant beyond the
    table, applied coordinate-wise."""
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2 or np.any(np.diff(xs) <= 0):
        raise DomainError("custom-table needs increasing x and matching y with at least two points")
    return CoefficientSet(
        dim,
        noise_dim,
        drift=lambda t, v: np.interp(v, xs, ys),
        diffusion=_additive(sigma, dim, noise_dim),
        regularity=("globally_lipschitz",),
        name="custom-table",
    )


_families = {
    "zero": (lambda p, d, w: zero(d, w), {}),
    "geometric": (lambda p, d, w: geometric(p["mu"], p["sigma"], p["jump"], d, w), _geometric_defaults),
    "linear": (lambda p, d, w: linear(p["mu"], p["sigma"], p["jump"], d, w), _linear_defaults),
    "sin-drift": (lambda p, d, w: sin_drift(p["scale"], p["sigma"], p["jump"], d, w), _sin_drift_defaults),
    "staircase": (lambda p, d, w: staircase(p["scale"], p["sigma"], d, w), _staircase_defaults),
    "cubic": (lambda p, d, w: cubic(p["coef"], p["sigma"], d, w), _cubic_defaults),
    "power": (lambda p, d, w: power(p["coef"], p["p"], p["sigma"], d, w), _power_defaults),
    "custom-table": (lambda p, d, w: custom_table(p["x"], p["y"], p["sigma"], d, w), _custom_table_defaults),
}


def family_names():
    return sorted(_families.keys())


def resolve_family(name):
    "Returns (factory, default parameters) of a named coefficient family."
    if name not in _families:
        raise KeyError("Could not resolve coefficient family %r" % (name,))
    return _families[name]


def family_params(name, params=None):
    "Default parameters of the family overridden by params; unknown names raise KeyError."
    _, defaults = resolve_family(name)
    params = dict(params or {})
    unknown = set(params) - set(defaults)
    if unknown:
        raise KeyError("unknown parameter(s) for family %s: %s" % (name, ", ".join(sorted(unknown))))
    merged = dict(defaults)
    merged.update(params)
    return merged


def build_coefficients(family, params=None, dim=1, noise_dim=1):
    "CoefficientSet of the named family with the given parameters."
    factory, _ = resolve_family(family)
    return factory(family_params(family, params), dim, noise_dim)


def _small_mark_mean(marks):
    "int_B x_0 F(dx) (exact for atoms, by quadrature otherwise)."
    if marks is None:
        return 0.0
    nodes, weights = marks.small_quadrature(32)
    return float(np.dot(weights, nodes[:, 0])) if nodes.shape[0] else 0.0


def geometric_exact(params, y0, noise, q):
    """Closed-form Y_T of the geometric family on a noise path (stochastic
    exponential), coordinate k driven by Wiener coordinate k:

    y0 exp((mu - sigma^2 lambda_k / 2) T - jump (int_B x_0 F(dx)) T + sigma W_T^k)
    times the product of (1 + jump x_n) over all jumps."""
    p = family_params("geometric", params)
    y0 = np.asarray(y0, dtype=np.float64)
    dim = y0.size
    if noise.noise_dim < dim:
        raise DomainError("geometric oracle needs one Wiener coordinate per state coordinate")
    lam = np.asarray(q.eigenvalues)[:dim]
    T = noise.horizon
    W = noise.wiener_increments[:, :dim].sum(axis=0)
    drift = (p["mu"] - 0.5 * p["sigma"] ** 2 * lam) * T - p["jump"] * _small_mark_mean(noise.marks) * T
    factor = np.prod(1.0 + p["jump"] * noise.jump_marks[:, 0]) if noise.jump_times.size else 1.0
    return y0 * np.exp(drift + p["sigma"] * W) * factor


def linear_exact(params, y0, noise, q=None):
    """Closed-form Y_T of the linear family without Wiener noise:

    e^{mu T} y0 + sum_n e^{mu (T - kappa_n)} jump x_n - jump (int_B x F(dx)) (e^{mu T} - 1) / mu."""
    p = family_params("linear", params)
    if p["sigma"] != 0:
        raise DomainError("linear oracle is only available for sigma = 0")
    y0 = np.asarray(y0, dtype=np.float64)
    mu, s, T = p["mu"], p["jump"], noise.horizon
    out = np.exp(mu * T) * y0
    if s != 0:
        for kappa, x in zip(noise.jump_times, noise.jump_marks):
            out = out + np.exp(mu * (T - kappa)) * s * np.broadcast_to(x, y0.shape)
        growth = np.expm1(mu * T) / mu if mu != 0 else T
        out = out - s * _small_mark_mean(noise.marks) * growth
    return out


_oracles = {
    "geometric": geometric_exact,
    "linear": linear_exact,
}


def oracle_for(family, params=None):
    """Closed-form terminal value y0, noise, q -> Y_T for the family, or None
    when no closed form is known for these parameters."""
    if family not in _oracles:
        return None
    if family == "linear" and family_params(family, params)["sigma"] != 0:
        return None
    fn = _oracles[family]
    return lambda y0, noise, q: fn(params, y0, noise, q)
