"""Explicit constants of the positivity, smoothing and Harnack estimates.

Every public function takes an :class:`FdeParams` and returns constants in the
time clock of ``params.equation_form``.  Internally each family is built in
the clock where its derivation is natural (the flux/positivity chain in the
``u_t = Δ(u^m)`` clock, the L^p and Moser chains in the ``u_t = Δ(u^m)/m``
clock) and converted at the end.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, NamedTuple, Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar
from scipy.special import gamma

from .core import (
    WITH_INVERSE_M,
    WITHOUT_INVERSE_M,
    FdeParams,
    PreconditionError,
    time_factor,
    unit_ball_volume,
)

CUTOFF_DEGREE = 5
CUTOFF_SAMPLES = 20001
# Bound on |S'| for the quintic smoothstep S(x) = 10x^3 - 15x^4 + 6x^5.
SMOOTHSTEP_SLOPE = 15 / 8
MOSER_ALPHA = 0.5


@dataclass(frozen=True)
class ConstantEntry:
    value: float
    formula_tag: str
    inputs: dict = field(default_factory=dict)


class ConstantSet(Mapping):
    """Read-only mapping ``name -> ConstantEntry``."""

    def __init__(self, entries: Optional[dict] = None):
        self._entries: dict[str, ConstantEntry] = {}
        for name, entry in (entries or {}).items():
            self._add(name, entry)

    def _add(self, name: str, entry: ConstantEntry) -> None:
        if not entry.formula_tag:
            raise ValueError(f"constant {name!r} needs a formula tag")
        if not math.isfinite(entry.value):
            raise ValueError(f"constant {name!r} is not finite: {entry.value}")
        self._entries[name] = ConstantEntry(float(entry.value), entry.formula_tag, entry.inputs)

    def __getitem__(self, name: str) -> ConstantEntry:
        return self._entries[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def value(self, name: str) -> float:
        return self._entries[name].value

    def merged(self, other: "ConstantSet", prefix: str = "") -> "ConstantSet":
        out = ConstantSet(self._entries)
        for name, entry in other.items():
            out._add(prefix + name, entry)
        return out

    def rows(self) -> list[tuple[str, float, str]]:
        return [(n, e.value, e.formula_tag) for n, e in self._entries.items()]

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}={e.value:.6g}" for n, e in self._entries.items())
        return f"ConstantSet({inner})"


def _clock(params: FdeParams, native: str) -> float:
    """Factor taking a time measured in the ``native`` clock to the caller's clock."""
    return time_factor(params.with_form(native) if params.m > 0 else params, params.equation_form)


def _inputs(params: FdeParams, **extra) -> dict:
    return {"m": params.m, "d": params.d, "equation_form": params.equation_form, **extra}


# ---------------------------------------------------------------- cutoffs


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10 - 15 * x + 6 * x**2)


def _smoothstep_d1(x):
    x = np.clip(x, 0.0, 1.0)
    return 30 * x**2 * (1 - x) ** 2


def _smoothstep_d2(x):
    x = np.clip(x, 0.0, 1.0)
    return 60 * x * (1 - x) * (1 - 2 * x)


@dataclass(frozen=True)
class CutoffProfile:
    """Radial cutoff equal to 1 on ``[0, inner]`` and 0 from ``outer`` on."""

    degree: int
    inner: float
    outer: float
    d: int
    sup_d1: float
    sup_d2: float
    sup_laplacian: float

    @property
    def width(self) -> float:
        return self.outer - self.inner

    def __call__(self, r) -> np.ndarray:
        return 1.0 - _smoothstep((np.asarray(r, dtype=float) - self.inner) / self.width)

    def d1(self, r) -> np.ndarray:
        return -_smoothstep_d1((np.asarray(r, dtype=float) - self.inner) / self.width) / self.width

    def d2(self, r) -> np.ndarray:
        return -_smoothstep_d2((np.asarray(r, dtype=float) - self.inner) / self.width) / self.width**2

    def laplacian(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.d2(r) + (self.d - 1) * self.d1(r) / r


def make_cutoff(d: int, inner: float, outer: float, samples: int = CUTOFF_SAMPLES) -> CutoffProfile:
    if not 0 < inner < outer:
        raise PreconditionError("cutoff needs 0 < inner < outer")
    r = np.linspace(inner, outer, samples)
    x = (r - inner) / (outer - inner)
    w = outer - inner
    d1 = _smoothstep_d1(x) / w
    d2 = _smoothstep_d2(x) / w**2
    lap = np.abs(-d2 - (d - 1) * d1 / r)
    return CutoffProfile(
        CUTOFF_DEGREE, inner, outer, d, float(d1.max()), float(np.abs(d2).max()), float(lap.max())
    )


class Cutoff(NamedTuple):
    k0: float
    profile: CutoffProfile


@lru_cache(maxsize=256)
def _cutoff_k0_cached(d: int, R: float, R0: float, samples: int) -> Cutoff:
    prof = make_cutoff(d, 2 * R, R0, samples)
    return Cutoff(1.0 / ((R0 - 2 * R) ** 2 * prof.sup_laplacian), prof)


def cutoff_k0(d: int, R: float, R0: float, samples: int = CUTOFF_SAMPLES) -> Cutoff:
    """Cutoff on ``[2R, R0]`` and ``k0 = (R0-2R)^-2 / max|Δφ|``."""
    if not 0 < 2 * R < R0:
        raise PreconditionError(f"need R0 > 2R > 0, got R={R}, R0={R0}")
    return _cutoff_k0_cached(int(d), float(R), float(R0), int(samples))


def k0_for_ratio(d: int, lam: float) -> float:
    """``k0`` for the geometry ``R0 = 2 lam R`` (independent of ``R``)."""
    if lam <= 1:
        raise PreconditionError(f"lambda must exceed 1, got {lam}")
    return cutoff_k0(d, 1.0, 2.0 * lam).k0


# ---------------------------------------------------- Sobolev and Poincaré


@lru_cache(maxsize=None)
def sobolev_constant(d: int) -> float:
    """Optimal constant in ``||f||_{2d/(d-2)} <= S ||∇f||_2`` on R^d."""
    if d < 3:
        raise PreconditionError("the Sobolev constant needs d >= 3")
    return (math.pi * d * (d - 2)) ** -0.5 * (gamma(d) / gamma(d / 2)) ** (1 / d)


def sobolev_bubble_quotient(d: int) -> float:
    """``||f||_{2*} / ||∇f||_2`` for the extremal ``f = (1+r^2)^{-(d-2)/2}``, by quadrature."""
    if d < 3:
        raise PreconditionError("the Sobolev constant needs d >= 3")
    area = d * unit_ball_volume(d)
    two_star = 2 * d / (d - 2)
    a = (d - 2) / 2

    def f_pow(r):
        return (1 + r * r) ** (-a * two_star) * r ** (d - 1)

    def grad_sq(r):
        return (2 * a * r * (1 + r * r) ** (-a - 1)) ** 2 * r ** (d - 1)

    num = area * quad(f_pow, 0, np.inf, limit=200, epsabs=0, epsrel=1e-12)[0]
    den = area * quad(grad_sq, 0, np.inf, limit=200, epsabs=0, epsrel=1e-12)[0]
    return num ** (1 / two_star) / math.sqrt(den)


def bessel_j(nu: float, x: float, terms: int = 80) -> float:
    """Power series for ``J_nu(x)``; accurate for the moderate ``x`` needed here."""
    half = x / 2
    total = 0.0
    for k in range(terms):
        log_mag = (2 * k + nu) * math.log(half) - math.lgamma(k + 1) - math.lgamma(k + nu + 1)
        term = math.exp(log_mag)
        total += -term if k % 2 else term
        if k > half and term < 1e-18 * abs(total):
            break
    return total


def first_bessel_zero(nu: float, step: float = 0.05, tol: float = 1e-13) -> float:
    x_prev = step
    f_prev = bessel_j(nu, x_prev)
    x = x_prev
    while True:
        x = x_prev + step
        f = bessel_j(nu, x)
        if f_prev * f <= 0:
            break
        x_prev, f_prev = x, f
        if x > 50:
            raise RuntimeError(f"no Bessel zero found for nu={nu}")
    lo, hi = x_prev, x
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        fm = bessel_j(nu, mid)
        if f_prev * fm <= 0:
            hi = mid
        else:
            lo, f_prev = mid, fm
    return 0.5 * (lo + hi)


@lru_cache(maxsize=None)
def poincare_constant(d: int) -> float:
    """``1/j`` with ``j`` the first zero of ``J_{d/2-1}``: ``||f||_2 <= P ||∇f||_2`` on ``B_1``."""
    if d < 1:
        raise PreconditionError("d must be >= 1")
    return 1.0 / first_bessel_zero(d / 2 - 1)


# ------------------------------------------------------- extinction times


def _need_sobolev(params: FdeParams) -> None:
    if params.d < 3:
        raise PreconditionError("this constant uses the Sobolev inequality and needs d >= 3")


def extinction_constants(
    params: FdeParams, p: Optional[float] = None, alphaR: Optional[float] = None
) -> ConstantSet:
    """Decay rates of ``||u||_p^{1-m}`` that bound the extinction time on ``B_{alphaR}``.

    ``K_pc`` is the universal rate for ``p = p_c``; ``K_pc_sobolev`` is the
    same bound with the Sobolev constant entering as ``S^-2``, which is the
    sharper of the two.  ``K_p`` needs ``p > max(p_c, 1)`` and the radius.
    """
    _need_sobolev(params)
    m, d = params.m, params.d
    S2 = sobolev_constant(d)
    p_c = d * (1 - m) / 2
    f = _clock(params, WITH_INVERSE_M)
    out = ConstantSet()
    if m < params.m_c:
        base = 8 * (d * (1 - m) - 2) / ((d - 2) ** 2 * (1 - m))
        out._add("K_pc", ConstantEntry(
            base * S2**2 / f, "8(d(1-m)-2) S^2 / ((d-2)^2 (1-m))", _inputs(params)))
        out._add("K_pc_sobolev", ConstantEntry(
            base * S2**-2 / f, "8(d(1-m)-2) S^-2 / ((d-2)^2 (1-m))", _inputs(params)))
    if p is not None:
        if p <= max(p_c, 1.0):
            raise PreconditionError(f"K_p needs p > max(p_c, 1) = {max(p_c, 1.0):g}, got {p}")
        if alphaR is None or alphaR <= 0:
            raise PreconditionError("K_p needs a positive radius alphaR")
        P = poincare_constant(d)
        val = (
            4 * (1 - m) * (p - 1) / (p + m - 1) ** 2
            * (P * alphaR) ** (-2 * (1 - p_c / p))
            * S2 ** (-2 * p_c / p)
        )
        out._add("K_p", ConstantEntry(
            val / f, "4(1-m)(p-1)/(p+m-1)^2 (P alphaR)^(-2(1-p_c/p)) S^(-2p_c/p)",
            _inputs(params, p=p, alphaR=alphaR)))
    return out


# ------------------------------------------------------ local L^p growth


@lru_cache(maxsize=256)
def _lp_cutoff_bounds(lam: float) -> tuple[float, float]:
    """Scaled derivative bounds of the cutoff on ``[1, lam]``.

    Returns ``(c0', c0'')`` with ``|φ'| <= c0'/(lam-1)`` and
    ``|φ'| + |φ''| <= c0''/(lam-1)^2``.
    """
    x = np.linspace(0.0, 1.0, CUTOFF_SAMPLES)
    w = lam - 1
    d1 = _smoothstep_d1(x) / w
    d2 = np.abs(_smoothstep_d2(x)) / w**2
    return float(d1.max() * w), float((d1 + d2).max() * w**2)


def lp_evolution_factor(params: FdeParams, p: float, lam: float) -> float:
    """Dimensionless ``c_p`` in ``K = c_p (R0-R)^-2 Vol(B_R0 \\ B_R)^((1-m)/p)``."""
    m, d = params.m, params.d
    b = 3 * p / (1 - m)
    c1, c2 = _lp_cutoff_bounds(float(lam))
    return b * (b - 1) * (c1**2 + max(d - 1, 1) * c2) * (1 - m) / abs(p + m - 1)


def lp_evolution_constant(params: FdeParams, p: float, R: float, R0: float) -> float:
    """Rate ``K`` with ``[∫_{B_R} u(t)^p]^{(1-m)/p} <= [∫_{B_R0} u(s)^p]^{(1-m)/p} + K (t-s)``."""
    m = params.m
    if p < 1 or p <= 1 - m:
        raise PreconditionError(f"need p >= 1 and p > 1-m = {1 - m:g}, got p={p}")
    if not 0 < R < R0:
        raise PreconditionError("need 0 < R < R0")
    c_p = lp_evolution_factor(params, p, R0 / R)
    vol = unit_ball_volume(params.d) * (R0**params.d - R**params.d)
    return c_p / (R0 - R) ** 2 * vol ** ((1 - m) / p) / _clock(params, WITH_INVERSE_M)


# ---------------------------------------------------------- Moser chain


def moser_recursion(params: FdeParams, p0: float, steps: int) -> np.ndarray:
    """Exponents ``p_0, ..., p_steps`` of ``p_{k+1} = p_k (1 + 1/q) + m - 1``."""
    q = params.d / 2
    out = np.empty(steps + 1)
    out[0] = p0
    for k in range(steps):
        out[k + 1] = out[k] * (1 + 1 / q) + params.m - 1
    return out


def moser_limit_ratio(params: FdeParams, p0: float, k: int) -> float:
    """``(1 + 1/q)^{k+1} / p_{k+1}``, computed without overflow."""
    q = params.d / 2
    r = 1 + 1 / q
    D = p0 - q * (1 - params.m)
    return 1.0 / (D + q * (1 - params.m) * r ** (-(k + 1)))


def energy_coercivity(m: float, p: float) -> float:
    """Coefficient of the gradient term in the local energy estimate at exponent ``p``."""
    return min((p - 1) / p, 2 * (p - 1) ** 2 / (p + m - 1) ** 2)


def _coercivity_floor(params: FdeParams, p0: float, alpha: float) -> float:
    m = params.m
    ps = moser_recursion(params, p0, 400)
    floor = min(energy_coercivity(m, pk) for pk in ps)
    if m < 0:
        displayed = min(abs(m) / (1 - m), 2 * (1 + abs(m) / (alpha * (1 - m))) ** 2)
        floor = min(floor, displayed)
    return floor


def _product_constant(q: float, D: float) -> float:
    """Supremum over ``k`` of the weight product ``prod_j (j+1)^{4 r^{k-j+1} / p_{k+1}}``.

    The ratio ``r^{k+1}/p_{k+1}`` increases to ``1/D``, so the supremum is
    the limit ``exp(4/D * sum_j r^{-j} log(j+1))``.
    """
    r = 1 + 1 / q
    j = np.arange(0, 20000)
    series = float(np.sum(r ** (-j.astype(float)) * np.log(j + 1.0)))
    return math.exp(4 * series / D)


def _check_moser_range(params: FdeParams, p: float, alpha: float) -> None:
    m, d = params.m, params.d
    if d < 3:
        raise PreconditionError("Moser constants are implemented for d >= 3 only")
    p_c = d * (1 - m) / 2
    if p <= 1:
        raise PreconditionError("Moser constants need p > 1 (the energy estimate degenerates at p = 1)")
    if m <= params.m_c and p <= p_c:
        raise PreconditionError(f"need p > p_c = {p_c:g} when m <= m_c")
    if p <= 1 - m:
        raise PreconditionError(f"need p > 1-m = {1 - m:g}")
    if m < 0 and p < (1 + alpha) * (1 - m):
        raise PreconditionError(
            f"for m < 0 need p >= (1+alpha)(1-m) = {(1 + alpha) * (1 - m):g} (alpha={alpha})"
        )


@lru_cache(maxsize=256)
def _moser_native(m: float, d: int, p: float, epsilon: float, alpha: float) -> dict:
    params = FdeParams(m, d, WITH_INVERSE_M)
    q = d / 2
    D = p - q * (1 - m)
    S2 = sobolev_constant(d)
    omega = unit_ball_volume(d)
    C_m = _coercivity_floor(params, p, alpha)
    energy = 3 * 2 * SMOOTHSTEP_SLOPE**2 / C_m
    c1 = 6 / math.pi**2
    c2 = 90 / math.pi**4
    J0 = (2 * S2) ** 2
    G = _product_constant(q, D)
    s1 = G / math.exp(4 * (q + 1))
    C_loc = (
        2 ** ((p - 1) / D)
        * J0 ** (q / D)
        * (2 * energy * max(c1**-2, c2**-1)) ** ((q + 1) / D)
        * G
    )
    S0 = 2 ** (p / (1 - m) - 1)
    kappa = max(1.0, 2 ** (1 / D - 1))

    def bars(eps: float) -> tuple[float, float, float]:
        K_eps = lp_evolution_constant(params, p, 1.0, 1.0 + eps)
        eps_term = S0 * K_eps ** (p / (1 - m)) / (p / (1 - m) + 1)
        scale = kappa * 2 ** ((q + 1) / D) * C_loc / eps ** (2 * (q + 1) / D)
        return scale * S0 ** (1 / D), scale * (eps_term + omega) ** (1 / D), eps_term

    Cbar1, Cbar2, eps_term = bars(epsilon)
    C1, C2_rho, _ = bars(1.0)
    return {
        "q": q, "D": D, "C_m": C_m, "energy": energy, "c1_series": c1, "c2_series": c2,
        "J0": J0, "product": G, "s1": s1, "C_loc": C_loc, "S0": S0, "kappa": kappa,
        "eps_term": eps_term, "Cbar1": Cbar1, "Cbar2": Cbar2, "C1": C1,
        "C2": C2_rho * 4 ** (1 / (1 - m)),
    }


def moser_constants(
    params: FdeParams, p: float, epsilon: float = 0.5, alpha: float = MOSER_ALPHA
) -> ConstantSet:
    """Constants of the local smoothing bound.

    Point form: ``u(t,0) <= C1 t^{-d θ} (∫_{B_R0} u0^p)^{2θ} + C2 (t/R0^2)^{1/(1-m)}``.
    Cylinder form with ``R1 = (1-ε)ϱ``, ``R0 = (1+ε)ϱ``: the sup over
    ``(ε^2 t, t] x B_R1`` is at most ``Cbar1 t^{-dθ} (∫ u0^p)^{2θ} + Cbar2 (t/ϱ^2)^{1/(1-m)}``.
    """
    if not 0 < epsilon <= 1:
        raise PreconditionError(f"epsilon must lie in (0, 1], got {epsilon}")
    _check_moser_range(params, p, alpha)
    nat = _moser_native(float(params.m), int(params.d), float(p), float(epsilon), float(alpha))
    m, d = params.m, params.d
    theta = 1 / (2 * p - d * (1 - m))
    f = _clock(params, WITH_INVERSE_M)
    c1_scale = f ** (d * theta)
    c2_scale = f ** (-1 / (1 - m))
    inp = _inputs(params, p=p, epsilon=epsilon, alpha=alpha)
    tags = {
        "C_m": "min over the exponent sequence of min{(p-1)/p, 2(p-1)^2/(p+m-1)^2}",
        "c1_series": "1 / sum_{k>=1} k^-2",
        "c2_series": "1 / sum_{k>=1} k^-4",
        "J0": "(2 S)^2",
        "energy": "6 c_psi^2 / C_m",
        "product": "sup_k prod_j (j+1)^(4 r^(k-j+1)/p_(k+1))",
        "s1": "product / e^(4(q+1))",
        "C_loc": "2^((p-1)/D) J0^(q/D) (2 E max(c1^-2, c2^-1))^((q+1)/D) G",
        "Cbar1": "kappa S0^(1/D) 2^((q+1)/D) C_loc / eps^(2(q+1)/D)",
        "Cbar2": "kappa 2^((q+1)/D) C_loc eps^(-2(q+1)/D) (eps_term + omega_d)^(1/D)",
        "C1": "Cbar1 at eps = 1",
        "C2": "Cbar2 at eps = 1 times 4^(1/(1-m))",
    }
    out = ConstantSet()
    for name, tag in tags.items():
        val = nat[name]
        if name in ("Cbar1", "C1"):
            val *= c1_scale
        elif name in ("Cbar2", "C2"):
            val *= c2_scale
        out._add(name, ConstantEntry(val, tag, inp))
    return out


# --------------------------------------------- positivity and the AC forms


def critical_time(params: FdeParams, R: float, lam: float, M: float) -> float:
    """Time up to which the center lower bound holds, for data of mass ``M`` in ``B_R``
    and the minimal problem on ``B_{2 lam R}``."""
    if M <= 0:
        raise PreconditionError("mass must be positive")
    if lam <= 1:
        raise PreconditionError(f"lambda = R0/(2R) must exceed 1, got {lam}")
    if not 0 < params.m < 1:
        raise PreconditionError("critical time needs 0 < m < 1")
    d, m = params.d, params.m
    R0 = 2 * lam * R
    k0 = cutoff_k0(d, R, R0).k0
    vol = unit_ball_volume(d) * (R0**d - (2 * R) ** d)
    return _clock(params, WITHOUT_INVERSE_M) * k0 / 2 * (R0 - 2 * R) ** 2 * (M / vol) ** (1 - m)


def _positivity_native(d: int, m: float, lam: float) -> dict:
    k0 = k0_for_ratio(d, lam)
    k2 = k0 / 2
    omega = unit_ball_volume(d)
    shell = omega * (lam**d - 1)
    c0 = k2 * 4 * (lam - 1) ** 2 / (2**d * shell) ** (1 - m)
    c1p = k2 * 2 ** (2 - d) * (lam - 1) ** 2 / shell
    C1 = 2**d * shell / (k2 ** (1 / (1 - m)) * (2 * (lam - 1)) ** (2 / (1 - m)))
    return {"k0": k0, "k2": k2, "c0_prime": c0, "c1_prime": c1p, "C1": C1, "C2": 1 / c1p}


def positivity_constants(params: FdeParams, lam: float = 1.5) -> ConstantSet:
    """Center lower bound and the two-term mass bounds for the minimal problem on ``B_{2 lam R}``.

    * ``t_* = c0_prime R^{2-d(1-m)} M^{1-m}``
    * ``u^m(t,0) >= c1_prime R^{2-d} M T^{-1/(1-m)} t^{m/(1-m)}`` for ``t <= t_*``
    * ``M/R^d <= C1 R^{-2/(1-m)} t^{1/(1-m)} + C2 T^{1/(1-m)} R^{-2} t^{-m/(1-m)} u^m(t,0)``
    * ``C3`` replaces ``T^{1/(1-m)}`` by ``||u0||_{p_c}`` when ``m < m_c``.
    """
    if not 0 < params.m < 1:
        raise PreconditionError("positivity constants need 0 < m < 1")
    if lam <= 1:
        raise PreconditionError("lambda must exceed 1")
    m, d = params.m, params.d
    nat = _positivity_native(d, m, lam)
    f = _clock(params, WITHOUT_INVERSE_M)
    inp = _inputs(params, lam=lam)
    out = ConstantSet({
        "k0": ConstantEntry(nat["k0"], "(R0-2R)^-2 / max|Δφ|", inp),
        "k2": ConstantEntry(nat["k2"], "k0 / 2", inp),
        "c0_prime": ConstantEntry(
            f * nat["c0_prime"], "k2 (2(lam-1))^2 / (2^d omega_d (lam^d-1))^(1-m)", inp),
        "c1_prime": ConstantEntry(
            f * nat["c1_prime"], "k2 2^(2-d) (lam-1)^2 / (omega_d (lam^d-1))", inp),
        "C1": ConstantEntry(
            nat["C1"] * f ** (-1 / (1 - m)),
            "2^d omega_d (lam^d-1) / (k2^(1/(1-m)) (2(lam-1))^(2/(1-m)))", inp),
        "C2": ConstantEntry(nat["C2"] / f, "1 / c1_prime", inp),
    })
    if d >= 3 and m < params.m_c:
        K = extinction_constants(params).value("K_pc")
        out._add("C3", ConstantEntry(out.value("C2") * K ** (-1 / (1 - m)),
                                     "C2 K_pc^(-1/(1-m))", inp))
    return out


# ----------------------------------------------------- good fast diffusion


def barenblatt_peak_constant(params: FdeParams) -> float:
    """``c`` in ``||u(t)||_inf <= c t^{-dθ_1} ||u0||_1^{2θ_1}``, attained by the Barenblatt profile."""
    m, d = params.m, params.d
    if not params.m_c < m < 1:
        raise PreconditionError("the Barenblatt bound needs m_c < m < 1")
    theta1 = 1 / (2 - d * (1 - m))
    k = (1 - m) * theta1 / (2 * m)
    a = 1 / (1 - m)
    I_d = math.pi ** (d / 2) * gamma(a - d / 2) / gamma(a)
    native = (k ** (d / 2) / I_d) ** (2 * theta1)
    return native * _clock(params, WITHOUT_INVERSE_M) ** (d * theta1)


@lru_cache(maxsize=64)
def _unit_extinction_bound(m: float, d: int) -> tuple[float, float]:
    """Upper bound for the extinction time of unit mass on ``B_1`` and the optimal ``t0``."""
    from .exact import separable_profile

    params = FdeParams(m, d, WITHOUT_INVERSE_M)
    cB = barenblatt_peak_constant(params)
    S1 = float(separable_profile(params, R0=2.0)(1.0)[()])
    theta1 = 1 / (2 - d * (1 - m))

    def bound(log_t0):
        t0 = math.exp(log_t0)
        return (cB / (S1 * t0 ** (d * theta1))) ** (1 - m) + t0

    res = minimize_scalar(bound, bounds=(-20.0, 10.0), method="bounded",
                          options={"xatol": 1e-10})
    return float(res.fun), float(math.exp(res.x))


def good_range_constants(params: FdeParams) -> ConstantSet:
    """Two-sided extinction bounds and the mass-free lower bound for ``m_c < m < 1``.

    * ``c1 ||u0||_{L^1(B_{R/3})}^{1-m} R^{2-d(1-m)} <= T <= c2 ||u0||_{L^1(B_R)}^{1-m} R^{2-d(1-m)}``
    * ``u(t, 0) >= c_md (t/R^2)^{1/(1-m)}`` for the minimal problem on ``B_{3R}``, ``t < t_*``.
    """
    m, d = params.m, params.d
    if not params.m_c < m < 1:
        raise PreconditionError("good-range constants need m_c < m < 1")
    f = _clock(params, WITHOUT_INVERSE_M)
    k2 = k0_for_ratio(d, 1.5) / 2
    omega = unit_ball_volume(d)
    c1 = k2 / 9 / (omega * (1 - (2 / 3) ** d)) ** (1 - m)
    c2, t0 = _unit_extinction_bound(float(m), int(d))
    pos = _positivity_native(d, m, 1.5)
    expo = (2 - d * (1 - m)) / (1 - m)
    c_md = (pos["c1_prime"] * c2 ** (-1 / (1 - m)) * 3 ** (-expo)) ** (1 / m)
    inp = _inputs(params)
    return ConstantSet({
        "c_B": ConstantEntry(barenblatt_peak_constant(params),
                             "(k^(d/2)/I_d)^(2 theta_1), k = (1-m)theta_1/(2m)", inp),
        "c1": ConstantEntry(f * c1, "k2 / 9 / (omega_d (1-(2/3)^d))^(1-m)", inp),
        "c2": ConstantEntry(f * c2, "min_t0 [c_B/(S(1) t0^(d theta_1))]^(1-m) + t0", inp),
        "c2_t0": ConstantEntry(f * t0, "minimizing t0 for c2", inp),
        "c_md": ConstantEntry(c_md * f ** (-1 / (1 - m)),
                              "(c1_prime c2^(-1/(1-m)) 3^(-(2-d(1-m))/(1-m)))^(1/m)", inp),
    })


# ------------------------------------------------------------- Harnack


HARNACK_DATA_RATIO = 2.0
HARNACK_DOMAIN_RATIO = 4.5


def harnack_constants(params: FdeParams, p: float) -> ConstantSet:
    """Ingredients of the Harnack bounds for data in ``B_R`` and balls of radius ``R``.

    Lower bounds come from the minimal problem on ``B_{9R/2}`` with data in
    ``B_{2R}``, so ``inf_{B_R} u(s) >= A s^{1/(1-m)}`` with
    ``A^m = c1_prime 2^{2-d} R^{-d} M T_m^{-1/(1-m)}`` up to ``t_* = h2 R^{2-d(1-m)} M^{1-m}``.
    ``T_m^{1/(1-m)} <= k R^{2/(1-m)-d/p} ||u0||_p`` closes the intrinsic chain.
    ``p = 1`` (good range only) uses the Barenblatt bound for the upper side.
    """
    m, d = params.m, params.d
    if not 0 < m < 1:
        raise PreconditionError("Harnack constants need 0 < m < 1")
    lam = HARNACK_DOMAIN_RATIO / HARNACK_DATA_RATIO
    pos = positivity_constants(params, lam)
    f = _clock(params, WITHOUT_INVERSE_M)
    k2 = pos.value("k2")
    omega = unit_ball_volume(d)
    h2 = f * k2 * (HARNACK_DOMAIN_RATIO - HARNACK_DATA_RATIO) ** 2 / (
        omega * (HARNACK_DOMAIN_RATIO**d - HARNACK_DATA_RATIO**d)) ** (1 - m)
    c1p = pos.value("c1_prime")
    inp = _inputs(params, p=p)
    if p == 1:
        good = good_range_constants(params)
        k = good.value("c2") ** (1 / (1 - m)) * HARNACK_DOMAIN_RATIO ** (2 / (1 - m) - d)
        C1, C2 = good.value("c_B"), 0.0
        k_tag = "c2^(1/(1-m)) (9/2)^(2/(1-m)-d)"
        up_tag = "Barenblatt peak constant"
    else:
        Kp = extinction_constants(params, p, 1.0).value("K_p")
        k = Kp ** (-1 / (1 - m)) * HARNACK_DOMAIN_RATIO ** (2 / (1 - m) - d / p)
        mc = moser_constants(params, p, epsilon=1.0)
        C1, C2 = mc.value("C1"), mc.value("C2")
        k_tag = "K_p(1)^(-1/(1-m)) (9/2)^(2/(1-m)-d/p)"
        up_tag = "point smoothing constant"
    theta = 1 / (2 * p - d * (1 - m))
    a = 2 * p * theta / (1 - m)
    lower = c1p * 2.0 ** (2 - d)
    h1 = (lower / k) ** (1 / m) / (C1 * h2 ** (-a) + C2 * omega ** (2 * theta * (p - 1)))
    out = ConstantSet({
        "c1_prime": ConstantEntry(c1p, "center lower bound constant at lambda = 9/8", inp),
        "h2": ConstantEntry(h2, "k2 (5/2)^2 / (omega_d ((9/2)^d - 2^d))^(1-m)", inp),
        "k": ConstantEntry(k, k_tag, inp),
        "C1_up": ConstantEntry(C1, up_tag, inp),
        "h1": ConstantEntry(h1, "(c1' 2^(2-d)/k)^(1/m) / (C1 h2^-a + C2 omega_d^(2 theta (p-1)))", inp),
    })
    if C2 > 0:
        out._add("C2_up", ConstantEntry(C2, up_tag, inp))
    if p > 1:
        out._add("C6", ConstantEntry(
            lower ** (1 / m) * 2 ** (-1 / (1 - m)) / max(C1, C2),
            "(c1' 2^(2-d))^(1/m) 2^(-1/(1-m)) / max(C1, C2)", inp))
        cyl = moser_constants(params, p, epsilon=1 / 3)
        out._add("alt_C1", ConstantEntry(cyl.value("Cbar1"), "Cbar1 at eps = 1/3", inp))
        out._add("alt_C2", ConstantEntry(
            cyl.value("Cbar2") * 1.5 ** (-2 / (1 - m)) * (lower / k) ** (-1 / m),
            "Cbar2(1/3) (3/2)^(-2/(1-m)) (c1' 2^(2-d)/k)^(-1/m)", inp))
    return out


# ------------------------------------------------------------- summary


def all_constants(
    params: FdeParams, p: float = 2.0, R: float = 1.0, lam: float = 1.5, epsilon: float = 0.5
) -> ConstantSet:
    """Every constant that applies to ``params``; inapplicable families are skipped."""
    out = ConstantSet()
    d, m = params.d, params.m
    builders: list[tuple[str, Callable[[], ConstantSet]]] = [
        ("", lambda: positivity_constants(params, lam)),
        ("", lambda: extinction_constants(params, p if p > max(d * (1 - m) / 2, 1) else None, R)),
        ("moser_", lambda: moser_constants(params, p, epsilon)),
        ("good_", lambda: good_range_constants(params)),
        ("harnack_", lambda: harnack_constants(params, p)),
    ]
    if d >= 3:
        out._add("S2", ConstantEntry(sobolev_constant(d), "Talenti closed form", _inputs(params)))
    out._add("P", ConstantEntry(poincare_constant(d), "1 / first zero of J_(d/2-1)", _inputs(params)))
    if p >= 1 and p > 1 - m:
        out._add("K_R_R0_p", ConstantEntry(
            lp_evolution_constant(params, p, R, 2 * lam * R),
            "c_p (R0-R)^-2 Vol(B_R0 minus B_R)^((1-m)/p)", _inputs(params, p=p, R=R, R0=2 * lam * R)))
    if 0 < m < 1:
        M = 1.0
        out._add("t_star", ConstantEntry(critical_time(params, R, lam, M),
                                         "(k0/2)(R0-2R)^2 [M/Vol(A0)]^(1-m), M = 1", _inputs(params, R=R, lam=lam)))
    for prefix, build in builders:
        try:
            part = build()
        except PreconditionError:
            continue
        for name, entry in part.items():
            key = prefix + name
            if key not in out:
                out._add(key, entry)
    return out
