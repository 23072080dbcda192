"""Convergence-rate certificates for the delayed variance-reduced update.

For a problem with per-instance smoothness L and strong convexity mu, a step
size eta, a delay bound tau and a total inner update count M, these routines
compute the constants that certify a per-epoch geometric decrease of the
expected suboptimality gap:

  * locked reads ("consistent" snapshots): a growth bound rho on the mean
    squared update norm sequence, and the resulting rate factor;
  * unlocked reads ("inconsistent" snapshots): the same growth bound under
    mixed-age reads, the snapshot inflation constant relating the read point
    to the true iterate, and the resulting rate factor.

All functions are pure and deterministic.  Infeasible inputs raise
:class:`Infeasible` with the violated conditions spelled out; rate-factor
routines instead return the factor together with a (possibly empty) list of
violated side conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

CONSISTENT = "consistent"
INCONSISTENT = "inconsistent"
SCHEMES = (CONSISTENT, INCONSISTENT)

RHO_MAX = 1e6  # beyond this the certificate is useless (rate factor >= 1)


class Infeasible(Exception):
    """No certificate exists for these inputs; lists the violated conditions."""

    def __init__(self, conditions):
        self.conditions = list(conditions)
        super().__init__("; ".join(self.conditions))


@dataclass
class ConvergenceCertificate:
    """Bundle of certified constants plus validity flags."""

    scheme: str
    smoothness: float          # L
    strong_convexity: float    # mu
    step_size: float           # eta
    delay_bound: int           # tau
    total_updates: int         # total inner updates per epoch
    young_param: float         # free splitting parameter r (default 1/eta)
    q_ratio_bound: float = math.nan       # rho: bound on consecutive q-ratio
    q_recursion_coeff: float = math.nan   # 2*max(1/r, r*eta^2*L^2), locked reads
    snapshot_inflation: float = math.nan  # unlocked reads only
    step_error_coeff: float = math.nan    # unlocked reads only
    rate_factor: float = math.nan         # per-epoch gap contraction
    valid: bool = False
    violated_conditions: list = field(default_factory=list)


def _smallest_crossing(resid, lower, message, strict=False):
    """Smallest x >= lower with resid(x) >= 0 (or > 0 when strict).

    resid must be negative at ``lower`` (or the lower bound itself is
    returned) and cross zero at most once before it peaks; a geometric sweep
    brackets the first crossing, bisection pins it down.
    """
    if resid(lower) >= 0 and not strict:
        return lower
    if strict and resid(lower) > 0:
        return lower
    x_prev, x = lower, lower
    while True:
        x = x * 1.05 + 1e-12
        if x > RHO_MAX:
            raise Infeasible([message])
        if resid(x) > 0:
            break
        x_prev = x
    lo, hi = x_prev, x
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if resid(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-13 * hi:
            break
    return hi


def q_ratio_bound_locked_reads(r: float, eta: float, L: float, tau: int) -> float:
    """Smallest growth bound rho for the q-sequence under locked snapshot reads.

    Feasibility needs the recursion coefficient c = 2*max(1/r, r*eta^2*L^2)
    in (0, 1); rho is then the smallest value above 1/(1-c) satisfying
    rho * (1 - c/2 * (1 + rho^tau)) >= 1.  With tau = 0 this collapses to
    rho = 1/(1-c).
    """
    if r <= 0 or eta <= 0 or L <= 0 or tau < 0:
        raise Infeasible(["need r > 0, eta > 0, L > 0, tau >= 0"])
    c = 2.0 * max(1.0 / r, r * eta * eta * L * L)
    if not 0.0 < c < 1.0:
        raise Infeasible(
            [f"coefficient 2*max(1/r, r*eta^2*L^2) = {c:.6g} must be in (0, 1)"])
    lower = 1.0 / (1.0 - c)

    def resid(rho):
        return rho * (1.0 - 0.5 * c * (1.0 + rho ** tau)) - 1.0

    if tau == 0:
        return lower
    return _smallest_crossing(
        resid, lower,
        f"no rho <= {RHO_MAX:.0e} satisfies rho*(1 - c/2*(1 + rho^tau)) >= 1")


def q_recursion_coeff(r: float, eta: float, L: float) -> float:
    return 2.0 * max(1.0 / r, r * eta * eta * L * L)


def q_ratio_bound_free_reads(r: float, eta: float, L: float, tau: int) -> float:
    """Smallest growth bound rho for the q-sequence under unlocked mixed-age reads.

    Needs r > 1 and 1 - 1/r - 4*r*eta^2*L^2 > 0; rho is the smallest value
    at least (1 + 4*r*eta^2*L^2) / (1 - 1/r - 4*r*eta^2*L^2) that satisfies
    the strict growth condition
    rho * (1 - 1/r - 4*r*eta^2*L^2*(tau+1)*rho^tau) > 1 + 4*r*eta^2*L^2.
    """
    if eta <= 0 or L <= 0 or tau < 0:
        raise Infeasible(["need eta > 0, L > 0, tau >= 0"])
    if r <= 1:
        raise Infeasible([f"splitting parameter r = {r:.6g} must exceed 1"])
    B = 4.0 * r * eta * eta * L * L
    D = 1.0 - 1.0 / r - B
    if D <= 0:
        raise Infeasible([f"1 - 1/r - 4*r*eta^2*L^2 = {D:.6g} must be > 0"])
    lower = (1.0 + B) / D

    def resid(rho):
        return rho * (1.0 - 1.0 / r - B * (tau + 1) * rho ** tau) - (1.0 + B)

    rho = _smallest_crossing(
        resid, lower,
        f"no rho <= {RHO_MAX:.0e} satisfies the strict mixed-age growth condition",
        strict=True)
    # the growth condition is strict; nudge off an exact zero crossing
    while resid(rho) <= 0:
        rho *= 1.0 + 1e-12
        if rho > RHO_MAX:
            raise Infeasible(["strictness nudge escaped the search cap"])
    return rho


def snapshot_inflation(r: float, eta: float, L: float, tau: int, rho: float) -> float:
    """Constant (> 1) bounding the read-point q by the true-iterate q.

    Equals 1 / (1 - 1/r - 4*r*tau*rho^tau*eta^2*L^2); infeasible when the
    denominator is not positive.
    """
    denom = 1.0 - 1.0 / r - 4.0 * r * tau * (rho ** tau) * eta * eta * L * L
    if denom <= 0:
        raise Infeasible(
            [f"1 - 1/r - 4*r*tau*rho^tau*eta^2*L^2 = {denom:.6g} must be > 0"])
    return 1.0 / denom


def rate_factor_locked_reads(mu: float, total_updates: int, eta: float, tau: int,
                             rho: float, L: float):
    """Per-epoch gap contraction factor under locked reads, with validity.

    factor = 1/(mu*M*eta*(1 - s)) + s/(1 - s) with
    s = 2*(tau+1)*rho^(2*tau)*eta*L.  Valid iff s < 1, 2*L*eta <= 1 and
    factor < 1.  Returns (factor, violated_conditions).
    """
    violated = []
    s = 2.0 * (tau + 1) * (rho ** (2 * tau)) * eta * L
    if not s < 1.0:
        violated.append(
            f"1 - 2*(tau+1)*rho^(2*tau)*eta*L = {1.0 - s:.6g} must be > 0")
        return math.inf, violated
    if 2.0 * L * eta > 1.0:
        violated.append(f"2*L*eta = {2.0 * L * eta:.6g} must be <= 1")
    factor = 1.0 / (mu * total_updates * eta * (1.0 - s)) + s / (1.0 - s)
    if not factor < 1.0:
        violated.append(f"rate factor = {factor:.6g} must be < 1")
    return factor, violated


def rate_factor_free_reads(mu: float, total_updates: int, eta: float, r: float,
                           L: float, tau: int, rho: float):
    """Per-epoch gap contraction factor under unlocked reads, with validity.

    With e = (4*L*eta^2 + 16*tau*rho^tau*L^2*eta^3) / (1 - 1/r -
    4*r*tau*rho^tau*eta^2*L^2), the factor is
    2/(mu*M*(2*eta - e)) + e/(2*eta - e), valid iff e < 2*eta and
    factor < 1.  Returns (factor, step_error_coeff, violated_conditions).
    """
    violated = []
    denom = 1.0 - 1.0 / r - 4.0 * r * tau * (rho ** tau) * eta * eta * L * L
    if denom <= 0:
        violated.append(
            f"1 - 1/r - 4*r*tau*rho^tau*eta^2*L^2 = {denom:.6g} must be > 0")
        return math.inf, math.nan, violated
    e = (4.0 * L * eta * eta + 16.0 * tau * (rho ** tau) * L * L * eta ** 3) / denom
    if not e < 2.0 * eta:
        violated.append(
            f"step error coefficient {e:.6g} must be < 2*eta = {2.0 * eta:.6g}")
        return math.inf, e, violated
    factor = 2.0 / (mu * total_updates * (2.0 * eta - e)) + e / (2.0 * eta - e)
    if not factor < 1.0:
        violated.append(f"rate factor = {factor:.6g} must be < 1")
    return factor, e, violated


def certify(scheme: str, L: float, mu: float, eta: float, tau: int,
            total_updates: int, r: float = None) -> ConvergenceCertificate:
    """Build the full certificate for one (scheme, eta) configuration.

    ``r`` defaults to 1/eta, which makes the whole construction a function
    of the step size alone.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if min(L, mu, eta) <= 0 or total_updates < 1 or tau < 0:
        raise ValueError("need positive L, mu, eta, total_updates >= 1, tau >= 0")
    if r is None:
        r = 1.0 / eta
    cert = ConvergenceCertificate(
        scheme=scheme, smoothness=L, strong_convexity=mu, step_size=eta,
        delay_bound=tau, total_updates=total_updates, young_param=r)
    try:
        if scheme == CONSISTENT:
            cert.q_recursion_coeff = q_recursion_coeff(r, eta, L)
            cert.q_ratio_bound = q_ratio_bound_locked_reads(r, eta, L, tau)
            cert.rate_factor, violated = rate_factor_locked_reads(
                mu, total_updates, eta, tau, cert.q_ratio_bound, L)
        else:
            cert.q_ratio_bound = q_ratio_bound_free_reads(r, eta, L, tau)
            cert.snapshot_inflation = snapshot_inflation(
                r, eta, L, tau, cert.q_ratio_bound)
            cert.rate_factor, cert.step_error_coeff, violated = rate_factor_free_reads(
                mu, total_updates, eta, r, L, tau, cert.q_ratio_bound)
    except Infeasible as inf:
        cert.violated_conditions = inf.conditions
        cert.valid = False
        return cert
    cert.violated_conditions = violated
    cert.valid = not violated
    return cert


def max_certified_step(L: float, mu: float, tau: int, total_updates: int,
                       scheme: str, eta_floor: float = 1e-15) -> float:
    """Largest step size with a valid certificate, to 1e-10, using r = 1/eta.

    Binary search between a known-certified step and the hard upper bound
    0.5/L (the 2*L*eta <= 1 requirement for locked reads; unlocked reads are
    strictly tighter).  Raises Infeasible if no step above ``eta_floor``
    certifies.
    """
    def certified(eta):
        return certify(scheme, L, mu, eta, tau, total_updates).valid

    hi = 0.5 / L
    lo = hi
    while not certified(lo):
        lo *= 0.5
        if lo < eta_floor:
            raise Infeasible(
                [f"no certified step size above {eta_floor:g} for scheme {scheme}"])
    if lo == hi:
        return hi
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if certified(mid):
            lo = mid
        else:
            hi = mid
    return lo


def certificate_to_text(cert: ConvergenceCertificate) -> str:
    """Flat key=value serialization for CLI display and test fixtures."""
    lines = [
        f"scheme={cert.scheme}",
        f"smoothness={cert.smoothness!r}",
        f"strong_convexity={cert.strong_convexity!r}",
        f"step_size={cert.step_size!r}",
        f"delay_bound={cert.delay_bound}",
        f"total_updates={cert.total_updates}",
        f"young_param={cert.young_param!r}",
        f"q_ratio_bound={cert.q_ratio_bound!r}",
        f"q_recursion_coeff={cert.q_recursion_coeff!r}",
        f"snapshot_inflation={cert.snapshot_inflation!r}",
        f"step_error_coeff={cert.step_error_coeff!r}",
        f"rate_factor={cert.rate_factor!r}",
        f"valid={str(cert.valid).lower()}",
        f"violated={'|'.join(cert.violated_conditions)}",
    ]
    return "\n".join(lines) + "\n"


def certificate_from_text(text: str) -> ConvergenceCertificate:
    kv = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        kv[key] = value
    return ConvergenceCertificate(
        scheme=kv["scheme"],
        smoothness=float(kv["smoothness"]),
        strong_convexity=float(kv["strong_convexity"]),
        step_size=float(kv["step_size"]),
        delay_bound=int(kv["delay_bound"]),
        total_updates=int(kv["total_updates"]),
        young_param=float(kv["young_param"]),
        q_ratio_bound=float(kv["q_ratio_bound"]),
        q_recursion_coeff=float(kv["q_recursion_coeff"]),
        snapshot_inflation=float(kv["snapshot_inflation"]),
        step_error_coeff=float(kv["step_error_coeff"]),
        rate_factor=float(kv["rate_factor"]),
        valid=kv["valid"] == "true",
        violated_conditions=[c for c in kv["violated"].split("|") if c],
    )
