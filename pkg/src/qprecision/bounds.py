"""Precision bounds on trajectory observables.

The thermodynamic bound constrains the relative fluctuation of any
reversal-odd observable by a universal function of the total
irreversibility; the kinetic bound constrains observables that vanish on
the quiet set by the inactivity alone.  Both checkers operate on exact
ensemble statistics and flag violations beyond numerical slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import qlinalg
from .errors import (
    BoundViolationError,
    ConvergenceError,
    DomainError,
    ModeError,
    SingularError,
)
from .model import KrausSet
from .tolerances import TOL
from .trajectories import TrajectoryStats

__all__ = [
    "SMALL_X_SWITCH",
    "inverse_xtanhx",
    "fluctuation_floor",
    "BoundCheck",
    "check_tur",
    "check_kur",
    "SurvivalData",
    "survival_activity",
    "short_time_asymmetry_floor",
    "quality_factor",
    "BoundReport",
    "bound_report",
]

SMALL_X_SWITCH = 1e-6


def inverse_xtanhx(y: float) -> float:
    """Unique nonnegative root of x * tanh(x) = y.

    Safeguarded Newton iteration inside the bracket [sqrt(y), max(sqrt(y), y) + 1];
    the residual is driven below root_residual * max(1, y).
    """
    y = float(y)
    if y < 0.0:
        raise DomainError(f"x*tanh(x) is nonnegative, got target {y}")
    if y == 0.0:
        return 0.0
    lo = math.sqrt(y)
    hi = max(lo, y) + 1.0
    x = lo if lo > 0.0 else hi / 2
    tol = TOL.root_residual * max(1.0, y)
    for _ in range(200):
        t = math.tanh(x)
        g = x * t - y
        if abs(g) <= tol:
            return x
        if g > 0.0:
            hi = x
        else:
            lo = x
        dg = t + x * (1.0 - t * t)
        x_new = x - g / dg if dg > 0.0 else x
        x = x_new if lo < x_new < hi else 0.5 * (lo + hi)
    raise ConvergenceError(f"root of x*tanh(x) = {y} did not converge")


def fluctuation_floor(x: float) -> float:
    """Tight lower bound f(x) on the relative fluctuation of a current.

    f(x) = csch(g(x/2))^2 with g the inverse of x * tanh(x); this form is
    exactly 4 * (g(x/2)/x)^2 - 1 but free of the cancellation that kills the
    subtracted form in double precision once x grows past ~15.  Below the
    switch point the Laurent expansion 2/x - 2/3 + 2x/45 takes over.
    """
    x = float(x)
    if x <= 0.0:
        raise DomainError(f"fluctuation floor needs x > 0, got {x}")
    if x < SMALL_X_SWITCH:
        return 2.0 / x - 2.0 / 3.0 + 2.0 * x / 45.0
    r = inverse_xtanhx(0.5 * x)
    if r > 20.0:
        e = math.exp(-2.0 * r)
        return 4.0 * e / (1.0 - e) ** 2
    s = math.sinh(r)
    return 1.0 / (s * s)


@dataclass(frozen=True)
class BoundCheck:
    """Outcome of testing one precision bound against exact statistics."""

    name: str
    rel_fluct: float | None
    bound: float | None
    margin: float | None
    vacuous: bool
    note: str = ""


def check_tur(stats: TrajectoryStats) -> BoundCheck:
    """Test the thermodynamic bound var/mean^2 >= f(total irreversibility).

    Only reversal-odd observables qualify.  A zero mean (or zero
    irreversibility, which forces one) makes the bound vacuous; a margin
    below the numerical slack raises BoundViolationError.
    """
    if stats.observable_kind != "current":
        raise ModeError("thermodynamic bound needs a reversal-odd observable")
    mean, var = stats.mean_phi, stats.var_phi
    if mean == 0.0:
        return BoundCheck("tur", None, None, None, True, "zero mean current")
    s = stats.total_irreversibility
    if s <= TOL.zero_prob:
        return BoundCheck("tur", var / mean**2, None, None, True, "zero irreversibility")
    bound = fluctuation_floor(s)
    rel = var / mean**2
    margin = rel - bound
    if margin < -TOL.bound_slack:
        raise BoundViolationError(
            f"thermodynamic bound violated: rel fluct {rel:.12g} < floor {bound:.12g}"
        )
    return BoundCheck("tur", rel, bound, margin, False)


def check_kur(stats: TrajectoryStats) -> BoundCheck:
    """Test the kinetic bound var/mean^2 >= inactivity/(1 - inactivity).

    Requires an observable that vanishes on the quiet set."""
    if stats.mean_phi is None:
        raise ModeError("kinetic bound needs an observable")
    if not stats.phi_zero_on_iset:
        raise ModeError("kinetic bound needs an observable vanishing on the quiet set")
    mean, var = stats.mean_phi, stats.var_phi
    if mean == 0.0:
        return BoundCheck("kur", None, None, None, True, "zero mean")
    quiet = stats.inactivity
    if quiet >= 1.0 - 1e-15:
        return BoundCheck("kur", var / mean**2, None, None, True, "fully quiet ensemble")
    bound = quiet / (1.0 - quiet) if quiet > 0.0 else 0.0
    rel = var / mean**2
    margin = rel - bound
    if margin < -TOL.bound_slack:
        raise BoundViolationError(
            f"kinetic bound violated: rel fluct {rel:.12g} < floor {bound:.12g}"
        )
    return BoundCheck("kur", rel, bound, margin, False)


class SurvivalData(NamedTuple):
    """No-change probability and its conjugate activity for a pure environment."""

    survival: float
    activity: float


def survival_activity(fwd: KrausSet, rho_s, n_rounds: int = 1) -> SurvivalData:
    """Survival statistics of an n-round run against a pure environment.

    survival is the probability that every environment copy stays in its
    prepared level; activity is tr(G^{-1} rho) for G the survival metric.
    Their product is at least one, so 1/survival <= activity.
    """
    p = fwd.env_probs
    idx = int(np.argmax(p))
    if abs(float(p[idx]) - 1.0) > 1e-12:
        raise ModeError("survival analysis needs a pure environment preparation")
    rho = qlinalg.require_density_matrix(rho_s, what="rho_s")
    v = np.linalg.matrix_power(fwd.ops[idx, idx], n_rounds)
    g = v.conj().T @ v
    w, _ = qlinalg.herm_eig(g)
    if float(w[0]) <= 1e-12:
        raise SingularError(f"survival metric is singular (min eig {float(w[0]):.3e})")
    survival = float(np.real(np.trace(g @ rho)))
    activity = float(np.real(np.trace(np.linalg.solve(g, rho))))
    return SurvivalData(survival=survival, activity=activity)


def short_time_asymmetry_floor(h, jump_ops, rho_s, duration: float) -> float:
    """Leading-order lower bound on the asymmetry of a short continuous run.

    Quadratic in the duration, controlled by the commutator of the
    Hamiltonian with the total jump rate operator.
    """
    h = qlinalg.require_hermitian(h, what="h")
    rho = qlinalg.require_density_matrix(rho_s, what="rho_s")
    j = np.zeros_like(h)
    for op in jump_ops:
        op = qlinalg.as_cmatrix(op)
        j = j + op.conj().T @ op
    num = abs(np.trace(rho @ (h @ j - j @ h))) ** 2
    den = float(np.real(np.trace(rho @ (2.0 * h @ h + 0.5 * j @ j))))
    if den <= 0.0:
        return 0.0
    return (8.0 / 9.0) * float(num) / den * duration**2


def quality_factor(stats: TrajectoryStats) -> float | None:
    """Relative fluctuation over the entropy-production-only floor.

    Values below one witness precision beyond what entropy production alone
    permits classically.  None when the mean vanishes or there is no
    entropy production to compare against.
    """
    if stats.mean_phi is None or stats.mean_phi == 0.0:
        return None
    if stats.entropy_production <= TOL.zero_prob:
        return None
    rel = stats.var_phi / stats.mean_phi**2
    return rel / fluctuation_floor(stats.entropy_production)


@dataclass(frozen=True)
class BoundReport:
    """Bundle of every bound evaluated for one experiment and observable."""

    rel_fluct: float | None
    tur_bound: float | None
    tur_sigma_only: float | None
    kur_bound: float | None
    survival_bound: float | None
    loschmidt_bound: float | None
    quality_factor: float | None
    margins: dict = field(default_factory=dict)
    flags: tuple = ()

    def to_json(self) -> dict:
        return {
            "rel_fluct": self.rel_fluct,
            "tur_bound": self.tur_bound,
            "tur_sigma_only": self.tur_sigma_only,
            "kur_bound": self.kur_bound,
            "survival_bound": self.survival_bound,
            "loschmidt_bound": self.loschmidt_bound,
            "quality_factor": self.quality_factor,
            "margins": dict(self.margins),
            "flags": list(self.flags),
        }


def bound_report(
    stats: TrajectoryStats,
    *,
    survival: SurvivalData | None = None,
    echo: float | None = None,
) -> BoundReport:
    """Evaluate every applicable bound and collect margins and flags.

    Violations beyond slack raise; vacuous cases are flagged instead.
    """
    margins: dict[str, float] = {}
    flags: list[str] = []
    rel = stats.rel_fluct
    tur_bound = tur_sigma_only = kur_bound = None
    if stats.observable_kind == "current":
        chk = check_tur(stats)
        tur_bound = chk.bound
        if chk.margin is not None:
            margins["tur"] = chk.margin
        if chk.vacuous:
            flags.append("tur_vacuous")
        if stats.entropy_production > TOL.zero_prob:
            tur_sigma_only = fluctuation_floor(stats.entropy_production)
    if stats.mean_phi is not None and stats.phi_zero_on_iset:
        chk = check_kur(stats)
        kur_bound = chk.bound
        if chk.margin is not None:
            margins["kur"] = chk.margin
        if chk.vacuous:
            flags.append("kur_vacuous")

    survival_bound = None
    if survival is not None:
        margin = survival.activity - 1.0 / survival.survival
        margins["survival"] = margin
        if margin < -TOL.bound_slack:
            raise BoundViolationError(
                f"survival bound violated: 1/survival {1.0/survival.survival:.12g} "
                f"> activity {survival.activity:.12g}"
            )
        if survival.activity > 1.0:
            survival_bound = 1.0 / (survival.activity - 1.0)
        else:
            flags.append("survival_vacuous")

    loschmidt_bound = None
    if echo is not None:
        if not (0.0 <= echo <= 1.0 + 1e-12):
            raise DomainError(f"echo must be a probability, got {echo}")
        if echo < 1.0 - 1e-15 and echo > 0.0:
            loschmidt_bound = echo / (1.0 - echo)
        else:
            flags.append("loschmidt_vacuous")

    return BoundReport(
        rel_fluct=rel,
        tur_bound=tur_bound,
        tur_sigma_only=tur_sigma_only,
        kur_bound=kur_bound,
        survival_bound=survival_bound,
        loschmidt_bound=loschmidt_bound,
        quality_factor=quality_factor(stats),
        margins=margins,
        flags=tuple(flags),
    )
