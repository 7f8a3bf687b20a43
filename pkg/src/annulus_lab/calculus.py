"""Functional calculus for rational functions of a matrix.

Three independent routes are provided and are expected to agree when the
spectrum sits inside the open annulus:

* :func:`eval_direct` evaluates the factored form ``p(T) q1(T)^-1 q2(T)^-1``,
* :func:`eval_laurent` sums the truncated two-sided power series,
* :func:`eval_contour` integrates the resolvent over the two-circle cycle
  around the annulus with the trapezoid rule.

:func:`riesz_projection` integrates the bare resolvent to split the spectrum
into the parts clustered near the two boundary circles.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import linalg, rational
from .errors import (
    NoSpectralGap,
    NotInvertible,
    PoleInsideContour,
    SeriesDivergent,
    Singular,
    SpectrumOnContour,
)
from .linalg import DEFAULT_TOLS, Tolerances
from .rational import AnnulusRational


def polyval_matrix(coeffs, t: np.ndarray) -> np.ndarray:
    """Horner evaluation of an ascending-coefficient polynomial at a matrix."""
    m = linalg.as_matrix(t)
    n = m.shape[0]
    out = np.zeros((n, n), dtype=complex)
    for c in reversed(tuple(coeffs)):
        out = out @ m
        out += c * np.eye(n)
    return out


def eval_direct(
    f: AnnulusRational, t, tols: Tolerances = DEFAULT_TOLS
) -> np.ndarray:
    """Evaluate ``f`` at ``T`` through the factored representation.

    Each linear denominator factor is inverted by a solve; the factors
    commute, so the ordering is immaterial up to roundoff.
    """
    rational.validate(f)
    m = linalg.as_matrix(t)
    n = m.shape[0]
    roots = f.q1_roots + f.q2_roots
    if roots:
        lams = linalg.spectrum(m)
        for root in roots:
            if np.min(np.abs(lams - root)) <= tols.rank_tol * max(1.0, abs(root)):
                raise Singular(f"spectrum touches denominator root {root}")
    out = polyval_matrix(f.p_coeffs, m) / f.scale
    eye = np.eye(n)
    for root in roots:
        try:
            out = linalg.solve(m - root * eye, out, tols)
        except Singular as exc:
            raise Singular(f"spectrum touches denominator root {root}") from exc
    return out


def eval_laurent(
    f: AnnulusRational,
    t,
    order: int,
    tols: Tolerances = DEFAULT_TOLS,
) -> np.ndarray:
    """Sum the truncated two-sided series ``sum_{|j| <= order} f_j T^j``.

    Requires ``T`` invertible with ``||T||`` and ``||r T^{-1}||`` at most
    ``1 + verify_tol``; the certified remainder for this route is available
    from :func:`laurent_remainder_bound`.
    """
    m = linalg.as_matrix(t)
    series = rational.laurent_expand(f, order)
    norm_t = linalg.operator_norm(m)
    if norm_t > 1.0 + tols.verify_tol:
        raise SeriesDivergent(f"||T|| = {norm_t} exceeds 1 + verify_tol")
    try:
        inv = linalg.inverse(m, tols)
    except Singular as exc:
        raise NotInvertible("series evaluation needs invertible T") from exc
    norm_rtinv = f.r * linalg.operator_norm(inv)
    if norm_rtinv > 1.0 + tols.verify_tol:
        raise SeriesDivergent(f"||r T^-1|| = {norm_rtinv} exceeds 1 + verify_tol")
    n = m.shape[0]
    out = series.coefficient(0) * np.eye(n)
    pow_pos = np.eye(n)
    pow_neg = np.eye(n)
    for j in range(1, order + 1):
        pow_pos = pow_pos @ m
        pow_neg = pow_neg @ inv
        out = out + series.coefficient(j) * pow_pos
        out = out + series.coefficient(-j) * pow_neg
    return out


def laurent_remainder_bound(
    f: AnnulusRational, t, order: int, tols: Tolerances = DEFAULT_TOLS
) -> float:
    """Certified bound on ``||eval_laurent(f, T, order) - f(T)||``.

    Uses the geometric tail model of the expansion inflated by the measured
    ``||T||`` and ``||r T^{-1}||``.
    """
    m = linalg.as_matrix(t)
    series = rational.laurent_expand(f, order)
    norm_t = linalg.operator_norm(m)
    norm_rtinv = f.r * linalg.operator_norm(linalg.inverse(m, tols))
    bound = series.operator_tail_bound(norm_t, norm_rtinv)
    if not np.isfinite(bound):
        raise SeriesDivergent("inflated series rates reach 1; no certified bound")
    return bound


# ---------------------------------------------------------------------------
# Contour route
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContourSpec:
    """Two-circle integration cycle: radii ``1 + delta`` and ``r - delta``."""

    delta: float
    nodes: int = 512

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.nodes < 16:
            raise ValueError("need at least 16 quadrature nodes per circle")


def default_contour(
    f: AnnulusRational | None, t, r: float, nodes: int = 512
) -> ContourSpec:
    """Margin rule: half the least clearance among poles and spectrum."""
    gaps = [0.5 * (1.0 - r)]
    if f is not None:
        if f.q1_roots:
            gaps.append(min(abs(a) for a in f.q1_roots) - 1.0)
        if f.q2_roots:
            gaps.append(r - max(abs(b) for b in f.q2_roots))
    if t is not None:
        mods = np.abs(linalg.spectrum(t))
        inside = mods[(mods > r) & (mods < 1.0)]
        gaps.append(float(np.min(1.0 - inside)) if inside.size else 0.5 * (1.0 - r))
        gaps.append(float(np.min(inside - r)) if inside.size else 0.5 * (1.0 - r))
    delta = 0.5 * min(g for g in gaps if g > 0) if any(g > 0 for g in gaps) else 0.25 * (1.0 - r)
    delta = min(delta, 0.45 * r, 0.5 * (1.0 - r))
    return ContourSpec(delta=delta, nodes=nodes)


def _circle_integral(integrand, radius: float, nodes: int) -> np.ndarray:
    """Trapezoid rule for ``(1/2 pi i) * closed integral`` over ``|w| = radius``.

    ``integrand(w)`` must return a matrix; nodes are accumulated in index
    order so the reduction is deterministic.
    """
    theta = 2.0 * np.pi * (np.arange(nodes) + 0.5) / nodes
    ws = radius * np.exp(1j * theta)
    acc = None
    for w in ws:
        term = integrand(w) * w
        acc = term if acc is None else acc + term
    return acc / nodes


def eval_contour(
    f: AnnulusRational,
    t,
    spec: ContourSpec,
    tols: Tolerances = DEFAULT_TOLS,
) -> np.ndarray:
    """Resolvent integral of ``f`` over the two-circle cycle.

    The outer circle ``|w| = 1 + delta`` is positively oriented, the inner
    circle ``|w| = r - delta`` negatively; spectrum must sit strictly between
    them and all poles strictly outside.
    """
    rational.validate(f)
    m = linalg.as_matrix(t)
    r = f.r
    outer = 1.0 + spec.delta
    inner = r - spec.delta
    if inner <= 0:
        raise ValueError("delta leaves no inner circle")
    if f.q1_roots and min(abs(a) for a in f.q1_roots) <= outer + 1e-12:
        raise PoleInsideContour("an outer-factor root is inside the outer circle")
    if f.q2_roots and max(abs(b) for b in f.q2_roots) >= inner - 1e-12:
        raise PoleInsideContour("an inner-factor root is outside the inner circle")
    mods = np.abs(linalg.spectrum(m))
    margin = 1e-10
    if np.any(mods >= outer - margin) or np.any(mods <= inner + margin):
        raise SpectrumOnContour("spectrum touches or escapes the contour")
    eye = np.eye(m.shape[0])

    def resolvent_term(w):
        return complex(rational.evaluate(f, w)) * linalg.solve(w * eye - m, eye, tols)

    return _circle_integral(resolvent_term, outer, spec.nodes) - _circle_integral(
        resolvent_term, inner, spec.nodes
    )


class SpectralPart(enum.Enum):
    OUTER = "outer"
    INNER = "inner"


def riesz_projection(
    t,
    part: SpectralPart,
    spec: ContourSpec,
    r: float,
    tols: Tolerances = DEFAULT_TOLS,
) -> np.ndarray:
    """Spectral projector onto the eigenvalues clustered near one circle.

    The spectrum must split across the mid radius ``(1 + r)/2`` with a margin
    of ``delta`` on each side, stay inside ``|w| = 1 + delta`` and outside
    ``|w| = r - delta``.
    """
    m = linalg.as_matrix(t)
    mid = 0.5 * (1.0 + r)
    mods = np.abs(linalg.spectrum(m))
    if np.any(np.abs(mods - mid) <= spec.delta):
        raise NoSpectralGap(f"eigenvalue modulus within delta of the split radius {mid}")
    if np.any(mods >= 1.0 + spec.delta - 1e-12) or np.any(mods <= r - spec.delta + 1e-12):
        raise NoSpectralGap("spectrum escapes the two-circle region")
    eye = np.eye(m.shape[0])

    def resolvent(w):
        return linalg.solve(w * eye - m, eye, tols)

    if part is SpectralPart.OUTER:
        return _circle_integral(resolvent, 1.0 + spec.delta, spec.nodes) - _circle_integral(
            resolvent, mid, spec.nodes
        )
    return _circle_integral(resolvent, mid, spec.nodes) - _circle_integral(
        resolvent, r - spec.delta, spec.nodes
    )
