"""Iterated non-resonance expansion: S_k sums, the F_s recursion, and
matching of predictions to oracle eigenvalues.

S_k(a, v) sums q_{g1} ... q_{gk} q_{-g1-...-gk} over tuples from the
summation pool with all partial sums nonzero, divided by the product of
denominators a - |v - (g1+...+gj)|^{2l}.  The known parts follow the
recursion F_0 = 0, F_s = sum_{k<=s} S_k evaluated at |v|^{2l} + F_{s-1}.

All spectral arithmetic runs in the frame relative to |v|^{2l}: the
denominators use the cancellation-free identity for |v|^{2l} - |v-s|^{2l},
so predictions stay meaningful at large |v| where the absolute eigenvalues
dwarf machine epsilon.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NoCandidate, SmallDenominator
from .geometry import MAX_SERIES_ORDER, ParameterCascade
from .lattice import LatticeModel
from .numerics import loglog_slope, power_difference
from .oracle import BlochSpectrum, bloch_solve
from .potential import FourierPotential

_REALITY_REL = 1e-12
_REALITY_ABS = 1e-15


@dataclass(frozen=True)
class SeriesEvaluation:
    """One A_k = S_1 + ... + S_k evaluation at a fixed spectral parameter."""

    center: np.ndarray
    degree: int
    order: int
    a_rel: float  # a - |v|^{2l}
    values: tuple[float, ...]  # S_1 .. S_k
    denominator_floor: float
    term_counts: tuple[int, ...]  # contributing tuples per k
    admissible_counts: tuple[int, ...]  # tuples with nonzero partial sums per k

    @property
    def total(self) -> float:
        return float(sum(self.values))


def _series_pool(q: FourierPotential, pool_radius: float | None):
    """Summation pool and coefficient table.

    A finite pool radius truncates the potential as a whole, so the closing
    coefficient q_{-g1-...-gk} is drawn from the same table as the tuple
    entries; this keeps each S_k exactly real for Hermitian tables (tuples
    pair with their reversed-negated partners over equal denominators).
    """
    if pool_radius is not None and pool_radius < q.support_radius:
        q = q.truncate(pool_radius)[0]
    pool = [(coords, q.lattice.vector(coords).embedding, q.coefficient(coords)) for coords in q.support]
    return q, pool


def _sum_order(a_rel: float, v: np.ndarray, l: int, q: FourierPotential, k: int,
               pool, min_denominator: float) -> tuple[complex, float, int, int]:
    """(sum, denominator floor, contributing count, admissible count) for one k."""
    d = len(v)
    v_sq = float(v @ v)
    total = 0j
    floor = np.inf
    contributing = 0
    admissible = 0

    def denominator(sigma_emb: np.ndarray) -> float:
        # a - |v - sigma|^{2l} = a_rel - (|v - sigma|^{2l} - |v|^{2l})
        first = float(sigma_emb @ sigma_emb) - 2.0 * float(v @ sigma_emb)
        return a_rel - power_difference(first, v_sq + first, v_sq, l)

    def walk(depth: int, sigma: tuple, sigma_emb: np.ndarray, numer: complex, denom: float):
        nonlocal total, floor, contributing, admissible
        for coords, emb, coeff in pool:
            s_new = tuple(a + b for a, b in zip(sigma, coords))
            if all(c == 0 for c in s_new):
                continue  # partial sums must be nonzero
            emb_new = sigma_emb + emb
            den = denominator(emb_new)
            if abs(den) < floor:
                floor = abs(den)
            if abs(den) <= min_denominator:
                raise SmallDenominator(s_new, abs(den))
            if depth == k:
                admissible += 1
                closing = q.coefficient(tuple(-c for c in s_new))
                if closing != 0:
                    contributing += 1
                    total += numer * coeff * closing / (denom * den)
            else:
                walk(depth + 1, s_new, emb_new, numer * coeff, denom * den)

    if pool:
        walk(1, (0,) * d, np.zeros(d), 1.0 + 0j, 1.0)
    if not np.isfinite(floor):
        floor = np.inf
    return total, float(floor), contributing, admissible


def _assert_real(value: complex, context: str) -> float:
    if abs(value.imag) > _REALITY_REL * abs(value) + _REALITY_ABS:
        raise ValueError(f"{context}: imaginary part {value.imag!r} of {value!r} exceeds the Hermitian-reality bound")
    return float(value.real)


def evaluate_series(a_rel: float, v, l: int, q: FourierPotential, k: int,
                    pool_radius: float | None = None,
                    min_denominator: float | None = None) -> SeriesEvaluation:
    """S_1 .. S_k at the spectral parameter |v|^{2l} + a_rel."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > MAX_SERIES_ORDER:
        raise ValueError(f"k = {k} exceeds the series cap {MAX_SERIES_ORDER}")
    v = np.asarray(v, dtype=float)
    if min_denominator is None:
        min_denominator = 1e-12 * (1.0 + abs(a_rel))
    q_eff, pool = _series_pool(q, pool_radius)
    values, terms, admissible = [], [], []
    floor = np.inf
    for kk in range(1, k + 1):
        total, fl, contr, adm = _sum_order(a_rel, v, l, q_eff, kk, pool, min_denominator)
        values.append(_assert_real(total, f"S_{kk}"))
        terms.append(contr)
        admissible.append(adm)
        floor = min(floor, fl)
    return SeriesEvaluation(
        center=v.copy(), degree=l, order=k, a_rel=float(a_rel),
        values=tuple(values), denominator_floor=float(floor),
        term_counts=tuple(terms), admissible_counts=tuple(admissible),
    )


def s_k(a: float, v, l: int, q: FourierPotential, k: int,
        pool_radius: float | None = None, min_denominator: float | None = None) -> float:
    """Single S_k at the absolute spectral parameter a."""
    v = np.asarray(v, dtype=float)
    a_rel = float(a) - float(v @ v) ** l
    ev = evaluate_series(a_rel, v, l, q, k, pool_radius, min_denominator)
    return ev.values[-1]


@dataclass(frozen=True)
class KnownPartExpansion:
    """F_0 .. F_{k_max} and the predictions |v|^{2l} + F_{k-1}."""

    center: np.ndarray
    degree: int
    base: float  # |v|^{2l}
    f_values: tuple[float, ...]  # F_0 .. F_{k_max}
    evaluations: tuple[SeriesEvaluation, ...]  # evaluation behind each F_s, s >= 1

    @property
    def order(self) -> int:
        return len(self.f_values) - 1

    def prediction_rel(self, k: int) -> float:
        """P_k - |v|^{2l} = F_{k-1} for k >= 1."""
        if k < 1:
            raise ValueError("prediction order k must be >= 1")
        return self.f_values[k - 1]

    def prediction(self, k: int) -> float:
        return self.base + self.prediction_rel(k)

    def known_part(self) -> float:
        return self.base + self.f_values[-1]

    def known_part_rel(self) -> float:
        return self.f_values[-1]


def known_part_sequence(v, l: int, q: FourierPotential, cascade: ParameterCascade | None = None,
                        k_max: int | None = None, pool_radius: float | None = None,
                        min_denominator: float | None = None) -> KnownPartExpansion:
    """Run the recursion F_s = A_s(|v|^{2l} + F_{s-1}) up to k_max.

    The caller is responsible for v being non-resonant under the active
    mode; a SmallDenominator escape is the numerical symptom of a violated
    precondition.
    """
    v = np.asarray(v, dtype=float)
    if k_max is None:
        if cascade is None:
            raise ValueError("need k_max or a cascade")
        k_max = cascade.known_order()
    cap = MAX_SERIES_ORDER if cascade is None else min(MAX_SERIES_ORDER, cascade.k1)
    if k_max > cap:
        raise ValueError(f"k_max = {k_max} exceeds the cap {cap}")
    if pool_radius is None and cascade is not None:
        pool_radius = cascade.series_pool_radius()
    base = float(v @ v) ** l
    f_values = [0.0]
    evaluations = []
    for s in range(1, k_max + 1):
        ev = evaluate_series(f_values[s - 1], v, l, q, s, pool_radius, min_denominator)
        f_values.append(ev.total)
        evaluations.append(ev)
    return KnownPartExpansion(
        center=v.copy(), degree=l, base=base,
        f_values=tuple(f_values), evaluations=tuple(evaluations),
    )


@dataclass(frozen=True)
class MatchResult:
    index: int
    residual: float
    weight: float


def match_eigenvalue(spectrum: BlochSpectrum, gamma, prediction_rel: float,
                     halfwidth: float) -> MatchResult:
    """Eigenpair maximizing |b(N, gamma)|^2 within the matching window.

    prediction_rel is the prediction minus the spectrum shift (|v|^{2l} for
    windowed solves); residual is the matched eigenvalue minus prediction
    in the same frame.
    """
    pos = spectrum.position(gamma)
    if pos is None:
        raise NoCandidate(f"gamma {gamma} not inside the oracle window")
    rel = spectrum.eigenvalues_rel if spectrum.eigenvalues_rel is not None else spectrum.eigenvalues - spectrum.shift
    inside = np.nonzero(np.abs(rel - prediction_rel) < halfwidth)[0]
    if len(inside) == 0:
        raise NoCandidate(
            f"no eigenvalue within {halfwidth!r} of prediction (rel) {prediction_rel!r}")
    weights = np.abs(spectrum.coefficients[inside, pos]) ** 2
    best = inside[int(np.argmax(weights))]
    return MatchResult(
        index=int(best),
        residual=float(rel[best] - prediction_rel),
        weight=float(np.max(weights)),
    )


@dataclass(frozen=True)
class SweepRow:
    rho: float
    k: int
    prediction: float
    eigenvalue: float
    error: float
    weight: float


@dataclass(frozen=True)
class SweepTable:
    rows: tuple[SweepRow, ...]
    slopes: dict

    def errors_for(self, k: int) -> list[tuple[float, float]]:
        return [(r.rho, r.error) for r in self.rows if r.k == k]

    def write_csv(self, fh):
        writer = csv.writer(fh)
        writer.writerow(["rho", "k", "prediction", "eigenvalue", "error", "weight", "slope_k"])
        for r in self.rows:
            slope = self.slopes.get(r.k)
            writer.writerow([repr(r.rho), r.k, repr(r.prediction), repr(r.eigenvalue),
                             repr(r.error), repr(r.weight), "" if slope is None else repr(slope)])


def required_window_radius(q: FourierPotential, cascade: ParameterCascade) -> float:
    """Window large enough for series validation: support * (p1 + 2) hops."""
    return q.support_radius * (cascade.p1 + 2)


def order_sweep(lattice: LatticeModel, l: int, q: FourierPotential, centers, k_list,
                cascade: ParameterCascade, window_radius: float | None = None,
                refine: bool = True, min_denominator: float | None = None) -> SweepTable:
    """Error table |Lambda_N - P_k| over a family of centers with |v| = rho_j.

    Centers must be non-resonant with margins bounded away from zero
    uniformly (fixed irrational-slope directions achieve this).
    """
    k_list = sorted(set(int(k) for k in k_list))
    if min(k_list) < 1:
        raise ValueError("orders must be >= 1")
    k_max = max(k_list)
    min_window = required_window_radius(q, cascade)
    window = min_window if window_radius is None else max(window_radius, min_window)
    rows = []
    for v in centers:
        v = np.asarray(v, dtype=float)
        rho_j = float(np.linalg.norm(v))
        expansion = known_part_sequence(v, l, q, cascade, k_max=k_max,
                                        min_denominator=min_denominator)
        gamma0, _ = lattice.reduce(v)
        spectrum = bloch_solve(lattice, l, q, v, window, refine=refine)
        for k in k_list:
            pred_rel = expansion.prediction_rel(k)
            match = match_eigenvalue(spectrum, gamma0.coords, pred_rel, cascade.matching_halfwidth())
            rows.append(SweepRow(
                rho=rho_j, k=k,
                prediction=expansion.prediction(k),
                eigenvalue=float(spectrum.eigenvalues[match.index]),
                error=abs(match.residual),
                weight=match.weight,
            ))
    slopes = {}
    for k in k_list:
        pts = [(r.rho, r.error) for r in rows if r.k == k]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        slopes[k] = None if (len(pts) < 2 or any(y == 0 for y in ys)) else loglog_slope(xs, ys)
    return SweepTable(rows=tuple(rows), slopes=slopes)


def known_part_derivative(v, l: int, q: FourierPotential, cascade: ParameterCascade | None,
                          order: int, axis: int, h: float,
                          pool_radius: float | None = None) -> float:
    """Central finite difference of F_order along a coordinate axis."""
    v = np.asarray(v, dtype=float)
    step = np.zeros_like(v)
    step[axis] = h
    plus = known_part_sequence(v + step, l, q, cascade, k_max=order, pool_radius=pool_radius)
    minus = known_part_sequence(v - step, l, q, cascade, k_max=order, pool_radius=pool_radius)
    return (plus.f_values[order] - minus.f_values[order]) / (2.0 * h)
