"""The potential q(x) as a finite table of Fourier pairs (gamma, q_gamma).

Only trigonometric polynomials are representable; a Sobolev class is
modeled by finite support plus a declared smoothness, which makes the
short-wave truncation exact beyond the support radius.  Real-valuedness
(Hermitian symmetry of the table) is required so the plane-wave matrix is
Hermitian and all Bloch eigenvalues real; non-Hermitian tables are
rejected by the loader.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeModel, LatticeVector

_HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    violations: tuple[str, ...]


class FourierPotential:
    """Immutable map from integer dual coordinates to complex coefficients."""

    def __init__(self, lattice: LatticeModel, coefficients, smoothness: float = 0.0):
        self.lattice = lattice
        self.smoothness = float(smoothness)
        table = {}
        for coords, value in dict(coefficients).items():
            coords = tuple(int(c) for c in coords)
            value = complex(value)
            if value != 0:
                table[coords] = value
        self._table = table
        self._support = tuple(sorted(table, key=lambda c: (lattice.vector(c).norm_sq, c)))

    # -- basic access -------------------------------------------------

    def coefficient(self, coords) -> complex:
        return self._table.get(tuple(int(c) for c in coords), 0j)

    @property
    def support(self) -> tuple[tuple[int, ...], ...]:
        return self._support

    def support_vectors(self) -> list[LatticeVector]:
        return [self.lattice.vector(c) for c in self._support]

    @property
    def support_radius(self) -> float:
        if not self._support:
            return 0.0
        return max(self.lattice.vector(c).norm for c in self._support)

    def is_zero(self) -> bool:
        return not self._table

    def one_norm(self) -> float:
        """Sum of |q_gamma|; the operator-norm bound on the perturbation."""
        return float(sum(abs(v) for v in self._table.values()))

    def sobolev_weight(self) -> float:
        """Sum of |q_gamma|^2 (1 + |gamma|^{2s})."""
        s = self.smoothness
        total = 0.0
        for coords, value in self._table.items():
            nrm = self.lattice.vector(coords).norm
            total += abs(value) ** 2 * (1.0 + nrm ** (2 * s))
        return float(total)

    def scaled(self, factor: float) -> "FourierPotential":
        return FourierPotential(
            self.lattice,
            {c: v * factor for c, v in self._table.items()},
            self.smoothness,
        )

    # -- invariants ---------------------------------------------------

    def validate(self) -> ValidationReport:
        """Zero mean, Hermitian symmetry, finite Sobolev weight."""
        violations = []
        zero = (0,) * self.lattice.dimension
        if zero in self._table:
            violations.append(f"zero-mean violated: q_0 = {self._table[zero]}")
        scale = max((abs(v) for v in self._table.values()), default=1.0)
        for coords, value in self._table.items():
            neg = tuple(-c for c in coords)
            mirror = self._table.get(neg, 0j)
            if abs(mirror - value.conjugate()) > _HERMITIAN_TOL * scale:
                violations.append(f"Hermitian symmetry violated at {coords}: q_-g = {mirror}, conj(q_g) = {value.conjugate()}")
        weight = self.sobolev_weight()
        if not np.isfinite(weight):
            violations.append("Sobolev weight not finite")
        return ValidationReport(passed=not violations, violations=tuple(violations))

    # -- truncation ---------------------------------------------------

    def truncate(self, radius: float) -> tuple["FourierPotential", float]:
        """Keep |gamma| < radius; tail bound is the summed |q_gamma| dropped.

        The short-wave radius is typically c1 * rho^alpha, computed by the
        caller from the parameter cascade.
        """
        if radius <= 0:
            raise ValueError("radius must be > 0")
        kept, tail = {}, 0.0
        for coords, value in self._table.items():
            if self.lattice.vector(coords).norm < radius:
                kept[coords] = value
            else:
                tail += abs(value)
        return FourierPotential(self.lattice, kept, self.smoothness), float(tail)

    # -- serialization ------------------------------------------------

    def to_records(self) -> list[dict]:
        return [
            {"n": list(coords), "re": float(value.real), "im": float(value.imag)}
            for coords, value in sorted(self._table.items())
        ]

    @classmethod
    def from_records(cls, lattice: LatticeModel, records, smoothness: float = 0.0) -> "FourierPotential":
        table = {}
        for rec in records:
            coords = tuple(int(c) for c in rec["n"])
            table[coords] = complex(float(rec.get("re", 0.0)), float(rec.get("im", 0.0)))
        pot = cls(lattice, table, smoothness)
        report = pot.validate()
        if not report.passed:
            raise ValueError("invalid potential table: " + "; ".join(report.violations))
        return pot

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_records(), fh, indent=1, sort_keys=True)
            fh.write("\n")


def load_potential(path, lattice: LatticeModel, smoothness: float = 0.0) -> FourierPotential:
    with open(path) as fh:
        records = json.load(fh)
    return FourierPotential.from_records(lattice, records, smoothness)


def cosine_pair(lattice: LatticeModel, coords, amplitude: float = 1.0, smoothness: float = 0.0) -> FourierPotential:
    """amplitude * 2 cos((gamma, x)) as the pair q_{+gamma} = q_{-gamma} = amplitude."""
    coords = tuple(int(c) for c in coords)
    neg = tuple(-c for c in coords)
    return FourierPotential(lattice, {coords: amplitude, neg: amplitude}, smoothness)


def cosine_sum(lattice: LatticeModel, coords_list, amplitude: float = 1.0, smoothness: float = 0.0) -> FourierPotential:
    table = {}
    for coords in coords_list:
        coords = tuple(int(c) for c in coords)
        table[coords] = table.get(coords, 0j) + amplitude
        neg = tuple(-c for c in coords)
        table[neg] = table.get(neg, 0j) + amplitude
    return FourierPotential(lattice, table, smoothness)


def random_potential(seed: int, d: int, support_radius: float, s: float, norm_budget: float,
                     lattice: LatticeModel | None = None) -> FourierPotential:
    """Deterministic random real potential with Sobolev weight <= norm_budget."""
    if support_radius < 1:
        raise ValueError("support_radius must be >= 1")
    if lattice is None:
        lattice = LatticeModel.cubic(d)
    rng = np.random.default_rng(seed)
    candidates = lattice.enumerate_ball(support_radius * (1 + 1e-12), exclude_zero=True)
    table = {}
    seen = set()
    for vec in candidates:
        if vec.coords in seen:
            continue
        neg = tuple(-c for c in vec.coords)
        seen.add(vec.coords)
        seen.add(neg)
        value = complex(rng.standard_normal(), rng.standard_normal())
        table[vec.coords] = value
        table[neg] = value.conjugate()
    pot = FourierPotential(lattice, table, s)
    if norm_budget <= 0:
        return FourierPotential(lattice, {}, s)
    weight = pot.sobolev_weight()
    if weight == 0:
        return pot
    factor = np.sqrt(norm_budget / weight) * (1.0 - 1e-12)
    return pot.scaled(factor)
