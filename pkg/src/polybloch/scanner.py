"""Band functions over quasimomentum grids, gap detection, and Monte-Carlo
measure estimates for the resonance partition.

Bands are evaluated on a half-open uniform grid over the dual fundamental
cell with one shared full-ball basis whose radius is certified by a
refinement check; gaps are the complement of the band-range union and are
only reported when stable under grid doubling.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientBands, WindowNotConverged
from .geometry import ParameterCascade, classify, direction_pool
from .lattice import LatticeModel
from .oracle import PlanewaveBasis, assemble
from .potential import FourierPotential

_CERTIFY_TOL = 1e-9


@dataclass(frozen=True)
class BandTable:
    grid_counts: tuple[int, ...]
    n_bands: int
    t_points: np.ndarray  # (n_points, d)
    values: np.ndarray  # (n_points, n_bands), ascending along axis 1
    basis_radius: float
    axis_steps: tuple[float, ...]  # |dual_basis[axis]| / grid_counts[axis]

    def __post_init__(self):
        self.t_points.setflags(write=False)
        self.values.setflags(write=False)

    @property
    def band_min(self) -> np.ndarray:
        return self.values.min(axis=0)

    @property
    def band_max(self) -> np.ndarray:
        return self.values.max(axis=0)

    def write_csv(self, fh):
        writer = csv.writer(fh)
        d = self.t_points.shape[1]
        writer.writerow([f"t{i}" for i in range(d)] + ["n", "lambda"])
        for i in range(len(self.t_points)):
            for n in range(self.n_bands):
                writer.writerow([repr(float(x)) for x in self.t_points[i]] + [n + 1, repr(float(self.values[i, n]))])


def _grid_points(lattice: LatticeModel, grid_counts) -> np.ndarray:
    axes = [np.arange(n) / n for n in grid_counts]
    coeffs = np.array(list(itertools.product(*axes)))
    return coeffs @ lattice.dual_basis


def certified_basis_radius(lattice: LatticeModel, l: int, q: FourierPotential, n_bands: int,
                           probe_t=None, max_tries: int = 6) -> float:
    """Smallest tried full-ball radius whose first n_bands eigenvalues are
    stable (1e-9 relative) under a 1.5x radius refinement at a probe t."""
    if probe_t is None:
        coeff = np.full(lattice.dimension, 0.37)
        coeff[-1] = 0.23
        probe_t = coeff @ lattice.dual_basis
    # start from the free-counting estimate plus coupling reach
    radius = 1.0
    while len(lattice.enumerate_ball(radius, exclude_zero=False)) < 2 * n_bands:
        radius += 0.5
    radius += 2.0 * max(q.support_radius, 1.0)
    for _ in range(max_tries):
        small = _solve_bands_at(lattice, l, q, probe_t, radius, n_bands)
        big = _solve_bands_at(lattice, l, q, probe_t, 1.5 * radius, n_bands)
        move = np.max(np.abs(small - big) / (1.0 + np.abs(big)))
        if move < _CERTIFY_TOL:
            return radius
        radius *= 1.25
    raise WindowNotConverged(f"basis radius not certified after {max_tries} refinements (last move {move:.3e})")


def _solve_bands_at(lattice, l, q, t, radius, n_bands) -> np.ndarray:
    basis = PlanewaveBasis.full_ball(lattice, radius)
    if len(basis) < n_bands:
        raise InsufficientBands(f"basis of {len(basis)} plane waves cannot carry {n_bands} bands")
    H = assemble(l, q, t, basis)
    return np.linalg.eigvalsh(H)[:n_bands]


def band_functions(lattice: LatticeModel, l: int, q: FourierPotential, grid_counts,
                   n_bands: int, basis_radius: float | None = None, workers: int = 1,
                   inversion_symmetry: bool = False) -> BandTable:
    """Per-band extrema over a half-open uniform grid on the dual cell.

    The basis is shared across grid points (only the diagonal depends on
    t), and its radius is certified by refinement unless given explicitly.
    inversion_symmetry solves only one of each {t, -t mod 1} pair and
    copies the values (valid for real potentials, where the spectrum is
    even in t); off by default, which is correct for arbitrary tables.
    """
    grid_counts = tuple(int(n) for n in grid_counts)
    if min(grid_counts) < 8:
        raise ValueError("need at least 8 grid points per axis")
    if basis_radius is None:
        basis_radius = certified_basis_radius(lattice, l, q, n_bands)
    basis = PlanewaveBasis.full_ball(lattice, basis_radius)
    if len(basis) < n_bands:
        raise InsufficientBands(f"basis of {len(basis)} plane waves cannot carry {n_bands} bands")
    t_points = _grid_points(lattice, grid_counts)
    embeddings = np.array([vec.embedding for vec in basis.vectors])
    coupling = assemble(l, q, np.zeros(lattice.dimension), basis)
    np.fill_diagonal(coupling, 0.0)

    indices = list(itertools.product(*(range(n) for n in grid_counts)))
    if inversion_symmetry:
        solve_for = {}
        source = []
        for pos, idx in enumerate(indices):
            mirror = tuple((-i) % n for i, n in zip(idx, grid_counts))
            rep = min(idx, mirror)
            if rep not in solve_for:
                solve_for[rep] = pos if rep == idx else None
            source.append(rep)
        unique = sorted(solve_for)
        todo = [indices.index(rep) for rep in unique]
    else:
        unique = indices
        todo = list(range(len(indices)))

    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            solved = list(pool.map(_solve_point_worker,
                                   ((coupling, embeddings, t_points[i], l, n_bands) for i in todo),
                                   chunksize=max(1, len(todo) // (8 * workers))))
    else:
        solved = [_solve_point_worker((coupling, embeddings, t_points[i], l, n_bands)) for i in todo]
    if inversion_symmetry:
        by_rep = dict(zip(unique, solved))
        rows = [by_rep[source[pos]] for pos in range(len(indices))]
    else:
        rows = solved
    values = np.array(rows)
    steps = tuple(float(np.linalg.norm(lattice.dual_basis[i])) / grid_counts[i]
                  for i in range(lattice.dimension))
    return BandTable(grid_counts=grid_counts, n_bands=n_bands,
                     t_points=t_points, values=values, basis_radius=float(basis_radius),
                     axis_steps=steps)


def _solve_point_worker(args):
    coupling, embeddings, t, l, n_bands = args
    shifted = embeddings + t
    diag = np.sum(shifted**2, axis=1) ** l
    H = coupling + np.diag(diag)
    return np.linalg.eigvalsh(H)[:n_bands]


@dataclass(frozen=True)
class GapReport:
    gaps: tuple[tuple[float, float], ...]
    e_min: float
    e_max: float
    stable: bool | None  # None when only one refinement level was scanned

    @property
    def gap_count(self) -> int:
        return len(self.gaps)


def gap_report(table: BandTable, e_min: float, e_max: float,
               enforce_coverage: bool = True) -> GapReport:
    """Open intervals inside [e_min, e_max] missed by every band range.

    With enforce_coverage the top band's minimum must exceed e_max, so no
    gap can hide above the scanned bands.
    """
    mins = table.band_min
    maxs = table.band_max
    if enforce_coverage and mins[-1] <= e_max:
        raise InsufficientBands(
            f"top band min {mins[-1]!r} does not exceed e_max {e_max!r}; add bands")
    intervals = sorted(zip(mins, maxs))
    gaps = []
    cover = e_min
    for lo, hi in intervals:
        if hi <= cover:
            continue
        if lo > cover and cover < e_max:
            gap_hi = min(lo, e_max)
            if gap_hi > cover:
                gaps.append((float(cover), float(gap_hi)))
        cover = max(cover, hi)
        if cover >= e_max:
            break
    if cover < e_max:
        gaps.append((float(cover), float(e_max)))
    return GapReport(gaps=tuple(gaps), e_min=float(e_min), e_max=float(e_max), stable=None)


def stable_gap_report(lattice: LatticeModel, l: int, q: FourierPotential, grid_counts,
                      n_bands: int, e_min: float, e_max: float,
                      basis_radius: float | None = None, workers: int = 1,
                      rel_tol: float = 1e-3) -> tuple[GapReport, BandTable, BandTable]:
    """Gap scan at the given grid and at the doubled grid.

    The report carries the fine-grid gaps; stable is true when both levels
    agree on the gap count and on endpoints to rel_tol relative.
    """
    coarse = band_functions(lattice, l, q, grid_counts, n_bands, basis_radius, workers)
    fine = band_functions(lattice, l, q, tuple(2 * n for n in grid_counts), n_bands,
                          coarse.basis_radius, workers)
    g_coarse = gap_report(coarse, e_min, e_max)
    g_fine = gap_report(fine, e_min, e_max)
    stable = g_coarse.gap_count == g_fine.gap_count
    if stable:
        for (a1, b1), (a2, b2) in zip(g_coarse.gaps, g_fine.gaps):
            scale = max(abs(a2), abs(b2), 1e-300)
            if abs(a1 - a2) > rel_tol * scale or abs(b1 - b2) > rel_tol * scale:
                stable = False
                break
    return GapReport(gaps=g_fine.gaps, e_min=g_fine.e_min, e_max=g_fine.e_max, stable=stable), coarse, fine


def continuity_report(table: BandTable, l: int) -> float:
    """Largest per-band jump between grid neighbors, normalized by the
    free-gradient scale 2 l rho^{2l-1} times the grid step.

    Large values flag eigenvalue-sorting artifacts at band crossings.
    """
    counts = table.grid_counts
    d = len(counts)
    shape = counts + (table.n_bands,)
    grid = table.values.reshape(shape)
    rho_scale = np.sqrt(max(table.values.max(), 1.0))
    worst = 0.0
    for axis in range(d):
        jumps = np.abs(np.diff(grid, axis=axis))
        scale = table.axis_steps[axis] * 2 * l * rho_scale ** (2 * l - 1)
        worst = max(worst, float(jumps.max() / scale))
    return worst


@dataclass(frozen=True)
class MeasureEstimate:
    rho: float
    n_samples: int
    seed: int
    counts: dict
    fractions: dict
    stderr: dict

    def resonant_fraction(self) -> float:
        return 1.0 - self.fractions["U"]


def measure_fraction(lattice: LatticeModel, rho: float, cascade: ParameterCascade,
                     n_samples: int, seed: int) -> MeasureEstimate:
    """Classify uniform samples on the sphere |x| = rho into partition cells.

    Fractions sum to one exactly (every sample receives one cell);
    standard errors are binomial.
    """
    if n_samples < 1000:
        raise ValueError("need at least 1e3 samples")
    rng = np.random.default_rng(seed)
    pool = direction_pool(lattice, cascade)
    d = lattice.dimension
    labels = ["U"] + [f"E{k}" for k in range(1, d)]
    counts = {lab: 0 for lab in labels}
    for _ in range(n_samples):
        x = rng.standard_normal(d)
        x *= rho / np.linalg.norm(x)
        verdict = classify(lattice, x, cascade, pool=pool)
        lab = "U" if verdict.level == 0 else f"E{verdict.level}"
        counts[lab] += 1
    fractions = {lab: counts[lab] / n_samples for lab in labels}
    stderr = {lab: float(np.sqrt(f * (1 - f) / n_samples)) for lab, f in fractions.items()}
    return MeasureEstimate(rho=float(rho), n_samples=n_samples, seed=seed,
                           counts=counts, fractions=fractions, stderr=stderr)
