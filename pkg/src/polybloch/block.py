"""Resonant-case machinery: translated index sets, the coupling block matrix,
and matching of its eigenvalues against the oracle.

Near k independent diffraction planes the eigenvalue is tracked not by a
scalar series but by a finite Hermitian block: indices are the distinct
points gamma0 + b + a (b an integer combination of the resonance
directions inside a span ball, a a short lattice translate), the diagonal
holds |h_i + t|^{2l} and the off-diagonal the potential couplings
q_{h_i - h_j}.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDirections
from .geometry import ParameterCascade
from .lattice import LatticeModel, LatticeVector
from .numerics import integer_rank, power_difference
from .oracle import BlochSpectrum
from .potential import FourierPotential


@dataclass(frozen=True)
class ResonantIndexSet:
    """Distinct points h_i + t forming the block index set around v = gamma0 + t."""

    center: np.ndarray
    t: np.ndarray
    gamma0: LatticeVector
    directions: tuple[LatticeVector, ...]
    vectors: tuple[LatticeVector, ...]  # the h_i, including gamma0 itself
    b_radius: float
    a_radius: float

    def __post_init__(self):
        self.center.setflags(write=False)
        self.t.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.vectors)

    def points(self) -> np.ndarray:
        """The h_i + t as rows."""
        return np.array([h.embedding + self.t for h in self.vectors])


def _span_combinations(directions: list[LatticeVector], radius: float):
    """Integer combinations b = sum n_i gamma_i with |b| < radius (strict)."""
    mat = np.array([g.embedding for g in directions])
    sigma_min = np.linalg.svd(mat, compute_uv=False).min()
    bound = int(np.floor(radius / sigma_min + 1e-9))
    out = []
    for n in itertools.product(range(-bound, bound + 1), repeat=len(directions)):
        coords = tuple(int(sum(n[i] * directions[i].coords[j] for i in range(len(n))))
                       for j in range(mat.shape[1]))
        emb = np.asarray(n, dtype=float) @ mat
        if float(np.linalg.norm(emb)) < radius:
            out.append(coords)
    return out


def build_index_set(lattice: LatticeModel, v, directions, cascade: ParameterCascade | None = None,
                    b_radius: float | None = None, a_radius: float | None = None,
                    t=None) -> ResonantIndexSet:
    """Enumerate {gamma0 + b + a}, deterministic order by (|offset|^2, coords)."""
    directions = list(directions)
    if not directions:
        raise EmptyDirections("need at least one resonance direction")
    if integer_rank([g.coords for g in directions]) != len(directions):
        raise ValueError("directions must be linearly independent")
    if len(directions) > lattice.dimension - 1:
        raise ValueError("at most d - 1 directions")
    v = np.asarray(v, dtype=float)
    if t is None:
        gamma0, qm = lattice.reduce(v)
        t = qm.reduced
    else:
        t = np.asarray(t, dtype=float)
        coeff = lattice.basis @ (v - t) / (2 * np.pi)
        n_int = np.round(coeff)
        if not np.allclose(coeff, n_int, atol=1e-9):
            raise ValueError("v - t must be a dual lattice vector")
        gamma0 = lattice.vector(n_int.astype(int))
    k = len(directions)
    if b_radius is None:
        if cascade is None:
            raise ValueError("need b_radius or a cascade")
        b_radius = cascade.block_b_radius(k)
    if a_radius is None:
        if cascade is None:
            raise ValueError("need a_radius or a cascade")
        a_radius = cascade.block_a_radius()
    b_list = _span_combinations(directions, b_radius)
    a_list = [vec.coords for vec in lattice.enumerate_ball(a_radius, exclude_zero=False)]
    offsets = {tuple(bb + aa for bb, aa in zip(b, a)) for b in b_list for a in a_list}
    keyed = []
    for off in offsets:
        emb = lattice.embed(off)
        h = tuple(g + o for g, o in zip(gamma0.coords, off))
        keyed.append((float(emb @ emb), h))
    keyed.sort()
    vectors = tuple(lattice.vector(h) for _, h in keyed)
    return ResonantIndexSet(
        center=v.copy(), t=t.copy(), gamma0=gamma0,
        directions=tuple(directions), vectors=vectors,
        b_radius=float(b_radius), a_radius=float(a_radius),
    )


@dataclass(frozen=True)
class ResonantBlock:
    """Hermitian coupling block and its ascending eigenvalues."""

    index_set: ResonantIndexSet
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvalues_rel: np.ndarray
    shift: float

    def __post_init__(self):
        for arr in (self.matrix, self.eigenvalues, self.eigenvalues_rel):
            arr.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.eigenvalues)


def assemble_block(index_set: ResonantIndexSet, l: int, q: FourierPotential) -> ResonantBlock:
    """Entries c_ii = |h_i + t|^{2l}, c_ij = q_{h_i - h_j} (zero off support)."""
    n = index_set.size
    t = index_set.t
    v = index_set.center
    v_sq = float(v @ v)
    shift = v_sq**l
    H = np.zeros((n, n), dtype=complex)
    diag_rel = np.zeros(n)
    for i, h in enumerate(index_set.vectors):
        delta = h.embedding + t - v
        first = 2.0 * float(v @ delta) + float(delta @ delta)
        diag_rel[i] = power_difference(first, v_sq + first, v_sq, l)
        H[i, i] = shift + diag_rel[i]
    for i, hi in enumerate(index_set.vectors):
        for j in range(i + 1, n):
            hj = index_set.vectors[j]
            val = q.coefficient(tuple(a - b for a, b in zip(hi.coords, hj.coords)))
            if val != 0:
                H[i, j] = val
                H[j, i] = val.conjugate()
    H_rel = H.copy()
    H_rel[np.diag_indices(n)] = diag_rel
    evals_rel = np.linalg.eigvalsh(H_rel)
    return ResonantBlock(
        index_set=index_set, matrix=H,
        eigenvalues=evals_rel + shift, eigenvalues_rel=evals_rel, shift=shift,
    )


@dataclass(frozen=True)
class BlockMatch:
    oracle_index: int
    block_index: int
    deviation: float
    summed_weight: float


def dominant_block_index(spectrum: BlochSpectrum, index_set: ResonantIndexSet) -> tuple[int, float]:
    """Oracle eigenpair with maximal summed weight over the index set.

    Near-ties (degenerate or decoupled cases) are broken by the weight on
    the center's own index.
    """
    positions = [spectrum.position(h.coords) for h in index_set.vectors]
    cols = [p for p in positions if p is not None]
    if not cols:
        raise ValueError("index set disjoint from the oracle basis")
    weights = np.sum(np.abs(spectrum.coefficients[:, cols]) ** 2, axis=1)
    top = float(np.max(weights))
    candidates = np.nonzero(weights >= top - 1e-9)[0]
    center_pos = spectrum.position(index_set.gamma0.coords)
    if center_pos is not None and len(candidates) > 1:
        center_w = np.abs(spectrum.coefficients[candidates, center_pos]) ** 2
        best = int(candidates[int(np.argmax(center_w))])
    else:
        best = int(candidates[0])
    return best, float(weights[best])


def match_resonant(spectrum: BlochSpectrum, block: ResonantBlock, n: int | None = None) -> BlockMatch:
    """Closest block eigenvalue to the dominant-weight oracle eigenvalue."""
    if n is None:
        n, weight = dominant_block_index(spectrum, block.index_set)
    else:
        positions = [spectrum.position(h.coords) for h in block.index_set.vectors]
        cols = [p for p in positions if p is not None]
        weight = float(np.sum(np.abs(spectrum.coefficients[n, cols]) ** 2))
    if spectrum.eigenvalues_rel is not None and spectrum.shift == block.shift:
        lam = spectrum.eigenvalues_rel[n]
        devs = np.abs(block.eigenvalues_rel - lam)
    else:
        devs = np.abs(block.eigenvalues - spectrum.eigenvalues[n])
    j = int(np.argmin(devs))
    return BlockMatch(oracle_index=int(n), block_index=j, deviation=float(devs[j]), summed_weight=weight)


def gershgorin_bounds(block: ResonantBlock) -> tuple[float, float]:
    """Enclosing interval from the row-sum discs; cheap assembly sanity."""
    H = block.matrix
    diag = np.real(np.diag(H))
    radii = np.sum(np.abs(H), axis=1) - np.abs(diag)
    return float(np.min(diag - radii)), float(np.max(diag + radii))


def tail_coupling_bound(index_set: ResonantIndexSet, q: FourierPotential) -> float:
    """Operator-norm bound on couplings leaving the index set.

    For each member h, sums |q_g| over support directions g with h - g
    outside the set; the maximum over members bounds the deviation between
    block and oracle eigenvalues.
    """
    members = {h.coords for h in index_set.vectors}
    worst = 0.0
    for h in index_set.vectors:
        leak = 0.0
        for g in q.support:
            target = tuple(a - b for a, b in zip(h.coords, g))
            if target not in members:
                leak += abs(q.coefficient(g))
        worst = max(worst, leak)
    return worst


def separation_probe(lattice: LatticeModel, index_set: ResonantIndexSet,
                     cascade: ParameterCascade, l: int, q: FourierPotential,
                     n_samples: int = 50, seed: int = 0) -> list[dict]:
    """Spot check of the outside-the-set separation bound.

    Samples (h, short chains) leaving the index set and reports
    | |v|^{2l} - |h - g' - ... + t|^{2l} | against rho^{alpha_{k+1}} / 5.
    Violations are diagnostics, not failures (the bound is asymptotic).
    """
    rng = np.random.default_rng(seed)
    k = len(index_set.directions)
    bound = cascade.v_threshold(k + 1) / 5.0
    members = {h.coords for h in index_set.vectors}
    pool = [lattice.vector(c) for c in q.support]
    if not pool:
        return []
    v = index_set.center
    v_sq = float(v @ v)
    out = []
    for _ in range(n_samples):
        h = index_set.vectors[rng.integers(len(index_set.vectors))]
        chain_len = int(rng.integers(1, 3))
        coords = h.coords
        for _ in range(chain_len):
            g = pool[rng.integers(len(pool))]
            coords = tuple(a - b for a, b in zip(coords, g.coords))
        if coords in members:
            continue
        x = lattice.embed(coords) + index_set.t
        delta = x - v
        first = 2.0 * float(v @ delta) + float(delta @ delta)
        lhs = abs(power_difference(first, v_sq + first, v_sq, l))
        out.append({"coords": coords, "lhs": lhs, "bound": bound, "ok": bool(lhs > bound)})
    return out
