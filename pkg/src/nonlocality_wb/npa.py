"""Moment-matrix relaxations bounding constrained Bell optimization.

The operator alphabet is minimal: one outcome-0 projector per setting and
party (``E_x`` for Alice, ``F_y`` for Bob).  Words over the alphabet are
canonicalized by letting the parties commute (all E's before all F's) and by
projector idempotence (adjacent equal letters collapse).  The level-``l``
basis holds every canonical word of length at most ``l``; the moment matrix
cell ``(u, v)`` carries the moment of ``reverse(u) * v``, and cells whose
canonical words coincide share one variable.  Moment matrices are real
symmetric, so a word and its reversal are also identified.

Probabilities enter through complementarity: ``P(00|xy) = <E_x F_y>``,
``P(01|xy) = <E_x> - <E_x F_y>``, ``P(10|xy) = <F_y> - <E_x F_y>``,
``P(11|xy) = 1 - <E_x> - <F_y> + <E_x F_y>``.  A Hardy paradox becomes:
maximize the Hardy-term moment subject to the moment matrix being positive
semidefinite, the identity moment pinned to 1, and each condition expression
(in moment form) pinned to its target.

Solving dualizes nothing exotic: equalities are eliminated by substitution,
and when the program data is invariant under swapping the parties the
variables are folded onto swap orbits and the matrix splits into symmetric /
antisymmetric blocks, roughly halving the variable count (an 8x cheaper
Schur factorization).  The reduction is validated against the program data
and skipped when the invariance does not hold exactly.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
import scipy.sparse

from .hardy import HardyParadox
from .qubit import QubitModel, observable, state_vector
from .scenario import (
    SCHEMA_VERSION,
    BellExpression,
    ValidationError,
)
from .sdp import (
    LmiBlockData,
    LmiProblem,
    STATUS_INFEASIBLE,
    STATUS_MAX_ITERATIONS,
    STATUS_OPTIMAL,
    solve_lmi,
)

MAX_LEVEL = 3


@dataclass(frozen=True, order=True)
class Monomial:
    """Canonical word: Alice settings then Bob settings, no adjacent repeats."""

    alice: tuple[int, ...] = ()
    bob: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for word in (self.alice, self.bob):
            if any(s < 1 for s in word):
                raise ValidationError("settings in a monomial are 1-based")
            if any(a == b for a, b in zip(word, word[1:])):
                raise ValidationError(f"word {word} has an adjacent repeated setting")

    @property
    def degree(self) -> int:
        return len(self.alice) + len(self.bob)

    def adjoint(self) -> "Monomial":
        return Monomial(self.alice[::-1], self.bob[::-1])

    def swap_parties(self) -> "Monomial":
        return Monomial(self.bob, self.alice)

    def label(self) -> str:
        if self.degree == 0:
            return "1"
        parts = [f"E{s}" for s in self.alice] + [f"F{s}" for s in self.bob]
        return "*".join(parts)

    @staticmethod
    def from_label(label: str) -> "Monomial":
        if label == "1":
            return Monomial()
        alice, bob = [], []
        for token in label.split("*"):
            if token[0] == "E":
                alice.append(int(token[1:]))
            elif token[0] == "F":
                bob.append(int(token[1:]))
            else:
                raise ValidationError(f"cannot parse monomial token {token!r}")
        return Monomial(tuple(alice), tuple(bob))


def _collapse(word: tuple[int, ...]) -> tuple[int, ...]:
    out: list[int] = []
    for s in word:
        if not out or out[-1] != s:
            out.append(s)
    return tuple(out)


def product(u: Monomial, v: Monomial) -> Monomial:
    """Canonical product: parties commute, adjacent repeats collapse."""
    return Monomial(_collapse(u.alice + v.alice), _collapse(u.bob + v.bob))


def cell_word(u: Monomial, v: Monomial) -> Monomial:
    """Canonical word of ``reverse(u) * v`` (the (u, v) moment-matrix cell)."""
    return product(u.adjoint(), v)


def moment_key(w: Monomial) -> Monomial:
    """Class representative; a word and its reversal share one real moment."""
    return min(w, w.adjoint())


def _party_words(n: int, length: int) -> list[tuple[int, ...]]:
    """All no-adjacent-repeat words of one party, lexicographic."""
    if length == 0:
        return [()]
    words = [(s,) for s in range(1, n + 1)]
    for _ in range(length - 1):
        words = [w + (s,) for w in words for s in range(1, n + 1) if w[-1] != s]
    return words


def basis_monomials(n: int, level: int) -> tuple[Monomial, ...]:
    """Every canonical word of degree <= level; E-heavy words first per degree."""
    out = [Monomial()]
    for degree in range(1, level + 1):
        for alice_len in range(degree, -1, -1):
            bob_len = degree - alice_len
            for aw in _party_words(n, alice_len):
                for bw in _party_words(n, bob_len):
                    out.append(Monomial(aw, bw))
    return tuple(out)


@dataclass(frozen=True)
class SdpConfig:
    """Solver settings for moment programs."""

    max_iterations: int = 150
    gap_tol: float = 1e-7
    feas_tol: float = 1e-7
    use_symmetry: bool = True

    def __post_init__(self) -> None:
        if self.max_iterations < 1 or self.gap_tol <= 0 or self.feas_tol <= 0:
            raise ValidationError("SdpConfig tolerances must be positive")

    def to_json_dict(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "gap_tol": self.gap_tol,
            "feas_tol": self.feas_tol,
            "use_symmetry": self.use_symmetry,
        }

    @staticmethod
    def from_json_dict(data: Mapping) -> "SdpConfig":
        allowed = {"max_iterations", "gap_tol", "feas_tol", "use_symmetry"}
        unknown = set(data) - allowed
        if unknown:
            raise ValidationError(f"unknown sdp config keys: {sorted(unknown)}")
        defaults = SdpConfig()
        kwargs = {k: type(getattr(defaults, k))(v) for k, v in data.items()}
        return replace(defaults, **kwargs)


@dataclass(frozen=True)
class MomentProgram:
    """Moment-matrix program: basis, cell identification, objective, pins."""

    n_settings: int
    level: int
    basis: tuple[Monomial, ...]
    class_words: tuple[Monomial, ...]
    cell_class: np.ndarray  # (N, N) int array; entry = class index of the cell
    objective: np.ndarray  # linear functional over class moments
    objective_offset: float
    equalities: tuple[tuple[np.ndarray, float], ...]  # first row pins identity
    description: str = ""

    @property
    def size(self) -> int:
        return len(self.basis)

    @property
    def n_classes(self) -> int:
        return len(self.class_words)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "moment_program",
            "n_settings": self.n_settings,
            "level": self.level,
            "description": self.description,
            "basis": [m.label() for m in self.basis],
            "class_words": [m.label() for m in self.class_words],
            "cell_class": [int(v) for v in self.cell_class.ravel()],
            "objective": [float(v) for v in self.objective],
            "objective_offset": self.objective_offset,
            "equalities": [
                {"coefficients": [float(v) for v in vec], "target": rhs}
                for vec, rhs in self.equalities
            ],
        }


def _moment_terms(i: int, j: int, x: int, y: int) -> tuple[float, list[tuple[Monomial, float]]]:
    """Constant plus moment-word coefficients of ``P(ij|xy)``."""
    ex = Monomial((x,), ())
    fy = Monomial((), (y,))
    exfy = Monomial((x,), (y,))
    if i == 0 and j == 0:
        return 0.0, [(exfy, 1.0)]
    if i == 0 and j == 1:
        return 0.0, [(ex, 1.0), (exfy, -1.0)]
    if i == 1 and j == 0:
        return 0.0, [(fy, 1.0), (exfy, -1.0)]
    return 1.0, [(ex, -1.0), (fy, -1.0), (exfy, 1.0)]


def _expression_to_moments(
    expr: BellExpression, class_index: Mapping[Monomial, int], n_classes: int
) -> tuple[np.ndarray, float]:
    vec = np.zeros(n_classes)
    offset = 0.0
    for (i, j, x, y), coeff in expr.items():
        const, words = _moment_terms(i, j, x, y)
        offset += coeff * const
        for word, w in words:
            vec[class_index[moment_key(word)]] += coeff * w
    return vec, offset


def _moment_structure(n: int, level: int):
    basis = basis_monomials(n, level)
    size = len(basis)
    class_index: dict[Monomial, int] = {}
    class_words: list[Monomial] = []
    cell_class = np.empty((size, size), dtype=np.int64)
    for p, u in enumerate(basis):
        for q in range(p, size):
            key = moment_key(cell_word(u, basis[q]))
            k = class_index.get(key)
            if k is None:
                k = len(class_words)
                class_index[key] = k
                class_words.append(key)
            cell_class[p, q] = k
            cell_class[q, p] = k
    return basis, tuple(class_words), class_index, cell_class


def _check_level(level: int) -> None:
    if not isinstance(level, int) or not (1 <= level <= MAX_LEVEL):
        raise ValidationError(f"hierarchy level must be an integer in 1..{MAX_LEVEL}, got {level!r}")


def build_program(paradox: HardyParadox, level: int) -> MomentProgram:
    """Moment program maximizing the paradox's Hardy term under its conditions."""
    _check_level(level)
    n = paradox.scenario.n_settings
    basis, class_words, class_index, cell_class = _moment_structure(n, level)
    n_classes = len(class_words)

    hi, hj, hx, hy = paradox.hardy_term
    objective, offset = _expression_to_moments(
        BellExpression(paradox.scenario, {(hi, hj, hx, hy): 1.0}), class_index, n_classes
    )

    pin = np.zeros(n_classes)
    pin[class_index[Monomial()]] = 1.0
    equalities: list[tuple[np.ndarray, float]] = [(pin, 1.0)]
    for expr, target in paradox.conditions:
        vec, const = _expression_to_moments(expr, class_index, n_classes)
        equalities.append((vec, target - const))

    return MomentProgram(
        n_settings=n,
        level=level,
        basis=basis,
        class_words=class_words,
        cell_class=cell_class,
        objective=objective,
        objective_offset=offset,
        equalities=tuple(equalities),
        description=f"hardy:{paradox.paradox_id}",
    )


def build_expression_program(expr: BellExpression, level: int) -> MomentProgram:
    """Moment program maximizing a bare Bell expression (no condition pins)."""
    _check_level(level)
    n = expr.scenario.n_settings
    basis, class_words, class_index, cell_class = _moment_structure(n, level)
    objective, offset = _expression_to_moments(expr, class_index, len(class_words))
    pin = np.zeros(len(class_words))
    pin[class_index[Monomial()]] = 1.0
    return MomentProgram(
        n_settings=n,
        level=level,
        basis=basis,
        class_words=class_words,
        cell_class=cell_class,
        objective=objective,
        objective_offset=offset,
        equalities=((pin, 1.0),),
        description="expression-maximum",
    )


@dataclass(frozen=True)
class SdpSolution:
    """Solved moment program with certificates.

    ``moment_matrix`` is assembled from the class moments, so cells in one
    identification class are exactly equal by construction.  ``residuals``
    holds the violation of each declared equality, identity pin first.
    """

    objective_value: float
    moment_matrix: np.ndarray
    status: str
    min_eigenvalue: float
    residuals: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "sdp_solution",
            "objective_value": self.objective_value,
            "status": self.status,
            "min_eigenvalue": self.min_eigenvalue,
            "residuals": [float(r) for r in self.residuals],
            "moment_matrix": [float(v) for v in self.moment_matrix.ravel()],
            "diagnostics": dict(self.diagnostics),
        }


class _SwapSymmetry:
    """Validated party-swap action on classes and basis, if the program has it."""

    def __init__(self, class_perm: np.ndarray, basis_perm: np.ndarray):
        self.class_perm = class_perm
        self.basis_perm = basis_perm

    @staticmethod
    def detect(program: MomentProgram) -> "_SwapSymmetry | None":
        class_index = {w: k for k, w in enumerate(program.class_words)}
        basis_index = {m: i for i, m in enumerate(program.basis)}
        class_perm = np.empty(program.n_classes, dtype=np.int64)
        for k, w in enumerate(program.class_words):
            image = class_index.get(moment_key(w.swap_parties()))
            if image is None:
                return None
            class_perm[k] = image
        basis_perm = np.empty(program.size, dtype=np.int64)
        for i, m in enumerate(program.basis):
            image = basis_index.get(m.swap_parties())
            if image is None:
                return None
            basis_perm[i] = image

        def invariant_vec(vec: np.ndarray) -> bool:
            moved = np.empty_like(vec)
            moved[class_perm] = vec
            return bool(np.allclose(moved, vec, rtol=0.0, atol=1e-12))

        if not invariant_vec(program.objective):
            return None
        rows = [(vec, rhs) for vec, rhs in program.equalities]
        for vec, rhs in rows:
            moved = np.empty_like(vec)
            moved[class_perm] = vec
            if not any(
                rhs == rhs2 and np.allclose(moved, vec2, rtol=0.0, atol=1e-12)
                for vec2, rhs2 in rows
            ):
                return None
        return _SwapSymmetry(class_perm, basis_perm)


class _ReducedSpace:
    """Orbit variables and block-diagonalizing basis map.

    Without symmetry this is the identity reduction: one block, every class
    its own orbit.  With the party swap, basis vectors split into symmetric
    and antisymmetric combinations (two blocks) and swapped classes share a
    variable.
    """

    def __init__(self, program: MomentProgram, symmetry: "_SwapSymmetry | None"):
        size = program.size
        n_classes = program.n_classes
        if symmetry is None:
            self.orbit_of_class = np.arange(n_classes)
            self.n_orbits = n_classes
            self.block_dims = [size]
            img_block = np.zeros((size, 2), dtype=np.int64)
            img_col = np.stack([np.arange(size), np.zeros(size, dtype=np.int64)], axis=1)
            img_w = np.stack([np.ones(size), np.zeros(size)], axis=1)
            img_block[:, 1] = 0
            self.img_block, self.img_col, self.img_w = img_block, img_col, img_w
            return

        perm = symmetry.class_perm
        orbit_of_class = -np.ones(n_classes, dtype=np.int64)
        n_orbits = 0
        for k in range(n_classes):
            if orbit_of_class[k] < 0:
                orbit_of_class[k] = n_orbits
                orbit_of_class[perm[k]] = n_orbits
                n_orbits += 1
        self.orbit_of_class = orbit_of_class
        self.n_orbits = n_orbits

        bperm = symmetry.basis_perm
        fixed = [i for i in range(size) if bperm[i] == i]
        pairs = [(i, bperm[i]) for i in range(size) if i < bperm[i]]
        dim_plus = len(fixed) + len(pairs)
        dim_minus = len(pairs)
        self.block_dims = [dim_plus, dim_minus] if dim_minus else [dim_plus]

        # each original basis index maps to <= 2 (block, column, weight) images
        img_block = np.zeros((size, 2), dtype=np.int64)
        img_col = np.zeros((size, 2), dtype=np.int64)
        img_w = np.zeros((size, 2))
        for col, i in enumerate(fixed):
            img_block[i, 0], img_col[i, 0], img_w[i, 0] = 0, col, 1.0
        root = 1.0 / math.sqrt(2.0)
        for col, (i, ip) in enumerate(pairs):
            img_block[i, 0], img_col[i, 0], img_w[i, 0] = 0, len(fixed) + col, root
            img_block[i, 1], img_col[i, 1], img_w[i, 1] = 1, col, root
            img_block[ip, 0], img_col[ip, 0], img_w[ip, 0] = 0, len(fixed) + col, root
            img_block[ip, 1], img_col[ip, 1], img_w[ip, 1] = 1, col, -root
        self.img_block, self.img_col, self.img_w = img_block, img_col, img_w

    def reduce_vector(self, vec: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n_orbits)
        np.add.at(out, self.orbit_of_class, vec)
        return out

    def expand_vector(self, reduced: np.ndarray) -> np.ndarray:
        return reduced[self.orbit_of_class]

    def constraint_entries(self, cell_class: np.ndarray):
        """Per-block sparse entries of the orbit matrices A_o = sum of cells."""
        size = cell_class.shape[0]
        p_idx, q_idx = np.indices((size, size))
        p_idx, q_idx = p_idx.ravel(), q_idx.ravel()
        orbit = self.orbit_of_class[cell_class.ravel()]
        per_block: dict[int, list] = {b: [] for b in range(len(self.block_dims))}
        for s in (0, 1):
            for t in (0, 1):
                wp = self.img_w[p_idx, s]
                wq = self.img_w[q_idx, t]
                mask = (wp != 0.0) & (wq != 0.0) & (
                    self.img_block[p_idx, s] == self.img_block[q_idx, t]
                )
                if not mask.any():
                    continue
                blocks = self.img_block[p_idx[mask], s]
                rows = self.img_col[p_idx[mask], s]
                cols = self.img_col[q_idx[mask], t]
                vals = wp[mask] * wq[mask]
                var = orbit[mask]
                for b in range(len(self.block_dims)):
                    sel = blocks == b
                    if sel.any():
                        per_block[b].append((var[sel], rows[sel], cols[sel], vals[sel]))
        out = []
        for b, dim in enumerate(self.block_dims):
            if per_block[b]:
                var = np.concatenate([e[0] for e in per_block[b]])
                row = np.concatenate([e[1] for e in per_block[b]])
                col = np.concatenate([e[2] for e in per_block[b]])
                val = np.concatenate([e[3] for e in per_block[b]])
                # coalesce duplicate (var, row, col) triplets
                coo = scipy.sparse.csr_matrix(
                    (val, (row * dim + col, var)), shape=(dim * dim, self.n_orbits)
                ).tocoo()
                flat, var, val = coo.row, coo.col, coo.data
                out.append(
                    LmiBlockData(
                        dim=dim,
                        var=var.astype(np.int64),
                        row=(flat // dim).astype(np.int64),
                        col=(flat % dim).astype(np.int64),
                        val=val.astype(float),
                    )
                )
            else:
                out.append(
                    LmiBlockData(
                        dim=dim,
                        var=np.empty(0, dtype=np.int64),
                        row=np.empty(0, dtype=np.int64),
                        col=np.empty(0, dtype=np.int64),
                        val=np.empty(0),
                    )
                )
        return out


def _pinned_zero_classes(program: MomentProgram) -> set[int]:
    """Classes provably zero: hard-zero equality rows propagated through PSD.

    A row ``sum c_k y_k = 0`` with same-sign coefficients over classes that
    own a diagonal cell (hence nonnegative moments) pins those classes to
    zero; a zero diagonal cell forces its whole matrix row to zero, pinning
    every class appearing there.  Iterated to a fixpoint.
    """
    size = program.size
    diag = program.cell_class.diagonal()
    has_diag = np.zeros(program.n_classes, dtype=bool)
    has_diag[diag] = True
    pinned: set[int] = set()
    changed = True
    while changed:
        changed = False
        for vec, rhs in program.equalities:
            active = [k for k in np.nonzero(vec)[0] if k not in pinned]
            if abs(rhs) > 1e-12 or not active:
                continue
            signs = np.sign(vec[active])
            if np.all(signs == signs[0]) and all(has_diag[k] for k in active):
                pinned.update(active)
                changed = True
        for p in range(size):
            if diag[p] in pinned:
                row = set(program.cell_class[p]) - pinned
                if row:
                    pinned.update(row)
                    changed = True
    return pinned


def _facial_reduction(program: MomentProgram):
    """Drop basis rows whose diagonal moment is a hard zero.

    Restores a strictly feasible interior when conditions pin probabilities
    to zero (the zero classes become explicit ``y_k = 0`` rows and their
    matrix rows leave the cone constraint).  Returns
    ``(sub_program, kept_rows, kept_classes)`` with ``kept_rows = None``
    when no safe reduction applies.
    """
    pinned = _pinned_zero_classes(program)
    if not pinned:
        return program, None, None
    diag = program.cell_class.diagonal()
    keep = np.array([p for p in range(program.size) if diag[p] not in pinned], dtype=np.int64)
    sub_cell = program.cell_class[np.ix_(keep, keep)]
    present = set(int(k) for k in np.unique(sub_cell))
    used = set(int(k) for k in np.nonzero(program.objective)[0])
    for vec, _ in program.equalities:
        used.update(int(k) for k in np.nonzero(vec)[0])
    if used - present - pinned:
        return program, None, None  # a live class would lose its matrix presence
    kept_classes = sorted(present | ((pinned & used)))
    remap = {old: new for new, old in enumerate(kept_classes)}
    new_cell = np.vectorize(remap.__getitem__)(sub_cell)
    n_new = len(kept_classes)

    def project(vec: np.ndarray) -> np.ndarray:
        out = np.zeros(n_new)
        for k in np.nonzero(vec)[0]:
            out[remap[int(k)]] = vec[k]
        return out

    equalities = [(project(vec), rhs) for vec, rhs in program.equalities]
    for k in sorted(kc for kc in kept_classes if kc in pinned):
        pin_row = np.zeros(n_new)
        pin_row[remap[k]] = 1.0
        equalities.append((pin_row, 0.0))
    sub = MomentProgram(
        n_settings=program.n_settings,
        level=program.level,
        basis=tuple(program.basis[p] for p in keep),
        class_words=tuple(program.class_words[k] for k in kept_classes),
        cell_class=new_cell,
        objective=project(program.objective),
        objective_offset=program.objective_offset,
        equalities=tuple(equalities),
        description=program.description + "+facial",
    )
    return sub, keep, np.array(kept_classes, dtype=np.int64)


def _row_reduce(rows: list[tuple[np.ndarray, float]]):
    """RREF of a small equality system; returns (pivots, solved rows) or None
    if the system is inconsistent."""
    work = [(vec.astype(float).copy(), float(rhs)) for vec, rhs in rows]
    pivots: list[int] = []
    solved: list[tuple[int, np.ndarray, float]] = []
    for vec, rhs in work:
        for p, pvec, prhs in solved:
            factor = vec[p]
            if factor != 0.0:
                vec = vec - factor * pvec
                rhs = rhs - factor * prhs
        scale = np.abs(vec).max(initial=0.0)
        if scale <= 1e-12:
            if abs(rhs) > 1e-9:
                return None
            continue
        p = int(np.abs(vec).argmax())
        pvec = vec / vec[p]
        prhs = rhs / vec[p]
        solved = [
            (p2, v2 - v2[p] * pvec, r2 - v2[p] * prhs) for p2, v2, r2 in solved
        ]
        solved.append((p, pvec, prhs))
        pivots.append(p)
    return pivots, solved


def solve(program: MomentProgram, cfg: SdpConfig | None = None) -> SdpSolution:
    """Solve a moment program; maximizes its objective over PSD moment matrices."""
    cfg = cfg or SdpConfig()
    work, keep_rows, kept_classes = _facial_reduction(program)
    symmetry = _SwapSymmetry.detect(work) if cfg.use_symmetry else None
    space = _ReducedSpace(work, symmetry)

    blocks = space.constraint_entries(work.cell_class)
    b_red = space.reduce_vector(work.objective)
    rows_red = [(space.reduce_vector(vec), rhs) for vec, rhs in work.equalities]

    reduced = _row_reduce(rows_red)
    if reduced is None:
        return _infeasible_solution(program, "inconsistent equality constraints")
    pivots, solved = reduced

    pivot_set = set(pivots)
    free = np.array([k for k in range(space.n_orbits) if k not in pivot_set], dtype=np.int64)
    free_pos = -np.ones(space.n_orbits, dtype=np.int64)
    free_pos[free] = np.arange(len(free))

    # substitution y_pivot = prhs - sum_c pvec[c] y_c folds pivot columns into
    # the constant block F0 and corrects the free columns and the objective
    f0_blocks = [np.zeros((dim, dim)) for dim in space.block_dims]
    b_free = b_red[free].copy()
    for p, pvec, prhs in solved:
        b_free -= b_red[p] * pvec[free]

    entries = []
    for bi, blk in enumerate(blocks):
        keep = free_pos[blk.var] >= 0
        parts_var = [free_pos[blk.var[keep]]]
        parts_row = [blk.row[keep]]
        parts_col = [blk.col[keep]]
        parts_val = [blk.val[keep]]
        for p, pvec, prhs in solved:
            sel = blk.var == p
            if not sel.any():
                continue
            prow, pcol, pval = blk.row[sel], blk.col[sel], blk.val[sel]
            np.add.at(f0_blocks[bi], (prow, pcol), prhs * pval)
            for c in np.nonzero(pvec[free])[0]:
                parts_var.append(np.full(len(prow), c, dtype=np.int64))
                parts_row.append(prow)
                parts_col.append(pcol)
                parts_val.append(-pvec[free[c]] * pval)
        entries.append(
            LmiBlockData(
                dim=blk.dim,
                var=np.concatenate(parts_var),
                row=np.concatenate(parts_row),
                col=np.concatenate(parts_col),
                val=np.concatenate(parts_val),
            )
        )

    problem = LmiProblem(f0_blocks, entries, b_free)
    raw = solve_lmi(
        problem,
        max_iterations=cfg.max_iterations,
        gap_tol=cfg.gap_tol,
        feas_tol=cfg.feas_tol,
        trace=bool(os.environ.get("NONLOCALITY_WB_SDP_TRACE")),
    )

    y_orbit = np.zeros(space.n_orbits)
    y_orbit[free] = raw.y
    for p, pvec, prhs in solved:
        y_orbit[p] = prhs - pvec[free] @ raw.y
    y_work = space.expand_vector(y_orbit)
    if keep_rows is None:
        y_class = y_work
    else:
        # classes outside the face are hard zeros, so scattering the kept
        # moments reconstructs the full matrix including the dropped rows
        y_class = np.zeros(program.n_classes)
        y_class[kept_classes] = y_work

    moment_matrix = y_class[program.cell_class]
    residuals = np.array([abs(vec @ y_class - rhs) for vec, rhs in program.equalities])
    min_eig = float(np.linalg.eigvalsh(moment_matrix)[0])
    objective_value = float(program.objective @ y_class + program.objective_offset)

    status = raw.status
    if status == STATUS_OPTIMAL and (min_eig < -1e-8 or residuals.max(initial=0.0) > 1e-7):
        status = STATUS_MAX_ITERATIONS  # do not certify a sloppy iterate
    return SdpSolution(
        objective_value=objective_value,
        moment_matrix=moment_matrix,
        status=status,
        min_eigenvalue=min_eig,
        residuals=residuals,
        diagnostics={
            "iterations": raw.iterations,
            "rel_gap": raw.rel_gap,
            "primal_infeasibility": raw.primal_infeasibility,
            "dual_infeasibility": raw.dual_infeasibility,
            "dual_objective": raw.objective + program.objective_offset,
            "primal_objective": raw.primal_objective + program.objective_offset,
            "matrix_size": program.size,
            "classes": program.n_classes,
            "variables": len(free),
            "block_dims": list(space.block_dims),
            "symmetry_reduced": symmetry is not None,
            "facially_reduced_size": None if keep_rows is None else work.size,
        },
    )


def _infeasible_solution(program: MomentProgram, reason: str) -> SdpSolution:
    size = program.size
    return SdpSolution(
        objective_value=float("nan"),
        moment_matrix=np.zeros((size, size)),
        status=STATUS_INFEASIBLE,
        min_eigenvalue=0.0,
        residuals=np.full(len(program.equalities), np.inf),
        diagnostics={"reason": reason},
    )


def hardy_upper_bound(
    paradox: HardyParadox, level: int, cfg: SdpConfig | None = None
) -> float:
    """Level-``level`` outer bound on the paradox's quantum Hardy value."""
    return solve(build_program(paradox, level), cfg).objective_value


def moment_matrix_of_model(model: QubitModel, level: int) -> np.ndarray:
    """Gram moment matrix of an explicit qubit model over the level basis.

    Row ``u`` is the vector ``op(u) |psi>`` with ``op`` the product of
    outcome-0 projectors named by the word, so the matrix is PSD by
    construction and matches the abstract cell identification.
    """
    _check_level(level)
    n = model.n_settings
    basis = basis_monomials(n, level)
    eye = np.eye(2)
    proj_a = [(eye + observable(a)) / 2.0 for a in model.alpha]
    proj_b = [(eye + observable(b)) / 2.0 for b in model.beta]
    psi = state_vector(model.theta)
    vectors = np.empty((len(basis), 4))
    for idx, mono in enumerate(basis):
        op_a = eye
        for s in mono.alice:
            op_a = op_a @ proj_a[s - 1]
        op_b = eye
        for s in mono.bob:
            op_b = op_b @ proj_b[s - 1]
        vectors[idx] = np.kron(op_a, op_b) @ psi
    return vectors @ vectors.T
