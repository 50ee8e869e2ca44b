"""Operator words over qutrit-qubit edges and their exact action.

Every operator the lab needs is a scalar multiple of a monomial word:
a product of qutrit shifts X^a, qutrit phases Z^a, qubit flips and
phases, and the conjugation permutation K, where the X and Z exponents
may be multiplied by a product of qubit sign operators on named edges.
A monomial word maps each computational basis state to a single basis
state with a phase, so its action on a state space with N basis
vectors is a permutation array plus a phase array. Sums of words
(needed for the Hermitian observables and projectors) are kept as
explicit coefficient lists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from ds3sim.lattice import Edge

OMEGA = np.exp(2j * np.pi / 3)

_W3 = np.array([1.0, OMEGA, OMEGA ** 2], dtype=np.complex128)


@dataclass(frozen=True)
class Factor:
    """One primitive factor acting on a single edge.

    kind is one of "X", "Z" (qutrit, with ``power`` mod 3), "sX", "sZ"
    (qubit) or "K". ``cond`` lists edges whose qubit sign operators
    multiply the exponent, so Factor(e, "X", 2, cond=(d,)) is the
    qutrit shift X_e^(2 s_d) with s_d the qubit sign on edge d.
    """

    edge: Edge
    kind: str
    power: int = 1
    cond: tuple[Edge, ...] = ()

    def dagger(self) -> "Factor":
        if self.kind in ("X", "Z"):
            return Factor(self.edge, self.kind, (-self.power) % 3, self.cond)
        return self


@dataclass(frozen=True)
class Word:
    """Product of factors. Factors are written left to right in
    operator order, so the last factor acts on a ket first."""

    factors: tuple[Factor, ...] = ()
    scalar: complex = 1.0 + 0j

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.factors + other.factors, self.scalar * other.scalar)

    def dagger(self) -> "Word":
        return Word(
            tuple(f.dagger() for f in reversed(self.factors)),
            np.conj(self.scalar),
        )

    def scaled(self, c: complex) -> "Word":
        return Word(self.factors, self.scalar * c)

    def support(self) -> frozenset[Edge]:
        out: set[Edge] = set()
        for f in self.factors:
            out.add(f.edge)
            out.update(f.cond)
        return frozenset(out)


IDENTITY_WORD = Word()

# An operator sum: list of (coefficient, word) terms.
OpSum = tuple[tuple[complex, Word], ...]


def as_opsum(op: "Word | OpSum") -> OpSum:
    if isinstance(op, Word):
        return ((1.0 + 0j, op),)
    return op


def opsum_support(op: "Word | OpSum") -> frozenset[Edge]:
    out: set[Edge] = set()
    for _, w in as_opsum(op):
        out |= w.support()
    return frozenset(out)


def opsum_product(a: "Word | OpSum", b: "Word | OpSum") -> OpSum:
    return tuple(
        (ca * cb, wa * wb) for ca, wa in as_opsum(a) for cb, wb in as_opsum(b)
    )


def opsum_sum(*terms: "Word | OpSum") -> OpSum:
    out: list[tuple[complex, Word]] = []
    for t in terms:
        out.extend(as_opsum(t))
    return tuple(out)


def opsum_scale(op: "Word | OpSum", c: complex) -> OpSum:
    return tuple((coeff * c, w) for coeff, w in as_opsum(op))


def group_commutator(v: Word, w: Word) -> Word:
    """V W V^-1 W^-1 for unitary words."""
    return v * w * v.dagger() * w.dagger()


class StateSpace:
    """Dense basis over an ordered set of edges.

    Basis index = (qutrit mixed-radix index) * 2^n + (qubit index), so
    a state vector reshaped to (3^n, 2^n) has qubit patterns as
    columns. Basis label arrays are materialized once; they are the
    workhorse for computing word actions.
    """

    def __init__(self, edges: Iterable[Edge]):
        self.edges: tuple[Edge, ...] = tuple(edges)
        self.index: dict[Edge, int] = {e: i for i, e in enumerate(self.edges)}
        self.n = len(self.edges)
        if self.n > 8:
            raise ValueError(f"state space over {self.n} edges is too large")
        self.n3 = 3 ** self.n
        self.n2 = 2 ** self.n
        self.dim = self.n3 * self.n2

    @cached_property
    def _basis(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.arange(self.dim)
        trit_idx = idx // self.n2
        bit_idx = idx % self.n2
        trits = np.stack(
            np.unravel_index(trit_idx, (3,) * self.n), axis=1
        ).astype(np.int8)
        bits = np.stack(
            np.unravel_index(bit_idx, (2,) * self.n), axis=1
        ).astype(np.int8)
        return trits, bits

    def random_states(self, rng: np.random.Generator, count: int) -> np.ndarray:
        psi = rng.standard_normal((count, self.dim)) + 1j * rng.standard_normal(
            (count, self.dim)
        )
        psi /= np.linalg.norm(psi, axis=1, keepdims=True)
        return psi

    def basis_state(self, trits: Sequence[int], bits: Sequence[int]) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=np.complex128)
        t = int(np.ravel_multi_index(tuple(trits), (3,) * self.n))
        b = int(np.ravel_multi_index(tuple(bits), (2,) * self.n))
        psi[t * self.n2 + b] = 1.0
        return psi


def word_action(word: Word, space: StateSpace) -> tuple[np.ndarray, np.ndarray]:
    """Permutation and phase arrays of a word: W|b> = phase[b] |perm[b]>."""
    trits, bits = space._basis
    trits = trits.copy()
    bits = bits.copy()
    phase = np.full(space.dim, word.scalar, dtype=np.complex128)
    for f in reversed(word.factors):
        i = space.index[f.edge]
        if f.kind == "X":
            shift = np.full(space.dim, f.power, dtype=np.int64)
            for c in f.cond:
                shift *= 1 - 2 * bits[:, space.index[c]].astype(np.int64)
            trits[:, i] = (trits[:, i] + shift) % 3
        elif f.kind == "Z":
            expo = np.full(space.dim, f.power, dtype=np.int64)
            for c in f.cond:
                expo *= 1 - 2 * bits[:, space.index[c]].astype(np.int64)
            phase *= _W3[(expo * trits[:, i]) % 3]
        elif f.kind == "sX":
            bits[:, i] ^= 1
        elif f.kind == "sZ":
            phase *= 1 - 2 * bits[:, i].astype(np.int64)
        elif f.kind == "K":
            trits[:, i] = (-trits[:, i]) % 3
        else:
            raise ValueError(f"unknown factor kind {f.kind}")
    weights3 = 3 ** np.arange(space.n - 1, -1, -1, dtype=np.int64)
    weights2 = 2 ** np.arange(space.n - 1, -1, -1, dtype=np.int64)
    perm = (trits.astype(np.int64) @ weights3) * space.n2 + (
        bits.astype(np.int64) @ weights2
    )
    return perm, phase


def apply_action(
    action: tuple[np.ndarray, np.ndarray], psi: np.ndarray
) -> np.ndarray:
    perm, phase = action
    out = np.empty_like(psi)
    if psi.ndim == 1:
        out[perm] = phase * psi
    else:
        out[:, perm] = phase * psi
    return out


def apply_word(word: Word, psi: np.ndarray, space: StateSpace) -> np.ndarray:
    return apply_action(word_action(word, space), psi)


def apply_opsum(
    op: "Word | OpSum",
    psi: np.ndarray,
    space: StateSpace,
    actions: Sequence[tuple[np.ndarray, np.ndarray]] | None = None,
) -> np.ndarray:
    terms = as_opsum(op)
    if actions is None:
        actions = [word_action(w, space) for _, w in terms]
    out = np.zeros_like(psi)
    for (coeff, _), action in zip(terms, actions):
        out += coeff * apply_action(action, psi)
    return out


def word_trace(word: Word, space: StateSpace) -> complex:
    """Exact trace: sum of phases over basis states the word fixes."""
    perm, phase = word_action(word, space)
    fixed = perm == np.arange(space.dim)
    return complex(phase[fixed].sum())


def dense_matrix(op: "Word | OpSum", space: StateSpace) -> np.ndarray:
    """Dense matrix of an operator sum. Only for small spaces."""
    if space.dim > 4096:
        raise ValueError(f"dense matrix at dimension {space.dim} refused")
    mat = np.zeros((space.dim, space.dim), dtype=np.complex128)
    cols = np.arange(space.dim)
    for coeff, w in as_opsum(op):
        perm, phase = word_action(w, space)
        mat[perm, cols] += coeff * phase
    return mat


def check_identity(
    lhs: "Word | OpSum",
    rhs: "Word | OpSum",
    space: StateSpace,
    trials: int = 20,
    rng: np.random.Generator | None = None,
    batch: int | None = None,
) -> float:
    """Max residual of (lhs - rhs) applied to random normalized states.

    Word actions are computed once per side; each trial then costs a
    few gather-scatter passes. Batches are capped so that the largest
    spaces stay inside a modest memory envelope.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    lhs_terms = as_opsum(lhs)
    rhs_terms = as_opsum(rhs)
    lhs_actions = [word_action(w, space) for _, w in lhs_terms]
    rhs_actions = [word_action(w, space) for _, w in rhs_terms]
    if batch is None:
        batch = max(1, min(trials, (6 ** 7 * 4) // space.dim))
    worst = 0.0
    remaining = trials
    while remaining > 0:
        b = min(batch, remaining)
        remaining -= b
        psi = space.random_states(rng, b)
        delta = apply_opsum(lhs_terms, psi, space, lhs_actions) - apply_opsum(
            rhs_terms, psi, space, rhs_actions
        )
        worst = max(worst, float(np.linalg.norm(delta, axis=1).max()))
    return worst
