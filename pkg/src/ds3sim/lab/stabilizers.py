"""Builders for the decorated vertex and plaquette operators.

Kinds follow the two-layer structure of the code:

* "alpha" / "beta": qubit vertex flip and qubit plaquette sign terms.
* "A" / "B": qutrit vertex shift and plaquette phase words whose
  exponents are controlled by qubit signs on nearby edges.
* "S_v" / "S_p": the Hermitian observables built from A and B,
  rescaled to have spectrum {-1, +1} (2 Re(A) adjusted by the identity
  so the charged sectors read -1 rather than -1/2).
* "A3" / "B3": the undecorated qutrit code terms the ungauged phase
  measures.
* "F" / "G": parafermion sector projectors on a vertex-plaquette pair
  site, rescaled to true projectors with spectrum {0, 1}.

Sites for vertex kinds are vertex coordinates, for plaquette kinds
plaquette coordinates. For "F"/"G" the site is the plaquette; the
paired vertex is its north-east corner, which touches the plaquette
boundary in two edges and commutes with its phase word in every charge
sector, keeping the projectors Hermitian.
"""

from __future__ import annotations

from ds3sim.lab.words import Factor, OpSum, Word, opsum_product, opsum_scale, opsum_sum
from ds3sim.lattice import Edge, plaquette_boundary, vertex_star

STABILIZER_KINDS = ("alpha", "beta", "A", "B", "S_v", "S_p", "A3", "B3", "F", "G")

VERTEX_KINDS = ("alpha", "A", "S_v", "A3")
PLAQUETTE_KINDS = ("beta", "B", "S_p", "B3", "F", "G")


def _check_site(site: tuple[int, int], L: int) -> None:
    x, y = site
    if not (0 <= x < L and 0 <= y < L):
        raise ValueError(f"site {site} outside lattice of size {L}")


def qubit_vertex_word(site: tuple[int, int], L: int) -> Word:
    star = vertex_star(*site, L)
    return Word((
        Factor(star["N"], "K"),
        Factor(star["N"], "sX"),
        Factor(star["E"], "K"),
        Factor(star["E"], "sX"),
        Factor(star["S"], "sX"),
        Factor(star["W"], "sX"),
    ))


def qubit_plaquette_word(site: tuple[int, int], L: int) -> Word:
    b = plaquette_boundary(*site, L)
    return Word(tuple(Factor(b[r], "sZ") for r in ("N", "E", "S", "W")))


def qutrit_vertex_word(site: tuple[int, int], L: int) -> Word:
    # X_N X_E X_S^(-delta) X_W^(-gamma), delta and gamma the qubit
    # signs on the S and W edges themselves
    star = vertex_star(*site, L)
    return Word((
        Factor(star["N"], "X", 1),
        Factor(star["E"], "X", 1),
        Factor(star["S"], "X", 2, cond=(star["S"],)),
        Factor(star["W"], "X", 2, cond=(star["W"],)),
    ))


def qutrit_plaquette_word(site: tuple[int, int], L: int, kappa_form: str = "WNE") -> Word:
    # Z_N^xi Z_E^(-kappa) Z_S^(-lambda) Z_W with xi the W qubit sign,
    # kappa the W N E qubit sign product and lambda the full boundary
    # sign product. kappa_form selects between the two equivalent
    # spellings of kappa (the S sign times lambda gives the same
    # operator because the repeated S sign squares away).
    b = plaquette_boundary(*site, L)
    if kappa_form == "WNE":
        kappa = (b["W"], b["N"], b["E"])
    elif kappa_form == "S*beta":
        kappa = (b["S"], b["N"], b["E"], b["S"], b["W"])
    else:
        raise ValueError(f"unknown kappa form {kappa_form}")
    boundary = (b["N"], b["E"], b["S"], b["W"])
    return Word((
        Factor(b["N"], "Z", 1, cond=(b["W"],)),
        Factor(b["E"], "Z", 2, cond=kappa),
        Factor(b["S"], "Z", 2, cond=boundary),
        Factor(b["W"], "Z", 1),
    ))


def qutrit_vertex_z3_word(site: tuple[int, int], L: int) -> Word:
    star = vertex_star(*site, L)
    return Word((
        Factor(star["N"], "X", 1),
        Factor(star["E"], "X", 1),
        Factor(star["S"], "X", 2),
        Factor(star["W"], "X", 2),
    ))


def qutrit_plaquette_z3_word(site: tuple[int, int], L: int) -> Word:
    b = plaquette_boundary(*site, L)
    return Word((
        Factor(b["N"], "Z", 2),
        Factor(b["E"], "Z", 1),
        Factor(b["S"], "Z", 1),
        Factor(b["W"], "Z", 2),
    ))


def binarized_observable(word: Word) -> OpSum:
    """(2(W + W^dag) - 1)/3: spectrum {-1, +1} for order-3 unitaries."""
    return opsum_sum(
        ((-1 / 3 + 0j, Word()),),
        opsum_scale(word, 2 / 3),
        opsum_scale(word.dagger(), 2 / 3),
    )


def ne_corner_vertex(p: tuple[int, int], L: int) -> tuple[int, int]:
    return ((p[0] + 1) % L, (p[1] + 1) % L)


def parafermion_projector(site: tuple[int, int], L: int, which: str) -> OpSum:
    p = site
    v = ne_corner_vertex(p, L)
    a = qutrit_vertex_word(v, L)
    b = qutrit_plaquette_word(p, L)
    if which == "F":
        # fires when the vertex and plaquette charge exponents differ
        cross = (a.dagger() * b, a * b.dagger())
    else:
        # fires when the exponents do not cancel against each other
        cross = (a * b, a.dagger() * b.dagger())
    return opsum_sum(
        ((2 / 3 + 0j, Word()),),
        opsum_scale(cross[0], -1 / 3),
        opsum_scale(cross[1], -1 / 3),
    )


def build_stabilizer(kind: str, site: tuple[int, int], L: int):
    """Operator word (or sum) for one stabilizer kind at a site."""
    _check_site(site, L)
    if kind == "alpha":
        return qubit_vertex_word(site, L)
    if kind == "beta":
        return qubit_plaquette_word(site, L)
    if kind == "A":
        return qutrit_vertex_word(site, L)
    if kind == "B":
        return qutrit_plaquette_word(site, L)
    if kind == "A3":
        return qutrit_vertex_z3_word(site, L)
    if kind == "B3":
        return qutrit_plaquette_z3_word(site, L)
    if kind == "S_v":
        return binarized_observable(qutrit_vertex_word(site, L))
    if kind == "S_p":
        return binarized_observable(qutrit_plaquette_word(site, L))
    if kind in ("F", "G"):
        return parafermion_projector(site, L, kind)
    raise ValueError(f"unknown stabilizer kind {kind}")


def stabilizer_support(kind: str, site: tuple[int, int], L: int) -> frozenset[Edge]:
    op = build_stabilizer(kind, site, L)
    if isinstance(op, Word):
        return op.support()
    out: set[Edge] = set()
    for _, w in op:
        out |= w.support()
    return frozenset(out)
