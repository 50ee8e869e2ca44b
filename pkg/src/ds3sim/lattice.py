"""Shared square-lattice geometry on the L x L torus.

Edges are named ("h", x, y) and ("v", x, y). The horizontal edge
(h, x, y) points from vertex (x, y) to (x + 1, y); the vertical edge
(v, x, y) points from (x, y) to (x, y + 1). Plaquettes are labeled by
their south-west corner vertex.

Both the exact operator lab and the fast frame simulator import these
role maps, so a convention mistake would show up in the lab's identity
checks rather than silently diverging between the two.
"""

from __future__ import annotations

Edge = tuple[str, int, int]
Site = tuple[int, int]


def vertex_star(x: int, y: int, L: int) -> dict[str, Edge]:
    """The four edges incident to a vertex, keyed by compass role."""
    return {
        "N": ("v", x % L, y % L),
        "E": ("h", x % L, y % L),
        "S": ("v", x % L, (y - 1) % L),
        "W": ("h", (x - 1) % L, y % L),
    }


def plaquette_boundary(x: int, y: int, L: int) -> dict[str, Edge]:
    """The four boundary edges of plaquette (x, y), keyed by side."""
    return {
        "N": ("h", x % L, (y + 1) % L),
        "E": ("v", (x + 1) % L, y % L),
        "S": ("h", x % L, y % L),
        "W": ("v", x % L, y % L),
    }


def edge_endpoints(edge: Edge, L: int) -> tuple[Site, Site]:
    """Tail and head vertex of an edge, in its orientation."""
    kind, x, y = edge
    if kind == "h":
        return (x, y), ((x + 1) % L, y)
    return (x, y), (x, (y + 1) % L)


def edge_sides(edge: Edge, L: int) -> tuple[Site, Site]:
    """Plaquettes on either side of an edge.

    For a horizontal edge: (plaquette above, plaquette below). For a
    vertical edge: (plaquette to the east, plaquette to the west).
    The first entry is always the plaquette whose boundary contains
    the edge in role S or W respectively.
    """
    kind, x, y = edge
    if kind == "h":
        return (x, y), (x, (y - 1) % L)
    return (x, y), ((x - 1) % L, y)


def all_edges(L: int) -> list[Edge]:
    return [(k, x, y) for k in ("h", "v") for x in range(L) for y in range(L)]


def all_sites(L: int) -> list[Site]:
    return [(x, y) for x in range(L) for y in range(L)]
