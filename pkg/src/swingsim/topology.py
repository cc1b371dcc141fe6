"""Network models: torus, HammingMesh-style board grids, and HyperX.

All three families share a node namespace: nodes live on a D-dimensional
grid and are addressed either by coordinate tuple or by flat rank
(dimension 0 varies fastest). What differs is the wiring, and therefore
what `minimal_paths` returns:

* torus: per-dimension rings; a route moves dimension by dimension, taking
  the shorter way around each ring (both ways on an exact tie).
* hx2mesh: nodes are grouped into square boards wired as 2D meshes; board
  rows and columns are joined by switch fabrics reachable from the board
  edge nodes. A cross-board move in one dimension costs one fabric
  up-link plus one fabric down-link, plus any mesh hops to/from the edge.
* hyperx: every node connects directly to all nodes sharing its row or
  column, so every per-dimension move is a single hop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

DEFAULT_LINK_BANDWIDTH_GBPS = 400
DEFAULT_LINK_LATENCY_NS = 100
DEFAULT_HOP_PROCESSING_NS = 300
DEFAULT_INTRA_BOARD_LATENCY_NS = 25


class Family(Enum):
    TORUS = "torus"
    HAMMINGMESH = "hx2mesh"
    HYPERX = "hyperx"


class LinkKind(Enum):
    CABLE = "cable"              # inter-node wire: torus hop or hyperx direct link
    MESH = "mesh"                # intra-board trace
    FABRIC_UP = "fabric-up"      # board edge node into a row/column fabric
    FABRIC_DOWN = "fabric-down"  # row/column fabric into a board edge node


@dataclass(frozen=True, slots=True)
class TopologyKind:
    family: Family
    board_side: int = 1


@dataclass(frozen=True, slots=True)
class Link:
    """One directed wire.

    Fabric links have a single node endpoint: an up-link belongs to its
    source node (dst is None) and a down-link to its destination node
    (src is None), so two transfers entering the same fabric from one
    node share one Link identity regardless of where they exit.

    `direction` disambiguates parallel wires: the two cables of a
    two-node ring, or which board edge a fabric attachment sits on.
    """

    src: int | None
    dst: int | None
    dim: int
    direction: int
    kind: LinkKind


Path = tuple[Link, ...]


@dataclass(frozen=True)
class Topology:
    family: Family
    dims: tuple[int, ...]
    board_side: int = 1
    link_bandwidth_gbps: int = DEFAULT_LINK_BANDWIDTH_GBPS
    link_latency_ns: int = DEFAULT_LINK_LATENCY_NS
    hop_processing_ns: int = DEFAULT_HOP_PROCESSING_NS
    intra_board_latency_ns: int = DEFAULT_INTRA_BOARD_LATENCY_NS

    def __post_init__(self) -> None:
        if not self.dims:
            raise ValueError("topology needs at least one dimension")
        if any(d < 2 for d in self.dims):
            raise ValueError(f"every dimension must have at least 2 nodes, got {self.dims}")
        if self.family is Family.HAMMINGMESH:
            if len(self.dims) != 2:
                raise ValueError("board-grid topologies are defined for exactly 2 dimensions")
            if self.board_side < 2:
                raise ValueError("board side must be >= 2; a side-1 board grid is a hyperx")
            if any(d % self.board_side for d in self.dims):
                raise ValueError(
                    f"dimensions {self.dims} must be multiples of board side {self.board_side}"
                )
        elif self.board_side != 1:
            raise ValueError(f"{self.family.value} does not have boards")
        if self.link_bandwidth_gbps <= 0:
            raise ValueError("link bandwidth must be positive")
        if min(self.link_latency_ns, self.hop_processing_ns, self.intra_board_latency_ns) < 0:
            raise ValueError("latencies must be non-negative")

    @property
    def num_dims(self) -> int:
        return len(self.dims)

    @property
    def num_nodes(self) -> int:
        return math.prod(self.dims)

    @property
    def num_ports(self) -> int:
        # one port per dimension per direction
        return 2 * len(self.dims)

    def canonical(self) -> str:
        if self.family is Family.HAMMINGMESH:
            shown = tuple(d // self.board_side for d in self.dims)
        else:
            shown = self.dims
        return f"{self.family.value}:{'x'.join(str(d) for d in shown)}"

    def rank_of(self, coord: tuple[int, ...]) -> int:
        if len(coord) != len(self.dims):
            raise ValueError(f"coordinate {coord} has wrong arity for dims {self.dims}")
        rank = 0
        stride = 1
        for c, d in zip(coord, self.dims):
            if not 0 <= c < d:
                raise ValueError(f"coordinate {coord} out of range for dims {self.dims}")
            rank += c * stride
            stride *= d
        return rank

    def coord_of(self, rank: int) -> tuple[int, ...]:
        if not 0 <= rank < self.num_nodes:
            raise ValueError(f"rank {rank} out of range for {self.num_nodes} nodes")
        coord = []
        for d in self.dims:
            coord.append(rank % d)
            rank //= d
        return tuple(coord)

    def minimal_paths(self, src: int, dst: int) -> tuple[Path, ...]:
        """All shortest routes from src to dst, walking dimensions in index order.

        Equal-length alternatives (the half-ring tie on a torus) multiply;
        board-grid and hyperx routes are unique.
        """
        if src == dst:
            return ((),)
        a = self.coord_of(src)
        b = self.coord_of(dst)
        paths: list[list[Link]] = [[]]
        cur = list(a)
        for k in range(len(self.dims)):
            if cur[k] == b[k]:
                continue
            segments = self._dim_segments(tuple(cur), k, b[k])
            cur[k] = b[k]
            paths = [p + seg for p in paths for seg in segments]
        return tuple(tuple(p) for p in paths)

    def _dim_segments(self, base: tuple[int, ...], k: int, target: int) -> list[list[Link]]:
        if self.family is Family.HYPERX:
            u = self.rank_of(base)
            moved = list(base)
            moved[k] = target
            return [[Link(u, self.rank_of(tuple(moved)), k, 0, LinkKind.CABLE)]]
        if self.family is Family.TORUS:
            return self._torus_segments(base, k, target)
        return [self._board_segment(base, k, target)]

    def _torus_segments(self, base: tuple[int, ...], k: int, target: int) -> list[list[Link]]:
        d = self.dims[k]
        fwd = (target - base[k]) % d
        out = []
        for sign, hops in ((+1, fwd), (-1, d - fwd)):
            if hops > min(fwd, d - fwd):
                continue
            links = []
            coord = list(base)
            for _ in range(hops):
                u = self.rank_of(tuple(coord))
                coord[k] = (coord[k] + sign) % d
                links.append(Link(u, self.rank_of(tuple(coord)), k, sign, LinkKind.CABLE))
            out.append(links)
        return out

    def _board_segment(self, base: tuple[int, ...], k: int, target: int) -> list[Link]:
        side = self.board_side
        a = base[k]
        if a // side == target // side:
            return self._mesh_walk(base, k, target)
        exit_edge = self._nearest_edge(a)
        entry_edge = self._nearest_edge(target)
        links = self._mesh_walk(base, k, exit_edge)
        coord = list(base)
        coord[k] = exit_edge
        u = self.rank_of(tuple(coord))
        links.append(Link(u, None, k, self._edge_slot(exit_edge), LinkKind.FABRIC_UP))
        coord[k] = entry_edge
        v = self.rank_of(tuple(coord))
        links.append(Link(None, v, k, self._edge_slot(entry_edge), LinkKind.FABRIC_DOWN))
        links.extend(self._mesh_walk(tuple(coord), k, target))
        return links

    def _mesh_walk(self, base: tuple[int, ...], k: int, target: int) -> list[Link]:
        links = []
        coord = list(base)
        sign = 1 if target > coord[k] else -1
        while coord[k] != target:
            u = self.rank_of(tuple(coord))
            coord[k] += sign
            links.append(Link(u, self.rank_of(tuple(coord)), k, sign, LinkKind.MESH))
        return links

    def _nearest_edge(self, a: int) -> int:
        side = self.board_side
        lo = (a // side) * side
        hi = lo + side - 1
        return lo if a - lo <= hi - a else hi

    def _edge_slot(self, edge: int) -> int:
        # left edge attaches through the node's negative-facing port slot
        return -1 if edge % self.board_side == 0 else 1


def build(
    kind: TopologyKind,
    dims: tuple[int, ...] | list[int],
    link_bandwidth_gbps: int = DEFAULT_LINK_BANDWIDTH_GBPS,
    link_latency_ns: int = DEFAULT_LINK_LATENCY_NS,
    hop_processing_ns: int = DEFAULT_HOP_PROCESSING_NS,
    intra_board_latency_ns: int = DEFAULT_INTRA_BOARD_LATENCY_NS,
) -> Topology:
    """Construct a topology; a side-1 board grid is normalized to hyperx."""
    family, side = kind.family, kind.board_side
    if family is Family.HAMMINGMESH and side == 1:
        family, side = Family.HYPERX, 1
    return Topology(
        family=family,
        dims=tuple(dims),
        board_side=side,
        link_bandwidth_gbps=link_bandwidth_gbps,
        link_latency_ns=link_latency_ns,
        hop_processing_ns=hop_processing_ns,
        intra_board_latency_ns=intra_board_latency_ns,
    )


def parse_topology(text: str, **link_params: int) -> Topology:
    """Parse specs like torus:64x64, torus:4x16x2, hx2mesh:32x32, hyperx:64x64.

    For hx2mesh the numbers give the BOARD grid; each board is a 2x2 mesh,
    so hx2mesh:32x32 has 64x64 nodes.
    """
    head, sep, tail = text.strip().partition(":")
    if not sep or not tail:
        raise ValueError(f"topology spec {text!r} must look like family:AxB")
    try:
        extents = tuple(int(part) for part in tail.split("x"))
    except ValueError:
        raise ValueError(f"bad dimension list in topology spec {text!r}") from None
    family_token = head.lower()
    if family_token == "torus":
        return build(TopologyKind(Family.TORUS), extents, **link_params)
    if family_token == "hyperx":
        return build(TopologyKind(Family.HYPERX), extents, **link_params)
    if family_token == "hx2mesh":
        dims = tuple(2 * e for e in extents)
        return build(TopologyKind(Family.HAMMINGMESH, board_side=2), dims, **link_params)
    raise ValueError(f"unknown topology family {head!r} (torus, hx2mesh, hyperx)")
