"""Rank-to-hardware layout, message locality, and cube-partition hop counts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import LayoutError
from .params import Locality

__all__ = [
    "RankLayout",
    "CubeTopology",
    "locality",
    "cube_side",
    "hops",
    "average_hops",
]


@dataclass(frozen=True)
class RankLayout:
    """Maps each rank to a (node, socket) slot.

    The default block assignment places rank ``r`` on node ``r // ppn`` and
    socket ``(r % ppn) // (ppn // sockets_per_node)``. An explicit assignment
    (round-robin or a measured placement) can be supplied directly or loaded
    from a file of ``rank node socket`` lines.
    """

    nprocs: int
    ppn: int
    sockets_per_node: int = 2
    assignment: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self) -> None:
        if self.nprocs < 1:
            raise LayoutError(f"nprocs must be >= 1, got {self.nprocs}")
        if self.ppn < 1:
            raise LayoutError(f"ppn must be >= 1, got {self.ppn}")
        if self.sockets_per_node < 1:
            raise LayoutError(
                f"sockets_per_node must be >= 1, got {self.sockets_per_node}"
            )
        if self.assignment is None:
            if self.ppn % self.sockets_per_node:
                raise LayoutError(
                    "block assignment needs ppn divisible by sockets_per_node, "
                    f"got ppn={self.ppn}, sockets={self.sockets_per_node}"
                )
        else:
            if len(self.assignment) != self.nprocs:
                raise LayoutError(
                    f"assignment covers {len(self.assignment)} ranks, expected {self.nprocs}"
                )
            for rank, (node, socket) in enumerate(self.assignment):
                if node < 0 or socket < 0:
                    raise LayoutError(
                        f"rank {rank}: node and socket must be >= 0, got ({node}, {socket})"
                    )

    @classmethod
    def block(cls, nprocs: int, ppn: int, sockets_per_node: int = 2) -> RankLayout:
        return cls(nprocs=nprocs, ppn=ppn, sockets_per_node=sockets_per_node)

    @classmethod
    def from_assignment(cls, assignment: Iterable[tuple[int, int]]) -> RankLayout:
        """Layout from explicit (node, socket) pairs, one per rank.

        ppn is taken as the largest per-node population and sockets_per_node
        as the largest socket index plus one.
        """
        pairs = tuple((int(n), int(s)) for n, s in assignment)
        if not pairs:
            raise LayoutError("assignment is empty")
        population: dict[int, int] = {}
        for node, _ in pairs:
            population[node] = population.get(node, 0) + 1
        return cls(
            nprocs=len(pairs),
            ppn=max(population.values()),
            sockets_per_node=max(s for _, s in pairs) + 1,
            assignment=pairs,
        )

    @classmethod
    def from_file(cls, text: str) -> RankLayout:
        """Parse ``rank node socket`` lines; ranks must be dense from 0."""
        entries: dict[int, tuple[int, int]] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split()
            if len(fields) != 3:
                raise LayoutError(f"line {lineno}: expected 'rank node socket'")
            try:
                rank, node, socket = (int(f) for f in fields)
            except ValueError as exc:
                raise LayoutError(f"line {lineno}: {exc}") from exc
            if rank in entries:
                raise LayoutError(f"line {lineno}: duplicate rank {rank}")
            entries[rank] = (node, socket)
        if not entries:
            raise LayoutError("layout file has no entries")
        missing = set(range(len(entries))) - set(entries)
        if missing:
            raise LayoutError(f"ranks not dense, missing {sorted(missing)}")
        return cls.from_assignment(entries[r] for r in range(len(entries)))

    def _check(self, rank: int) -> None:
        if not 0 <= rank < self.nprocs:
            raise LayoutError(f"rank {rank} out of range for {self.nprocs} ranks")

    def node_of(self, rank: int) -> int:
        self._check(rank)
        if self.assignment is not None:
            return self.assignment[rank][0]
        return rank // self.ppn

    def socket_of(self, rank: int) -> int:
        self._check(rank)
        if self.assignment is not None:
            return self.assignment[rank][1]
        return (rank % self.ppn) // (self.ppn // self.sockets_per_node)

    @property
    def num_nodes(self) -> int:
        if self.assignment is not None:
            return max(node for node, _ in self.assignment) + 1
        return -(-self.nprocs // self.ppn)


def locality(src: int, dst: int, layout: RankLayout) -> Locality:
    """Classify a message by endpoint placement; symmetric in src and dst."""
    if layout.node_of(src) != layout.node_of(dst):
        return Locality.INTER_NODE
    if layout.socket_of(src) == layout.socket_of(dst):
        return Locality.INTRA_SOCKET
    return Locality.INTRA_NODE


def cube_side(num_geminis: int) -> int:
    """Smallest cube edge c with c**3 >= num_geminis."""
    if num_geminis < 1:
        raise ValueError(f"num_geminis must be >= 1, got {num_geminis}")
    c = max(1, round(num_geminis ** (1.0 / 3.0)))
    while c**3 < num_geminis:
        c += 1
    while c > 1 and (c - 1) ** 3 >= num_geminis:
        c -= 1
    return c


@dataclass(frozen=True)
class CubeTopology:
    """Perfect cube of routers approximating the allocated torus partition.

    Each router (Gemini) serves ``nodes_per_gemini`` nodes; routers sit on an
    integer grid of edge ``side`` with no wraparound inside the partition.
    """

    side: int
    nodes_per_gemini: int = 2

    def __post_init__(self) -> None:
        if self.side < 1:
            raise LayoutError(f"side must be >= 1, got {self.side}")
        if self.nodes_per_gemini < 1:
            raise LayoutError(
                f"nodes_per_gemini must be >= 1, got {self.nodes_per_gemini}"
            )

    @classmethod
    def from_geminis(cls, num_geminis: int, nodes_per_gemini: int = 2) -> CubeTopology:
        return cls(side=cube_side(num_geminis), nodes_per_gemini=nodes_per_gemini)

    @classmethod
    def from_layout(cls, layout: RankLayout, nodes_per_gemini: int = 2) -> CubeTopology:
        geminis = -(-layout.num_nodes // nodes_per_gemini)
        return cls.from_geminis(geminis, nodes_per_gemini)


def hops(a: Sequence[int], b: Sequence[int]) -> int:
    """Manhattan distance between two router coordinates (no wraparound)."""
    if len(a) != 3 or len(b) != 3:
        raise ValueError("coordinates must be (x, y, z) triples")
    return sum(abs(x - y) for x, y in zip(a, b))


def average_hops(topo: CubeTopology) -> float:
    """Mean Manhattan distance over all ordered router pairs of the cube.

    Self-pairs are included, which gives the closed form (c**2 - 1) / c for a
    cube of edge c; brute-force enumeration matches it exactly.
    """
    c = topo.side
    return (c * c - 1) / c
