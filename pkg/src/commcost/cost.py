"""Pure cost kernels and their composition into per-pattern predictions.

The kernels price a single message (postal and max-rate forms), the queue
search for a burst of posted receives (quadratic bound), and network
contention on the shared links of a cube partition (linear in the bytes that
cross a link). ``predict_pattern`` composes them into a decomposed estimate
for one communication phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .errors import PatternError
from .params import Locality, MachineModel, ParamSet, classify_protocol
from .topology import CubeTopology, RankLayout, average_hops, locality

if TYPE_CHECKING:
    from .pattern import CommPattern

__all__ = [
    "MessageSpec",
    "CostBreakdown",
    "postal_cost",
    "max_rate_cost",
    "queue_search_cost",
    "contention_cost",
    "link_bytes",
    "message_cost",
    "predict_pattern",
]


def postal_cost(size: int, p: ParamSet) -> float:
    """Startup latency plus per-byte transport: alpha + size / rb."""
    if size < 0:
        raise ValueError(f"size must be >= 0, got {size}")
    return p.alpha + size / p.rb


def max_rate_cost(size: int, ppn: int, p: ParamSet) -> float:
    """alpha + ppn * size / min(rn, ppn * rb).

    When ``ppn * rb <= rn`` the node is not injection-limited and the cost is
    evaluated as ``alpha + size / rb``, so it reduces to :func:`postal_cost`
    bitwise rather than within rounding error.
    """
    if size < 0:
        raise ValueError(f"size must be >= 0, got {size}")
    if ppn < 1:
        raise ValueError(f"ppn must be >= 1, got {ppn}")
    if ppn * p.rb <= p.rn:
        return p.alpha + size / p.rb
    return p.alpha + (ppn * size) / p.rn


def queue_search_cost(n: int, gamma: float) -> float:
    """Quadratic queue-traversal bound gamma * n**2.

    A single coefficient covers every protocol and locality; stepping a queue
    entry costs the same wherever the message came from.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return gamma * n * n


def contention_cost(link_bytes: float, delta: float) -> float:
    """Per-byte waiting penalty delta * link_bytes.

    Applies to inter-node traffic only; callers pass 0 link bytes for phases
    that never enter the network.
    """
    if link_bytes < 0:
        raise ValueError(f"link_bytes must be >= 0, got {link_bytes}")
    return delta * link_bytes


def link_bytes(h: float, b: float, ppn: int) -> float:
    """Bytes estimated to cross a single link: 2 * h**3 * b * ppn.

    ``h`` is the average hop count of the partition, so ``h**3`` counts the
    routers within reach of a link, and ``2 * b * ppn`` is the average bytes
    a router's worth of processes sends.
    """
    if h < 0:
        raise ValueError(f"h must be >= 0, got {h}")
    if b < 0:
        raise ValueError(f"b must be >= 0, got {b}")
    if ppn < 1:
        raise ValueError(f"ppn must be >= 1, got {ppn}")
    return 2.0 * h**3 * b * ppn


@dataclass(frozen=True)
class MessageSpec:
    """A batch of identical messages: byte size, count, endpoint locality."""

    size: int
    count: int
    locality: Locality

    def __post_init__(self) -> None:
        if self.size < 0:
            raise ValueError(f"size must be >= 0, got {self.size}")
        if self.count < 0:
            raise ValueError(f"count must be >= 0, got {self.count}")


def message_cost(m: MessageSpec, ppn: int, model: MachineModel) -> float:
    """Max-rate cost of the batch; every message pays the full startup alpha.

    The cell is picked by classifying ``m.size`` against the model thresholds
    and combining with the locality. On-node cells carry unbounded ``rn`` and
    therefore reduce to the postal form.
    """
    cell = model.cell_for(m.size, m.locality)
    return m.count * max_rate_cost(m.size, ppn, cell)


@dataclass(frozen=True)
class CostBreakdown:
    """Predicted phase time split into transport, queue search, contention."""

    transport: float
    queue: float
    contention: float
    total: float = field(init=False)

    def __post_init__(self) -> None:
        for name in ("transport", "queue", "contention"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        object.__setattr__(
            self, "total", self.transport + self.queue + self.contention
        )


def predict_pattern(
    pattern: "CommPattern",
    layout: RankLayout,
    topo: CubeTopology,
    model: MachineModel,
) -> CostBreakdown:
    """Decomposed cost of one communication phase.

    The slowest process gates the phase: transport is the maximum over
    processes of the summed max-rate cost of everything that process
    receives, and the queue charge is ``queue_multiplier * gamma * n**2``
    for the largest per-process posted-receive count n. Contention charges
    ``delta`` per byte on the busiest link, with the per-process send volume
    averaged over every rank in the layout (processes that send nothing
    included). Patterns without inter-node messages pay no contention.
    """
    if pattern.nprocs > layout.nprocs:
        raise PatternError(
            f"pattern spans {pattern.nprocs} ranks but layout has {layout.nprocs}"
        )
    recv_time = [0.0] * layout.nprocs
    recv_count = [0] * layout.nprocs
    inter_node_sent = 0
    for src, dst, size in pattern.messages:
        loc = locality(src, dst, layout)
        cell = model.cell_for(size, loc)
        recv_time[dst] += max_rate_cost(size, layout.ppn, cell)
        recv_count[dst] += 1
        if loc is Locality.INTER_NODE:
            inter_node_sent += size
    transport = max(recv_time)
    queue = model.queue_multiplier * queue_search_cost(max(recv_count), model.gamma)
    b = inter_node_sent / layout.nprocs
    contention = contention_cost(
        link_bytes(average_hops(topo), b, layout.ppn), model.delta
    )
    return CostBreakdown(transport=transport, queue=queue, contention=contention)
