"""Communication patterns and the synthetic benchmark generator.

Patterns come from three sources: trace documents (one ``src dst size`` line
per message), row-partitioned sparse matrices (the gather phase of a sparse
matrix-vector product), and matrix pairs (the remote-row fetch phase of a
row-wise sparse matrix-matrix product). The module also builds high-volume
ping-pong schedules and model-implied timings for them, which is what the
parameter fitter is tested against.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .cost import link_bytes, max_rate_cost
from .errors import PatternError
from .fit import TimingSample
from .params import Locality, MachineModel, classify_protocol
from .queue_sim import worst_case_steps
from .topology import CubeTopology, RankLayout, average_hops, locality

__all__ = [
    "CommPattern",
    "SparseMatrixPartition",
    "PingPongSchedule",
    "block_row_starts",
    "spmv_pattern",
    "spgemm_pattern",
    "load_pattern",
    "load_matrix",
    "make_schedule",
    "synth_timings",
    "calibration_campaign",
]


@dataclass(frozen=True)
class CommPattern:
    """Point-to-point messages of one operation phase.

    Messages are (src, dst, size) triples, normalized to a stable order
    sorted by (dst, src); duplicates are kept as separate messages.
    """

    nprocs: int
    messages: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        msgs = tuple(
            sorted(
                ((int(s), int(d), int(z)) for s, d, z in self.messages),
                key=lambda m: (m[1], m[0]),
            )
        )
        object.__setattr__(self, "messages", msgs)
        if self.nprocs < 1:
            raise PatternError(f"nprocs must be >= 1, got {self.nprocs}")
        for src, dst, size in msgs:
            if not (0 <= src < self.nprocs and 0 <= dst < self.nprocs):
                raise PatternError(
                    f"message {src}->{dst} out of range for {self.nprocs} ranks"
                )
            if src == dst:
                raise PatternError(f"self message at rank {src}")
            if size < 1:
                raise PatternError(f"message size must be >= 1, got {size}")

    def recv_counts(self) -> list[int]:
        counts = [0] * self.nprocs
        for _, dst, _ in self.messages:
            counts[dst] += 1
        return counts

    def recv_bytes_by_locality(self, layout: RankLayout) -> list[dict[Locality, int]]:
        totals = [{loc: 0 for loc in Locality} for _ in range(self.nprocs)]
        for src, dst, size in self.messages:
            totals[dst][locality(src, dst, layout)] += size
        return totals

    def summary(self, layout: RankLayout) -> str:
        """Per-process receive counts and byte totals by locality."""
        counts = self.recv_counts()
        by_loc = self.recv_bytes_by_locality(layout)
        lines = [f"nprocs {self.nprocs}"]
        for rank in range(self.nprocs):
            parts = " ".join(
                f"{loc.value}_bytes {by_loc[rank][loc]}" for loc in Locality
            )
            lines.append(f"rank {rank}: recv_count {counts[rank]} {parts}")
        return "\n".join(lines) + "\n"

    def to_trace(self) -> str:
        lines = [f"nprocs {self.nprocs}"]
        lines += [f"{src} {dst} {size}" for src, dst, size in self.messages]
        return "\n".join(lines) + "\n"


def load_pattern(text: str) -> CommPattern:
    """Parse a trace document: header ``nprocs N``, then ``src dst size`` lines."""
    lines = text.splitlines()
    header_seen = False
    nprocs = 0
    messages: list[tuple[int, int, int]] = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if not header_seen:
            if len(fields) != 2 or fields[0] != "nprocs":
                raise PatternError(f"line {lineno}: expected header 'nprocs N'")
            try:
                nprocs = int(fields[1])
            except ValueError as exc:
                raise PatternError(f"line {lineno}: {exc}") from exc
            header_seen = True
            continue
        if len(fields) != 3:
            raise PatternError(f"line {lineno}: expected 'src dst size'")
        try:
            messages.append((int(fields[0]), int(fields[1]), int(fields[2])))
        except ValueError as exc:
            raise PatternError(f"line {lineno}: {exc}") from exc
    if not header_seen:
        raise PatternError("trace document has no 'nprocs N' header")
    return CommPattern(nprocs=nprocs, messages=tuple(messages))


def block_row_starts(rows: int, nprocs: int) -> tuple[int, ...]:
    """Near-equal contiguous blocks; the remainder goes to the first ranks."""
    if nprocs < 1:
        raise PatternError(f"nprocs must be >= 1, got {nprocs}")
    base, rem = divmod(rows, nprocs)
    starts = [0]
    for p in range(nprocs):
        starts.append(starts[-1] + base + (1 if p < rem else 0))
    return tuple(starts)


@dataclass(frozen=True)
class SparseMatrixPartition:
    """Sparse matrix with contiguous row-block ownership.

    ``row_starts`` has one entry per rank plus a terminator; rank p owns rows
    ``[row_starts[p], row_starts[p + 1])``. Payload sizes: vector values cost
    ``bytes_per_value`` each, matrix nonzeros cost value plus column index.
    """

    rows: int
    cols: int
    entries: tuple[tuple[int, int, float], ...]
    row_starts: tuple[int, ...]
    bytes_per_value: int = 8
    bytes_per_index: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "row_starts", tuple(self.row_starts))
        if self.rows < 1 or self.cols < 1:
            raise PatternError(f"matrix must be nonempty, got {self.rows}x{self.cols}")
        rs = self.row_starts
        if len(rs) < 2 or rs[0] != 0 or rs[-1] != self.rows:
            raise PatternError(f"row_starts must run from 0 to rows, got {rs}")
        if any(a > b for a, b in zip(rs, rs[1:])):
            raise PatternError(f"row_starts must be nondecreasing, got {rs}")
        if self.bytes_per_value < 1 or self.bytes_per_index < 1:
            raise PatternError("payload byte sizes must be >= 1")
        for r, c, _ in self.entries:
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise PatternError(f"nonzero ({r}, {c}) out of range")

    @property
    def nprocs(self) -> int:
        return len(self.row_starts) - 1

    def owner_of_row(self, row: int) -> int:
        if not 0 <= row < self.rows:
            raise PatternError(f"row {row} out of range")
        return bisect_right(self.row_starts, row) - 1

    @classmethod
    def from_entries(
        cls,
        rows: int,
        cols: int,
        entries: Iterable[tuple[int, int, float]],
        nprocs: int,
        *,
        bytes_per_value: int = 8,
        bytes_per_index: int = 4,
    ) -> SparseMatrixPartition:
        return cls(
            rows=rows,
            cols=cols,
            entries=tuple(entries),
            row_starts=block_row_starts(rows, nprocs),
            bytes_per_value=bytes_per_value,
            bytes_per_index=bytes_per_index,
        )


def _col_owner(m: SparseMatrixPartition):
    # The multiplicand vector is partitioned conformally with the rows when
    # the matrix is square, by even blocks of the column space otherwise.
    starts = m.row_starts if m.rows == m.cols else block_row_starts(m.cols, m.nprocs)
    return lambda col: bisect_right(starts, col) - 1


def spmv_pattern(m: SparseMatrixPartition) -> CommPattern:
    """Vector-gather messages of a sparse matrix-vector product.

    Each process needs every distinct column referenced by its rows; the
    owner of those vector entries sends one message of bytes_per_value per
    distinct column. Columns owned locally cost nothing.
    """
    col_owner = _col_owner(m)
    needed: dict[tuple[int, int], set[int]] = {}
    for r, c, _ in m.entries:
        p = m.owner_of_row(r)
        q = col_owner(c)
        if q != p:
            needed.setdefault((q, p), set()).add(c)
    messages = [
        (q, p, m.bytes_per_value * len(cols)) for (q, p), cols in needed.items()
    ]
    return CommPattern(nprocs=m.nprocs, messages=tuple(messages))


def spgemm_pattern(
    a: SparseMatrixPartition, b: SparseMatrixPartition
) -> CommPattern:
    """Remote-row fetches of a row-wise sparse matrix-matrix product.

    For every nonzero column k of its A rows a process needs row k of B; each
    remote row is fetched from its owner once, and a fetched row of nnz
    entries costs nnz * (bytes_per_value + bytes_per_index). Rows of B with
    no entries contribute no bytes, so a fetch set of only empty rows sends
    no message. Communication of the product itself is not modeled.
    """
    if a.cols != b.rows:
        raise PatternError(
            f"dimension mismatch: a is {a.rows}x{a.cols}, b is {b.rows}x{b.cols}"
        )
    if a.nprocs != b.nprocs:
        raise PatternError(
            f"process counts differ: {a.nprocs} vs {b.nprocs}"
        )
    row_nnz = Counter(r for r, _, _ in b.entries)
    payload = b.bytes_per_value + b.bytes_per_index
    fetched: dict[tuple[int, int], set[int]] = {}
    for r, c, _ in a.entries:
        p = a.owner_of_row(r)
        q = b.owner_of_row(c)
        if q != p:
            fetched.setdefault((q, p), set()).add(c)
    messages = []
    for (q, p), rows in fetched.items():
        size = payload * sum(row_nnz[k] for k in rows)
        if size > 0:
            messages.append((q, p, size))
    return CommPattern(nprocs=a.nprocs, messages=tuple(messages))


_MM_FIELDS = ("real", "integer", "pattern")
_MM_SYMMETRIES = ("general", "symmetric")


def load_matrix(
    text: str,
    nprocs: int,
    *,
    bytes_per_value: int = 8,
    bytes_per_index: int = 4,
) -> SparseMatrixPartition:
    """Parse a Matrix Market coordinate document into a row-block partition.

    Supports real, integer, and pattern fields (pattern entries get value
    1.0) with general or symmetric qualifiers; symmetric storage is expanded
    by mirroring off-diagonal entries. Array format and other qualifiers are
    rejected.
    """
    lines = text.splitlines()
    if not lines or not lines[0].startswith("%%MatrixMarket"):
        raise PatternError("line 1: missing %%MatrixMarket header")
    header = lines[0].split()
    if len(header) != 5 or header[1].lower() != "matrix":
        raise PatternError("line 1: expected '%%MatrixMarket matrix format field symmetry'")
    fmt, field_kind, symmetry = (h.lower() for h in header[2:])
    if fmt != "coordinate":
        raise PatternError(f"line 1: only coordinate format is supported, got {fmt}")
    if field_kind not in _MM_FIELDS:
        raise PatternError(f"line 1: unsupported field {field_kind}")
    if symmetry not in _MM_SYMMETRIES:
        raise PatternError(f"line 1: unsupported symmetry {symmetry}")

    rows = cols = nnz = -1
    entries: list[tuple[int, int, float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if not stripped or stripped.startswith("%"):
            continue
        fields = stripped.split()
        if rows < 0:
            if len(fields) != 3:
                raise PatternError(f"line {lineno}: expected 'rows cols nnz'")
            try:
                rows, cols, nnz = (int(f) for f in fields)
            except ValueError as exc:
                raise PatternError(f"line {lineno}: {exc}") from exc
            continue
        want = 2 if field_kind == "pattern" else 3
        if len(fields) != want:
            raise PatternError(f"line {lineno}: expected {want} fields, got {len(fields)}")
        try:
            i, j = int(fields[0]) - 1, int(fields[1]) - 1
            value = 1.0 if field_kind == "pattern" else float(fields[2])
        except ValueError as exc:
            raise PatternError(f"line {lineno}: {exc}") from exc
        if not (0 <= i < rows and 0 <= j < cols):
            raise PatternError(f"line {lineno}: entry ({i + 1}, {j + 1}) out of range")
        entries.append((i, j, value))

    if rows < 0:
        raise PatternError("document has no size line")
    if len(entries) != nnz:
        raise PatternError(f"expected {nnz} entries, found {len(entries)}")
    if symmetry == "symmetric":
        if rows != cols:
            raise PatternError("symmetric matrices must be square")
        entries += [(j, i, v) for i, j, v in entries if i != j]
    return SparseMatrixPartition.from_entries(
        rows,
        cols,
        entries,
        nprocs,
        bytes_per_value=bytes_per_value,
        bytes_per_index=bytes_per_index,
    )


@dataclass(frozen=True)
class PingPongSchedule:
    """High-volume ping-pong: every pair exchanges n size-byte messages per
    direction, the lower rank sending its burst first and then receiving.

    ``ordering`` is the receiver's tag posting order relative to arrival:
    "in" matches every arrival at the queue head, "reversed" forces a full
    queue walk per match.
    """

    pairs: tuple[tuple[int, int], ...]
    n: int
    size: int
    ordering: str = "in"

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "pairs", tuple((int(a), int(b)) for a, b in self.pairs)
        )
        if not self.pairs:
            raise PatternError("schedule needs at least one rank pair")
        if self.n < 1:
            raise PatternError(f"n must be >= 1, got {self.n}")
        if self.size < 1:
            raise PatternError(f"size must be >= 1, got {self.size}")
        if self.ordering not in ("in", "reversed"):
            raise PatternError(f"ordering must be 'in' or 'reversed', got {self.ordering!r}")
        for a, b in self.pairs:
            if a == b:
                raise PatternError(f"pair ({a}, {b}) must use distinct ranks")


def make_schedule(
    pair: tuple[int, int], n: int, size: int, ordering: str = "in"
) -> PingPongSchedule:
    return PingPongSchedule(pairs=(tuple(pair),), n=n, size=size, ordering=ordering)


def _queue_steps(n: int, ordering: str) -> int:
    # Closed forms for the two tag orderings; pinned against simulate_queue
    # by the queue tests.
    return worst_case_steps(n) if ordering == "reversed" else n


def _active_pairs_per_node(
    schedule: PingPongSchedule, layout: RankLayout
) -> int:
    per_node: Counter[int] = Counter()
    for a, b in schedule.pairs:
        for node in {layout.node_of(a), layout.node_of(b)}:
            per_node[node] += 1
    return max(per_node.values())


def synth_timings(
    schedule: PingPongSchedule,
    model: MachineModel,
    layout: RankLayout,
    topo: CubeTopology | None = None,
    noise: float = 0.0,
    seed: int | np.random.Generator = 0,
) -> list[TimingSample]:
    """Model-implied timing samples, one per pair of the schedule.

    Each sample charges n max-rate messages at the schedule's active pair
    count per node, gamma times the queue entries examined under the tag
    ordering, and the contention penalty when the pair crosses nodes (zero
    automatically on single-router layouts, where the hop count is zero).
    Samples are perturbed by a multiplicative lognormal factor exp(noise * Z)
    and are deterministic for a given seed.
    """
    if noise < 0:
        raise PatternError(f"noise must be >= 0, got {noise}")
    topo = topo if topo is not None else CubeTopology.from_layout(layout)
    rng = np.random.default_rng(seed)
    ppn_active = _active_pairs_per_node(schedule, layout)
    qsteps = _queue_steps(schedule.n, schedule.ordering)
    localities = [locality(a, b, layout) for a, b in schedule.pairs]
    inter_pairs = sum(1 for loc in localities if loc is Locality.INTER_NODE)
    # Average bytes each process sends into the network during the phase.
    b = 2.0 * schedule.n * schedule.size * inter_pairs / layout.nprocs
    contention = model.delta * link_bytes(average_hops(topo), b, layout.ppn)
    factors = (
        rng.lognormal(0.0, noise, size=len(schedule.pairs))
        if noise > 0
        else np.ones(len(schedule.pairs))
    )
    samples = []
    for loc, factor in zip(localities, factors):
        cell = model.cell_for(schedule.size, loc)
        transport = schedule.n * max_rate_cost(schedule.size, ppn_active, cell)
        clean = transport + model.gamma * qsteps
        if loc is Locality.INTER_NODE:
            clean += contention
        samples.append(
            TimingSample(
                locality=loc,
                ppn_active=ppn_active,
                size=schedule.size,
                n=schedule.n,
                ordering=schedule.ordering,
                measured=clean * float(factor),
            )
        )
    return samples


def _size_grids(model: MachineModel) -> dict[str, list[int]]:
    sm, em = model.thresholds.short_max, model.thresholds.eager_max
    short = sorted({max(1, sm // 8), max(1, sm // 4), max(1, sm // 2), sm})
    eager = sorted({2 * sm, em // 8, em // 2, em})
    rend = [2 * em, 8 * em, 32 * em, 128 * em]
    if len(short) < 3 or len(eager) < 3 or eager[0] <= sm:
        raise PatternError("thresholds leave too little room for calibration sizes")
    return {"short": short, "eager": eager, "rend": rend}


def calibration_campaign(
    model: MachineModel,
    *,
    ppn: int = 16,
    sockets_per_node: int = 2,
    geminis: int = 4,
    repeats: int = 1,
    noise: float = 0.0,
    seed: int = 0,
) -> list[TimingSample]:
    """Synthetic benchmark sweep covering every input the fitter needs.

    Emits, per repeat: single-message size sweeps for all nine cells, an
    inter-node rendezvous sweep over active pair counts, in-order and
    reversed high-volume pair sweeps, and an in-order sweep across a line of
    ``geminis`` routers with every process communicating. The (n, ppn)
    signature of each block matches what ``fit_machine_model`` routes on.
    """
    if ppn < 4 or ppn % sockets_per_node or ppn // sockets_per_node < 2:
        raise PatternError(f"campaign needs ppn >= 4 with room for two sockets, got {ppn}")
    rng = np.random.default_rng(seed)
    grids = _size_grids(model)

    one_node = RankLayout.block(ppn, ppn, sockets_per_node)
    two_node = RankLayout.block(2 * ppn, ppn, sockets_per_node)
    line_nodes = 2 * geminis
    line = RankLayout.block(line_nodes * ppn, ppn, sockets_per_node)
    line_topo = CubeTopology.from_geminis(geminis)
    line_pairs = tuple(
        (i, i + line_nodes * ppn // 2) for i in range(line_nodes * ppn // 2)
    )

    cell_pairs = {
        Locality.INTRA_SOCKET: (one_node, (0, 1)),
        Locality.INTRA_NODE: (one_node, (0, ppn // sockets_per_node)),
        Locality.INTER_NODE: (two_node, (0, ppn)),
    }
    ppn_sweep = [k for k in (2, 4, 8, 16) if k <= ppn]

    samples: list[TimingSample] = []
    for _ in range(repeats):
        for loc, (layout, pair) in cell_pairs.items():
            for sizes in grids.values():
                for size in sizes:
                    samples += synth_timings(
                        make_schedule(pair, 1, size), model, layout,
                        noise=noise, seed=rng,
                    )
        for k in ppn_sweep:
            pairs = tuple((i, ppn + i) for i in range(k))
            for size in grids["rend"][1:]:
                samples += synth_timings(
                    PingPongSchedule(pairs, 1, size), model, two_node,
                    noise=noise, seed=rng,
                )
        for n in (16, 64, 256, 1024):
            for ordering in ("in", "reversed"):
                samples += synth_timings(
                    make_schedule((0, 1), n, grids["eager"][1], ordering),
                    model, one_node, noise=noise, seed=rng,
                )
        for n in (2, 4, 16):
            for size in grids["rend"][2:]:
                samples += synth_timings(
                    PingPongSchedule(line_pairs, n, size), model, line,
                    topo=line_topo, noise=noise, seed=rng,
                )
    return samples
