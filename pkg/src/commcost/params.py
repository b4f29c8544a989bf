"""Machine parameter model for point-to-point communication cost prediction.

A :class:`MachineModel` holds one ``(alpha, rb, rn)`` cell per message
protocol and locality, the quadratic queue-search coefficient ``gamma``, the
per-link-byte contention penalty ``delta``, and the size thresholds that
select a protocol. Models are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from types import MappingProxyType
from typing import Mapping

from .errors import SchemaError

__all__ = [
    "Protocol",
    "Locality",
    "ProtocolThresholds",
    "ParamSet",
    "MachineModel",
    "CELLS",
    "cell_key",
    "classify_protocol",
    "load_model",
    "save_model",
    "default_document",
    "default_model",
]


class Protocol(Enum):
    """Message protocol chosen by size: envelope-only, buffered immediate
    send, or handshake-then-send."""

    SHORT = "short"
    EAGER = "eager"
    RENDEZVOUS = "rendezvous"


class Locality(Enum):
    """Relative placement of two ranks. INTRA_NODE means same node but
    different sockets; the three values are mutually exclusive."""

    INTRA_SOCKET = "intra_socket"
    INTRA_NODE = "intra_node"
    INTER_NODE = "inter_node"


# Canonical cell order used for serialization and error messages.
CELLS: tuple[tuple[Protocol, Locality], ...] = tuple(
    (p, loc) for p in Protocol for loc in Locality
)


def cell_key(protocol: Protocol, loc: Locality) -> str:
    return f"{protocol.value}.{loc.value}"


@dataclass(frozen=True)
class ProtocolThresholds:
    """Protocol size cutoffs in bytes.

    Sizes up to ``short_max`` are short, sizes up to ``eager_max`` are eager,
    anything larger is rendezvous. The defaults are configuration, not
    measured truth; predictions are reproducible under any declared cutoffs.
    """

    short_max: int = 128
    eager_max: int = 8192

    def __post_init__(self) -> None:
        if not 0 <= self.short_max < self.eager_max:
            raise SchemaError(
                "thresholds: need 0 <= short_max < eager_max, got "
                f"({self.short_max}, {self.eager_max})"
            )


def classify_protocol(size: int, thresholds: ProtocolThresholds) -> Protocol:
    """Protocol for a message of ``size`` bytes.

    Boundary sizes belong to the smaller protocol: ``size == short_max`` is
    short and ``size == eager_max`` is eager.
    """
    if size < 0:
        raise ValueError(f"message size must be >= 0, got {size}")
    if size <= thresholds.short_max:
        return Protocol.SHORT
    if size <= thresholds.eager_max:
        return Protocol.EAGER
    return Protocol.RENDEZVOUS


@dataclass(frozen=True)
class ParamSet:
    """One cost cell: startup latency ``alpha`` (seconds), pairwise rate
    ``rb`` (bytes/s), and node injection rate ``rn`` (bytes/s).

    ``rn`` is ``math.inf`` for cells that are never injection-limited, which
    keeps ``min(rn, ppn * rb)`` well defined without a sentinel value.
    """

    alpha: float
    rb: float
    rn: float = math.inf

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise SchemaError(f"alpha must be finite and >= 0, got {self.alpha}")
        if not (math.isfinite(self.rb) and self.rb > 0):
            raise SchemaError(f"rb must be finite and > 0, got {self.rb}")
        if math.isnan(self.rn) or self.rn <= 0:
            raise SchemaError(f"rn must be > 0 (inf allowed), got {self.rn}")


@dataclass(frozen=True)
class MachineModel:
    """Complete parameter set for one machine.

    ``params`` maps every (protocol, locality) pair to a :class:`ParamSet`.
    Intra-socket and intra-node cells never inject into the network, so their
    ``rn`` must be unbounded. ``queue_multiplier`` scales the quadratic queue
    charge used by pattern prediction (1.0 keeps the upper bound; 1/3 matches
    the typically observed maximum search depth).
    """

    params: Mapping[tuple[Protocol, Locality], ParamSet]
    gamma: float
    delta: float
    thresholds: ProtocolThresholds = ProtocolThresholds()
    queue_multiplier: float = 1.0

    def __post_init__(self) -> None:
        cells = dict(self.params)
        object.__setattr__(self, "params", MappingProxyType(cells))
        unknown = [k for k in cells if k not in CELLS]
        if unknown:
            raise SchemaError(f"unknown parameter cells: {unknown}")
        missing = [cell_key(p, loc) for (p, loc) in CELLS if (p, loc) not in cells]
        if missing:
            raise SchemaError("missing parameter cells: " + ", ".join(missing))
        for name in ("gamma", "delta", "queue_multiplier"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise SchemaError(f"{name} must be finite and >= 0, got {value}")
        for (p, loc), cell in cells.items():
            if loc is not Locality.INTER_NODE and math.isfinite(cell.rn):
                raise SchemaError(
                    f"{cell_key(p, loc)}: rn must be unbounded for on-node cells"
                )

    def cell(self, protocol: Protocol, loc: Locality) -> ParamSet:
        return self.params[(protocol, loc)]

    def cell_for(self, size: int, loc: Locality) -> ParamSet:
        """Cell selected by message size (via the thresholds) and locality."""
        return self.params[(classify_protocol(size, self.thresholds), loc)]


def _cell_to_doc(cell: ParamSet) -> dict:
    rn = "inf" if math.isinf(cell.rn) else cell.rn
    return {"alpha": cell.alpha, "rb": cell.rb, "rn": rn}


def save_model(model: MachineModel) -> str:
    """Serialize a model to its canonical parameter document.

    Keys appear in a fixed order and floats use their shortest exact
    representation, so the output is deterministic and round-trips through
    :func:`load_model` bit-exactly. Unbounded ``rn`` is written as the string
    token ``"inf"``.
    """
    doc = {
        "thresholds": {
            "short_max": model.thresholds.short_max,
            "eager_max": model.thresholds.eager_max,
        },
        "gamma": model.gamma,
        "delta": model.delta,
        "queue_multiplier": model.queue_multiplier,
        "params": {
            cell_key(p, loc): _cell_to_doc(model.params[(p, loc)])
            for (p, loc) in CELLS
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def _require(mapping: dict, key: str, context: str) -> object:
    if key not in mapping:
        raise SchemaError(f"missing key: {context}{key}")
    return mapping[key]


def _number(value: object, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"malformed number at {key}: {value!r}")
    if not math.isfinite(value):
        raise SchemaError(f"malformed number at {key}: {value!r}")
    return float(value)


def _integer(value: object, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"malformed integer at {key}: {value!r}")
    return value


def load_model(text: str) -> MachineModel:
    """Parse a parameter document.

    Documents that violate the schema (missing cell, negative parameter,
    malformed number, unknown key) are rejected with an error naming the
    offending key; values are never clamped.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not a valid parameter document: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("parameter document must be an object")

    known_top = {"thresholds", "gamma", "delta", "queue_multiplier", "params"}
    for key in doc:
        if key not in known_top:
            raise SchemaError(f"unknown key: {key}")

    thr_doc = _require(doc, "thresholds", "")
    if not isinstance(thr_doc, dict):
        raise SchemaError("thresholds must be an object")
    for key in thr_doc:
        if key not in ("short_max", "eager_max"):
            raise SchemaError(f"unknown key: thresholds.{key}")
    thresholds = ProtocolThresholds(
        short_max=_integer(_require(thr_doc, "short_max", "thresholds."), "thresholds.short_max"),
        eager_max=_integer(_require(thr_doc, "eager_max", "thresholds."), "thresholds.eager_max"),
    )

    gamma = _number(_require(doc, "gamma", ""), "gamma")
    delta = _number(_require(doc, "delta", ""), "delta")
    multiplier = _number(doc.get("queue_multiplier", 1.0), "queue_multiplier")

    params_doc = _require(doc, "params", "")
    if not isinstance(params_doc, dict):
        raise SchemaError("params must be an object")
    by_key = {cell_key(p, loc): (p, loc) for (p, loc) in CELLS}
    for key in params_doc:
        if key not in by_key:
            raise SchemaError(f"unknown key: params.{key}")

    cells: dict[tuple[Protocol, Locality], ParamSet] = {}
    for key, (p, loc) in by_key.items():
        if key not in params_doc:
            raise SchemaError(f"missing key: params.{key}")
        cell_doc = params_doc[key]
        if not isinstance(cell_doc, dict):
            raise SchemaError(f"params.{key} must be an object")
        for field_name in cell_doc:
            if field_name not in ("alpha", "rb", "rn"):
                raise SchemaError(f"unknown key: params.{key}.{field_name}")
        alpha = _number(_require(cell_doc, "alpha", f"params.{key}."), f"params.{key}.alpha")
        rb = _number(_require(cell_doc, "rb", f"params.{key}."), f"params.{key}.rb")
        rn_raw = _require(cell_doc, "rn", f"params.{key}.")
        if rn_raw == "inf":
            rn = math.inf
        else:
            rn = _number(rn_raw, f"params.{key}.rn")
        try:
            cells[(p, loc)] = ParamSet(alpha=alpha, rb=rb, rn=rn)
        except SchemaError as exc:
            raise SchemaError(f"params.{key}: {exc}") from exc

    if gamma < 0:
        raise SchemaError(f"gamma must be >= 0, got {gamma}")
    if delta < 0:
        raise SchemaError(f"delta must be >= 0, got {delta}")
    return MachineModel(
        params=cells,
        gamma=gamma,
        delta=delta,
        thresholds=thresholds,
        queue_multiplier=multiplier,
    )


@functools.lru_cache(maxsize=1)
def default_document() -> str:
    """The parameter document shipped with the package (Cray XE defaults)."""
    return resources.files("commcost").joinpath("data/default.json").read_text()


@functools.lru_cache(maxsize=1)
def default_model() -> MachineModel:
    return load_model(default_document())
