"""Least-squares estimation of machine parameters from timing samples.

A calibration sweep encodes which benchmark produced a sample in its
``(n, ppn)`` signature, and :func:`fit_machine_model` routes on it:

  ====================  ==============================================
  n == 1, ppn == 1      single-message size sweeps (alpha, rb per cell)
  n == 1, ppn > 1       inter-node rendezvous injection sweep (rn)
  n > 1,  ppn == 1      high-volume pair sweeps, reversed order (gamma)
  n > 1,  ppn > 1       inter-node multi-router contention sweep (delta)
  ====================  ==============================================

A single-message measurement already contains one queue-search step, so the
raw fitted intercept of a cell equals ``alpha + gamma``. The pipeline
therefore regresses gamma against the queue steps in excess of that one-per-
message baseline (``n(n+1)/2 - n`` for reversed order, zero for in-order) and
subtracts the fitted gamma from every intercept at the end. With noise-free
synthetic samples this recovers each generating parameter exactly.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cost import link_bytes, max_rate_cost
from .errors import FitError
from .params import (
    CELLS,
    Locality,
    MachineModel,
    ParamSet,
    Protocol,
    ProtocolThresholds,
    cell_key,
    classify_protocol,
)
from .queue_sim import worst_case_steps
from .topology import CubeTopology, average_hops

__all__ = [
    "ORDERINGS",
    "TimingSample",
    "FitResult",
    "fit_postal",
    "fit_injection",
    "fit_gamma",
    "fit_delta",
    "fit_machine_model",
    "samples_to_csv",
    "samples_from_csv",
    "CSV_HEADER",
]

ORDERINGS = ("in", "reversed")

CSV_HEADER = "locality,ppn,size,n,ordering,seconds"


@dataclass(frozen=True)
class TimingSample:
    """One benchmark observation.

    ``ppn_active`` is the number of concurrently communicating pairs per
    node during the measurement, the quantity the max-rate form divides
    injection bandwidth by.
    """

    locality: Locality
    ppn_active: int
    size: int
    n: int
    ordering: str
    measured: float

    def __post_init__(self) -> None:
        if self.ppn_active < 1:
            raise FitError(f"ppn_active must be >= 1, got {self.ppn_active}")
        if self.size < 0:
            raise FitError(f"size must be >= 0, got {self.size}")
        if self.n < 1:
            raise FitError(f"n must be >= 1, got {self.n}")
        if self.ordering not in ORDERINGS:
            raise FitError(f"ordering must be one of {ORDERINGS}, got {self.ordering!r}")
        if not (math.isfinite(self.measured) and self.measured > 0):
            raise FitError(f"measured time must be > 0, got {self.measured}")


def samples_to_csv(samples: Iterable[TimingSample]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for s in samples:
        writer.writerow(
            [s.locality.value, s.ppn_active, s.size, s.n, s.ordering, repr(s.measured)]
        )
    return out.getvalue()


def samples_from_csv(text: str) -> list[TimingSample]:
    reader = csv.reader(io.StringIO(text))
    rows = [(i, row) for i, row in enumerate(reader, start=1) if row]
    if not rows or [f.strip() for f in rows[0][1]] != CSV_HEADER.split(","):
        raise FitError(f"first line must be the header '{CSV_HEADER}'")
    samples = []
    for lineno, row in rows[1:]:
        if len(row) != 6:
            raise FitError(f"line {lineno}: expected 6 fields, got {len(row)}")
        try:
            samples.append(
                TimingSample(
                    locality=Locality(row[0].strip()),
                    ppn_active=int(row[1]),
                    size=int(row[2]),
                    n=int(row[3]),
                    ordering=row[4].strip(),
                    measured=float(row[5]),
                )
            )
        except (ValueError, FitError) as exc:
            raise FitError(f"line {lineno}: {exc}") from exc
    return samples


def _weights(samples: Sequence[TimingSample], relative: bool) -> np.ndarray:
    if relative:
        return 1.0 / np.array([s.measured for s in samples])
    return np.ones(len(samples))


def fit_postal(
    samples: Sequence[TimingSample], *, relative: bool = False
) -> tuple[float, float]:
    """Least squares of measured = alpha + size / rb over one cell's samples.

    Expects single-message, single-pair samples. A negative intercept is
    clamped by refitting the slope through the origin, never silently.
    """
    if len(samples) < 3:
        raise FitError(f"need at least 3 samples, got {len(samples)}")
    for s in samples:
        if s.n != 1 or s.ppn_active != 1:
            raise FitError("postal fit expects samples with n=1 and ppn=1")
    sizes = np.array([s.size for s in samples], dtype=float)
    times = np.array([s.measured for s in samples])
    if np.unique(sizes).size < 2:
        raise FitError("all sample sizes are equal (rank-deficient)")
    w = _weights(samples, relative)
    design = np.column_stack([w, w * sizes])
    coef, *_ = np.linalg.lstsq(design, w * times, rcond=None)
    alpha, beta = float(coef[0]), float(coef[1])
    if alpha < 0:
        alpha = 0.0
        beta = float(np.dot(w * sizes, w * times) / np.dot(w * sizes, w * sizes))
    if beta <= 0:
        raise FitError("fitted per-byte cost is not positive")
    return alpha, 1.0 / beta


def fit_injection(
    samples: Sequence[TimingSample],
    alpha: float,
    rb: float,
    *,
    relative: bool = False,
    max_iter: int = 10,
) -> float:
    """Injection bandwidth rn from an inter-node ppn sweep.

    Solves measured - alpha = ppn * size / rn over the samples whose
    ``ppn * rb`` exceeds the current rn estimate, iterating until the min()
    branch assignment is self-consistent. Starts from the samples with
    ppn >= 4, where injection typically becomes the bottleneck.
    """
    ppn = np.array([s.ppn_active for s in samples], dtype=float)
    if not (ppn >= 4).any():
        raise FitError("no samples with ppn >= 4; injection not observable")
    sizes = np.array([s.size for s in samples], dtype=float)
    resid = np.array([s.measured for s in samples]) - alpha
    x = ppn * sizes
    w = _weights(samples, relative)
    selected = ppn >= 4
    for _ in range(max_iter):
        slope = float(
            np.dot(w[selected] * x[selected], w[selected] * resid[selected])
            / np.dot(w[selected] * x[selected], w[selected] * x[selected])
        )
        if slope <= 0:
            raise FitError("no injection-bandwidth signal in the selected samples")
        rn = 1.0 / slope
        regime = ppn * rb > rn
        if not regime.any():
            raise FitError(
                "no samples fall in the injection-limited regime; rn unbounded?"
            )
        if (regime == selected).all():
            return rn
        selected = regime
    raise FitError(f"injection regime assignment did not converge in {max_iter} iterations")


def _transport(
    sample: TimingSample,
    cells: Mapping[tuple[Protocol, Locality], ParamSet],
    thresholds: ProtocolThresholds,
) -> float:
    key = (classify_protocol(sample.size, thresholds), sample.locality)
    if key not in cells:
        raise FitError(f"no fitted cell for {cell_key(*key)}")
    return sample.n * max_rate_cost(sample.size, sample.ppn_active, cells[key])


def _excess_steps(sample: TimingSample) -> int:
    """Queue steps beyond the one-per-message baseline absorbed by alpha."""
    if sample.ordering == "reversed":
        return worst_case_steps(sample.n) - sample.n
    return 0


def fit_gamma(
    samples: Sequence[TimingSample],
    cells: Mapping[tuple[Protocol, Locality], ParamSet],
    thresholds: ProtocolThresholds,
    *,
    relative: bool = False,
) -> float:
    """Queue-step cost gamma from high-volume samples.

    Regresses the residual over the fitted transport against the excess queue
    steps of each sample's ordering. In-order samples contribute no excess,
    so reversed-order samples at two or more message counts are required to
    identify the quadratic term; without them gamma is reported as 0.
    """
    reversed_samples = [s for s in samples if s.ordering == "reversed"]
    if not reversed_samples:
        warnings.warn("no reversed-order samples; queue cost not identifiable, gamma=0")
        return 0.0
    if len({s.n for s in reversed_samples}) < 2:
        raise FitError("need at least two distinct message counts (rank-deficient)")
    resid = np.array(
        [s.measured - _transport(s, cells, thresholds) for s in samples]
    )
    x = np.array([_excess_steps(s) for s in samples], dtype=float)
    w = _weights(samples, relative)
    mask = x > 0
    if (resid[mask] <= 0).all():
        warnings.warn("transport explains all high-volume samples; gamma=0")
        return 0.0
    gamma = float(
        np.dot(w[mask] * x[mask], w[mask] * resid[mask])
        / np.dot(w[mask] * x[mask], w[mask] * x[mask])
    )
    if gamma < 0:
        warnings.warn(f"queue fit produced {gamma}; clamping gamma to 0")
        return 0.0
    return gamma


def fit_delta(
    samples: Sequence[TimingSample],
    cells: Mapping[tuple[Protocol, Locality], ParamSet],
    thresholds: ProtocolThresholds,
    gamma: float,
    topo: CubeTopology,
    *,
    relative: bool = False,
) -> float:
    """Per-link-byte contention penalty from a multi-router sweep.

    Each inter-node sample is labeled with its link-byte load
    ``link_bytes(h, n * size, ppn)``, where h comes from the cube topology
    and ``n * size`` is the bytes every process sends in the scenario (the
    sweep keeps all processes active). The residual after transport and the
    excess queue charge is regressed against that label.
    """
    h = average_hops(topo)
    ells = np.array(
        [
            link_bytes(h, float(s.n) * s.size, s.ppn_active)
            if s.locality is Locality.INTER_NODE
            else 0.0
            for s in samples
        ]
    )
    if not (ells > 0).any():
        raise FitError("all link-byte labels are zero; contention not observable")
    resid = np.array(
        [
            s.measured - _transport(s, cells, thresholds) - gamma * _excess_steps(s)
            for s in samples
        ]
    )
    w = _weights(samples, relative)
    mask = ells > 0
    delta = float(
        np.dot(w[mask] * ells[mask], w[mask] * resid[mask])
        / np.dot(w[mask] * ells[mask], w[mask] * ells[mask])
    )
    if delta < 0:
        warnings.warn(f"contention fit produced {delta}; clamping delta to 0")
        return 0.0
    return delta


@dataclass
class FitResult:
    """Fitted model fragment plus per-cell diagnostics.

    Only cells that received at least three single-message samples are
    fitted; ``to_model`` fills the rest from a base model.
    """

    cells: dict[tuple[Protocol, Locality], ParamSet]
    gamma: float | None
    delta: float | None
    rms: dict[tuple[Protocol, Locality], float] = field(default_factory=dict)
    counts: dict[tuple[Protocol, Locality], int] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    thresholds: ProtocolThresholds = ProtocolThresholds()

    def to_model(self, base: MachineModel | None = None) -> MachineModel:
        params: dict[tuple[Protocol, Locality], ParamSet] = {}
        missing = []
        for cell in CELLS:
            if cell in self.cells:
                params[cell] = self.cells[cell]
            elif base is not None:
                params[cell] = base.params[cell]
            else:
                missing.append(cell_key(*cell))
        if missing:
            raise FitError(
                "cells not fitted and no base model given: " + ", ".join(missing)
            )
        gamma = self.gamma if self.gamma is not None else (base.gamma if base else 0.0)
        delta = self.delta if self.delta is not None else (base.delta if base else 0.0)
        return MachineModel(
            params=params,
            gamma=gamma,
            delta=delta,
            thresholds=self.thresholds,
            queue_multiplier=base.queue_multiplier if base else 1.0,
        )


def fit_machine_model(
    samples: Sequence[TimingSample],
    *,
    thresholds: ProtocolThresholds | None = None,
    topo: CubeTopology | None = None,
    relative: bool = False,
) -> FitResult:
    """Run the full calibration pipeline over a mixed sample set.

    Samples are routed by their (n, ppn) signature as described in the module
    docstring: per-cell postal fits first, then the injection sweep for the
    inter-node rendezvous cell, then gamma from the high-volume residuals,
    then delta from the contention residuals (``topo`` supplies the hop
    count), and finally the per-message queue step is subtracted from every
    intercept. Stages without usable samples are skipped with a note.
    """
    thresholds = thresholds or ProtocolThresholds()
    notes: list[str] = []

    postal: dict[tuple[Protocol, Locality], list[TimingSample]] = {}
    injection: list[TimingSample] = []
    volume: list[TimingSample] = []
    contention: list[TimingSample] = []
    for s in samples:
        protocol = classify_protocol(s.size, thresholds)
        if s.n == 1 and s.ppn_active == 1:
            postal.setdefault((protocol, s.locality), []).append(s)
        elif s.n == 1:
            if s.locality is Locality.INTER_NODE and protocol is Protocol.RENDEZVOUS:
                injection.append(s)
            else:
                notes.append(f"ignored {cell_key(protocol, s.locality)} ppn sweep")
        elif s.ppn_active == 1:
            volume.append(s)
        elif s.locality is Locality.INTER_NODE:
            contention.append(s)
        else:
            notes.append("ignored on-node high-volume multi-pair samples")

    cells: dict[tuple[Protocol, Locality], ParamSet] = {}
    rms: dict[tuple[Protocol, Locality], float] = {}
    counts: dict[tuple[Protocol, Locality], int] = {}
    for cell, rows in sorted(postal.items(), key=lambda kv: cell_key(*kv[0])):
        counts[cell] = len(rows)
        if len(rows) < 3:
            notes.append(f"{cell_key(*cell)}: only {len(rows)} samples, not fitted")
            continue
        alpha, rb = fit_postal(rows, relative=relative)
        cells[cell] = ParamSet(alpha=alpha, rb=rb)
        predicted = np.array([alpha + s.size / rb for s in rows])
        measured = np.array([s.measured for s in rows])
        rms[cell] = float(np.sqrt(np.mean((measured - predicted) ** 2)))

    rend_inter = (Protocol.RENDEZVOUS, Locality.INTER_NODE)
    if injection and rend_inter in cells:
        base_cell = cells[rend_inter]
        try:
            rn = fit_injection(
                injection, base_cell.alpha, base_cell.rb, relative=relative
            )
            cells[rend_inter] = ParamSet(base_cell.alpha, base_cell.rb, rn)
        except FitError as exc:
            notes.append(f"injection fit skipped: {exc}")

    gamma: float | None = None
    if volume:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            gamma = fit_gamma(volume, cells, thresholds, relative=relative)
    else:
        notes.append("no high-volume samples; gamma not fitted")

    delta: float | None = None
    if contention:
        if topo is None:
            notes.append("contention samples present but no topology given")
        else:
            delta = fit_delta(
                contention, cells, thresholds, gamma or 0.0, topo, relative=relative
            )
    else:
        notes.append("no contention samples; delta not fitted")

    if gamma:
        # Single-message intercepts include one queue step; charge it via gamma.
        for cell, ps in cells.items():
            alpha = ps.alpha - gamma
            if alpha < 0:
                notes.append(f"{cell_key(*cell)}: alpha clamped to 0 after queue debias")
                alpha = 0.0
            cells[cell] = ParamSet(alpha, ps.rb, ps.rn)

    return FitResult(
        cells=cells,
        gamma=gamma,
        delta=delta,
        rms=rms,
        counts=counts,
        notes=notes,
        thresholds=thresholds,
    )
