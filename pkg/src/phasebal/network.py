"""Immutable data model of a radial three-phase four-wire feeder.

A feeder is a tree of nodes rooted at the source bus, connected by
four-conductor line segments (phases A, B, C plus an explicit neutral).
Single-phase or balanced three-phase devices (loads, distributed generation,
EV chargers, storage converters) hang off the nodes.

Conventions:
- Loads and EVs consume with P > 0; DG injects with P < 0.
- Powers are kVA (complex), impedances Ohm/km, lengths km, voltages V.
- The neutral is solidly grounded at the source node only.
"""

from __future__ import annotations

import cmath
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

from .errors import (
    CyclicTopology,
    DisconnectedNode,
    NonPositiveLength,
    SignConventionViolation,
    UnknownNode,
)


class Phase(str, Enum):
    """Phase label with total ordering A < B < C for deterministic iteration."""

    A = "A"
    B = "B"
    C = "C"

    def __lt__(self, other: object) -> bool:
        if isinstance(other, Phase):
            return self.value < other.value
        return NotImplemented


PHASES: tuple[Phase, Phase, Phase] = (Phase.A, Phase.B, Phase.C)

NEUTRAL = "N"
#: Conductor keys in solver order: three phases then the neutral.
CONDUCTORS: tuple[str, str, str, str] = ("A", "B", "C", "N")

#: Typical LV cable series impedance, Ohm/km.
DEFAULT_Z_PHASE_PER_KM = 0.32 + 0.08j
DEFAULT_Z_NEUTRAL_PER_KM = 0.32 + 0.08j

DEFAULT_V_BASE_LN = 230.0
DEFAULT_S_BASE_KVA = 100.0


class DeviceKind(str, Enum):
    LOAD = "load"
    DG = "dg"
    EV = "ev"
    STORAGE = "storage"


def _require_finite(value: complex, what: str) -> None:
    if not (cmath.isfinite(value)):
        raise ValueError(f"{what} must be finite, got {value!r}")


@dataclass(frozen=True)
class LineSegment:
    """Four-conductor series element between two nodes.

    ``z_mutual_per_km`` couples every conductor pair (phase-phase and
    phase-neutral alike); it defaults to zero, which makes the per-conductor
    loss attribution |I|^2 R exact.
    """

    from_node: str
    to_node: str
    length_km: float
    z_phase_per_km: complex = DEFAULT_Z_PHASE_PER_KM
    z_neutral_per_km: complex = DEFAULT_Z_NEUTRAL_PER_KM
    z_mutual_per_km: complex = 0j

    def __post_init__(self) -> None:
        if self.from_node == self.to_node:
            raise ValueError(f"segment endpoints must differ, got {self.from_node!r} twice")
        if not self.length_km > 0:
            raise NonPositiveLength(self.from_node, self.to_node, self.length_km)
        for name, z in (
            ("z_phase_per_km", self.z_phase_per_km),
            ("z_neutral_per_km", self.z_neutral_per_km),
            ("z_mutual_per_km", self.z_mutual_per_km),
        ):
            _require_finite(z, f"segment {self.from_node}->{self.to_node} {name}")
        if self.z_phase_per_km.real < 0 or self.z_neutral_per_km.real < 0:
            raise ValueError(
                f"segment {self.from_node}->{self.to_node}: conductor resistance must be >= 0"
            )

    def reversed(self) -> "LineSegment":
        return replace(self, from_node=self.to_node, to_node=self.from_node)


@dataclass(frozen=True)
class Device:
    """A power device attached to one node.

    ``phase`` selects a single-phase connection; ``None`` means a balanced
    three-phase connection where ``s_rated_kva`` applies per phase.
    Storage devices carry no fixed rating; their injection comes from a
    dispatch action each timestep and is matched by ``battery_id``.
    """

    label: str
    node: str
    kind: DeviceKind
    phase: Phase | None = None
    s_rated_kva: complex = 0j
    profile_id: str | None = None
    battery_id: str | None = None

    def __post_init__(self) -> None:
        _require_finite(self.s_rated_kva, f"device {self.label!r} s_rated_kva")
        p = self.s_rated_kva.real
        if self.kind in (DeviceKind.LOAD, DeviceKind.EV) and p < 0:
            raise SignConventionViolation(self.label, f"{self.kind.value} must have P >= 0, got {p}")
        if self.kind is DeviceKind.DG and p > 0:
            raise SignConventionViolation(self.label, f"DG must have P <= 0, got {p}")
        if self.kind is DeviceKind.STORAGE:
            if self.s_rated_kva != 0:
                raise SignConventionViolation(
                    self.label, "storage carries no fixed rating; dispatch sets its injection"
                )
            if not self.battery_id:
                raise ValueError(f"storage device {self.label!r} needs a battery_id")
        elif self.battery_id is not None:
            raise ValueError(f"device {self.label!r}: battery_id is only valid for storage")

    @property
    def connected_phases(self) -> tuple[Phase, ...]:
        return (self.phase,) if self.phase is not None else PHASES


@dataclass(frozen=True)
class Feeder:
    """Validated radial feeder; nodes are in breadth-first order from the source,
    and every segment is oriented parent -> child."""

    source_node: str
    nodes: tuple[str, ...]
    segments: tuple[LineSegment, ...]
    devices: tuple[Device, ...]
    v_base_ln: float = DEFAULT_V_BASE_LN
    s_base_kva: float = DEFAULT_S_BASE_KVA

    @property
    def node_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    def devices_at(self, node: str) -> tuple[Device, ...]:
        return tuple(d for d in self.devices if d.node == node)

    def device_by_label(self, label: str) -> Device:
        for d in self.devices:
            if d.label == label:
                return d
        raise KeyError(label)

    def storage_devices(self) -> tuple[Device, ...]:
        return tuple(d for d in self.devices if d.kind is DeviceKind.STORAGE)


@dataclass(frozen=True)
class FeederSpec:
    """Unvalidated description of a feeder, as read from configuration."""

    source_node: str
    nodes: Sequence[str]
    segments: Sequence[LineSegment] = ()
    devices: Sequence[Device] = ()
    v_base_ln: float = DEFAULT_V_BASE_LN
    s_base_kva: float = DEFAULT_S_BASE_KVA


def _check_devices(devices: Iterable[Device], nodes: set[str]) -> None:
    seen: set[str] = set()
    for dev in devices:
        if dev.label in seen:
            raise ValueError(f"duplicate device label {dev.label!r}")
        seen.add(dev.label)
        if dev.node not in nodes:
            raise UnknownNode(dev.node, f"device {dev.label!r}")


def build_feeder(spec: FeederSpec) -> Feeder:
    """Validate a feeder spec and return the normalized immutable model.

    Topology must be a tree rooted at the source: |segments| = |nodes| - 1,
    connected, no cycles. Node order is normalized breadth-first from the
    source so parents always precede children, and segments are re-oriented
    parent -> child. Deterministic: identical specs yield identical feeders.

    Raises CyclicTopology, DisconnectedNode, UnknownNode or NonPositiveLength,
    each naming the offending element.
    """
    nodes = list(dict.fromkeys(spec.nodes))  # dedupe, keep declared order
    if spec.source_node not in nodes:
        raise UnknownNode(spec.source_node, "source node")
    node_set = set(nodes)

    if not spec.v_base_ln > 0:
        raise ValueError(f"v_base_ln must be > 0, got {spec.v_base_ln}")
    if not spec.s_base_kva > 0:
        raise ValueError(f"s_base_kva must be > 0, got {spec.s_base_kva}")

    # Union-find cycle check; a segment joining two already-connected nodes
    # closes a loop regardless of the overall edge count.
    parent: dict[str, str] = {n: n for n in nodes}

    def find(n: str) -> str:
        while parent[n] != n:
            parent[n] = parent[parent[n]]
            n = parent[n]
        return n

    adjacency: dict[str, list[tuple[str, int]]] = {n: [] for n in nodes}
    for idx, seg in enumerate(spec.segments):
        for end in (seg.from_node, seg.to_node):
            if end not in node_set:
                raise UnknownNode(end, f"segment {seg.from_node}->{seg.to_node}")
        ra, rb = find(seg.from_node), find(seg.to_node)
        if ra == rb:
            raise CyclicTopology(seg.from_node, seg.to_node)
        parent[ra] = rb
        adjacency[seg.from_node].append((seg.to_node, idx))
        adjacency[seg.to_node].append((seg.from_node, idx))

    # Breadth-first traversal fixes the normalized node order and orients
    # each segment from parent to child.
    order: list[str] = [spec.source_node]
    visited = {spec.source_node}
    oriented: dict[int, LineSegment] = {}
    queue: deque[str] = deque([spec.source_node])
    while queue:
        here = queue.popleft()
        for neighbor, idx in adjacency[here]:
            if neighbor in visited:
                continue
            visited.add(neighbor)
            seg = spec.segments[idx]
            oriented[idx] = seg if seg.from_node == here else seg.reversed()
            order.append(neighbor)
            queue.append(neighbor)

    for n in nodes:
        if n not in visited:
            raise DisconnectedNode(n)

    _check_devices(spec.devices, node_set)

    return Feeder(
        source_node=spec.source_node,
        nodes=tuple(order),
        segments=tuple(oriented[i] for i in sorted(oriented)),
        devices=tuple(spec.devices),
        v_base_ln=float(spec.v_base_ln),
        s_base_kva=float(spec.s_base_kva),
    )


def attach_device(feeder: Feeder, device: Device) -> Feeder:
    """Return a new feeder with the device appended; the original is unchanged.

    Raises UnknownNode if the device references a node outside the feeder.
    Sign-convention violations are raised by the Device constructor itself.
    """
    _check_devices(list(feeder.devices) + [device], set(feeder.nodes))
    return replace(feeder, devices=feeder.devices + (device,))


def chain_feeder(
    n_nodes: int,
    segment_km: float,
    *,
    prefix: str = "N",
    z_phase_per_km: complex = DEFAULT_Z_PHASE_PER_KM,
    z_neutral_per_km: complex = DEFAULT_Z_NEUTRAL_PER_KM,
    devices: Sequence[Device] = (),
    v_base_ln: float = DEFAULT_V_BASE_LN,
    s_base_kva: float = DEFAULT_S_BASE_KVA,
) -> Feeder:
    """Build the standard chain feeder N0 -> N1 -> ... with uniform segments."""
    names = [f"{prefix}{i}" for i in range(n_nodes)]
    segs = [
        LineSegment(
            from_node=names[i],
            to_node=names[i + 1],
            length_km=segment_km,
            z_phase_per_km=z_phase_per_km,
            z_neutral_per_km=z_neutral_per_km,
        )
        for i in range(n_nodes - 1)
    ]
    return build_feeder(
        FeederSpec(
            source_node=names[0],
            nodes=names,
            segments=segs,
            devices=devices,
            v_base_ln=v_base_ln,
            s_base_kva=s_base_kva,
        )
    )
