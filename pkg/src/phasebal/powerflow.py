"""Three-phase four-wire power flow for radial feeders.

Two structurally different solvers cover the same contract:

- ``solve_snapshot``: iterative forward-backward sweep. Each pass evaluates
  constant-power device currents at the present voltages, accumulates branch
  currents leaf-to-root, then propagates voltage drops root-to-leaf across
  all four conductors.
- ``oracle_solve``: dense cross-check for small feeders. Assembles the full
  4n x 4n nodal admittance system and fixed-point iterates on device current
  injections against the reduced linear system.

Both treat devices as constant-power (re-evaluated against updated voltage
every iteration), start flat (source phasors, zero neutral), and stop when
the largest voltage change in one pass is at most tol_pu * v_base_ln.
Unbalanced phase currents return through the explicit neutral conductor,
which is grounded at the source only.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import NonConvergence, UnconvergedSolution, UnknownNode, VoltageCollapse
from .network import CONDUCTORS, Device, Feeder, Phase

#: Conductor indices within the per-node 4-vector.
_IDX = {"A": 0, "B": 1, "C": 2, "N": 3}
_COLLAPSE_PU = 0.5


@dataclass(frozen=True)
class SolverSettings:
    tol_pu: float = 1e-8
    max_iter: int = 100

    def __post_init__(self) -> None:
        if not self.tol_pu > 0:
            raise ValueError(f"tol_pu must be > 0, got {self.tol_pu}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class VoltageSolution:
    """Converged node voltages and branch currents for one snapshot.

    ``v`` maps node -> conductor ("A","B","C","N") -> volts;
    ``branch_current`` maps segment index -> conductor -> amps, positive
    from parent to child. ``iterations`` counts full sweep passes.
    """

    v: dict[str, dict[str, complex]]
    branch_current: dict[int, dict[str, complex]]
    iterations: int
    converged: bool


@dataclass(frozen=True)
class FlowSummary:
    """Per-segment conductor losses and per-phase source injection.

    Loss attribution is |I|^2 R per conductor, exact when the mutual
    impedance has no resistive part (the default has none at all).
    ``source_injection`` (kVA per phase) is recovered from the branch flows
    leaving the source bus; devices sitting on the source bus itself draw
    from the stiff source without traversing any segment.
    """

    phase_loss_kw: dict[int, dict[str, float]]
    neutral_loss_kw: dict[int, float]
    source_injection: dict[str, complex]

    @property
    def total_phase_loss_kw(self) -> float:
        return sum(sum(per.values()) for per in self.phase_loss_kw.values())

    @property
    def total_neutral_loss_kw(self) -> float:
        return sum(self.neutral_loss_kw.values())


def source_phasors(v_base_ln: float) -> tuple[complex, complex, complex]:
    """Balanced source phasors: A at 0 deg, B at -120 deg, C at +120 deg."""
    return (
        complex(v_base_ln, 0.0),
        v_base_ln * cmath.exp(-2j * math.pi / 3),
        v_base_ln * cmath.exp(+2j * math.pi / 3),
    )


class _Grid:
    """Index arrays and segment impedance matrices derived from a feeder."""

    def __init__(self, feeder: Feeder) -> None:
        self.feeder = feeder
        self.n = len(feeder.nodes)
        self.index = {name: i for i, name in enumerate(feeder.nodes)}
        self.parent = np.full(self.n, -1, dtype=int)
        self.feed_seg = np.full(self.n, -1, dtype=int)
        self.z = np.zeros((len(feeder.segments), 4, 4), dtype=complex)
        for k, seg in enumerate(feeder.segments):
            child = self.index[seg.to_node]
            self.parent[child] = self.index[seg.from_node]
            self.feed_seg[child] = k
            zp = seg.z_phase_per_km * seg.length_km
            zn = seg.z_neutral_per_km * seg.length_km
            zm = seg.z_mutual_per_km * seg.length_km
            m = np.full((4, 4), zm, dtype=complex)
            m[0, 0] = m[1, 1] = m[2, 2] = zp
            m[3, 3] = zn
            self.z[k] = m

    def flat_voltages(self) -> np.ndarray:
        v = np.zeros((self.n, 4), dtype=complex)
        va, vb, vc = source_phasors(self.feeder.v_base_ln)
        v[:, 0] = va
        v[:, 1] = vb
        v[:, 2] = vc
        return v


def _effective_injections(
    feeder: Feeder, injections: Mapping[Device, complex] | None
) -> list[tuple[Device, complex]]:
    """Merge explicit injections over the feeder's rated devices.

    Entries are matched by device label; an injection whose label is not in
    the feeder acts as a transient extra device (its node must exist).
    Storage devices default to zero injection when not dispatched.
    """
    merged: dict[str, tuple[Device, complex]] = {
        d.label: (d, d.s_rated_kva) for d in feeder.devices
    }
    if injections:
        nodes = set(feeder.nodes)
        for dev, s in injections.items():
            if dev.node not in nodes:
                raise UnknownNode(dev.node, f"injection for device {dev.label!r}")
            if not cmath.isfinite(s):
                raise ValueError(f"injection for {dev.label!r} must be finite, got {s!r}")
            merged[dev.label] = (dev, complex(s))
    return list(merged.values())


def _device_sinks(
    grid: _Grid, entries: list[tuple[Device, complex]], v: np.ndarray
) -> tuple[np.ndarray, float]:
    """Current drawn at each node per conductor, from constant-power devices.

    Returns (sinks, v_min_pu). A device on phase p draws I = conj(S / V_ln)
    from conductor p and pushes the same current into the neutral. The
    denominator is clamped at 0.5 pu; a clamp shows up as v_min_pu < 0.5.
    """
    v_base = grid.feeder.v_base_ln
    floor = _COLLAPSE_PU * v_base
    sinks = np.zeros((grid.n, 4), dtype=complex)
    v_min = math.inf
    nominal = source_phasors(v_base)
    for dev, s_kva in entries:
        if s_kva == 0:
            continue
        node = grid.index[dev.node]
        for ph in dev.connected_phases:
            c = _IDX[ph.value]
            v_ln = v[node, c] - v[node, 3]
            mag = abs(v_ln)
            v_min = min(v_min, mag / v_base)
            if mag < floor:
                v_ln = nominal[c] * _COLLAPSE_PU if mag == 0.0 else v_ln * (floor / mag)
            i_dev = (s_kva * 1000.0 / v_ln).conjugate()
            sinks[node, c] += i_dev
            sinks[node, 3] -= i_dev
    return sinks, v_min


def _branch_currents(grid: _Grid, sinks: np.ndarray) -> np.ndarray:
    """Accumulate branch currents leaf-to-root (BFS node order guarantees
    children have higher indices than their parents)."""
    acc = sinks.copy()
    currents = np.zeros((len(grid.feeder.segments), 4), dtype=complex)
    for node in range(grid.n - 1, 0, -1):
        currents[grid.feed_seg[node]] = acc[node]
        acc[grid.parent[node]] += acc[node]
    return currents


def _to_solution(grid: _Grid, v: np.ndarray, currents: np.ndarray, iterations: int) -> VoltageSolution:
    v_map = {
        name: {c: complex(v[i, _IDX[c]]) for c in CONDUCTORS}
        for i, name in enumerate(grid.feeder.nodes)
    }
    i_map = {
        k: {c: complex(currents[k, _IDX[c]]) for c in CONDUCTORS}
        for k in range(len(grid.feeder.segments))
    }
    return VoltageSolution(v=v_map, branch_current=i_map, iterations=iterations, converged=True)


def solve_snapshot(
    feeder: Feeder,
    injections: Mapping[Device, complex] | None = None,
    settings: SolverSettings = SolverSettings(),
) -> VoltageSolution:
    """Solve one snapshot by forward-backward sweep.

    ``injections`` maps devices to complex kVA (per connected phase, load
    convention: P > 0 consumes) and overrides the feeder's rated powers by
    device label; see ``_effective_injections``. Raises NonConvergence after
    ``max_iter`` passes and VoltageCollapse if any line-to-neutral voltage
    falls below 0.5 pu while iterating.
    """
    grid = _Grid(feeder)
    entries = _effective_injections(feeder, injections)
    v = grid.flat_voltages()
    tol_v = settings.tol_pu * feeder.v_base_ln
    delta = math.inf
    for it in range(1, settings.max_iter + 1):
        sinks, v_min = _device_sinks(grid, entries, v)
        if v_min < _COLLAPSE_PU:
            raise VoltageCollapse(it, v_min)
        currents = _branch_currents(grid, sinks)
        v_new = v.copy()
        for node in range(1, grid.n):
            k = grid.feed_seg[node]
            v_new[node] = v_new[grid.parent[node]] - grid.z[k] @ currents[k]
        delta = float(np.max(np.abs(v_new - v)))
        v = v_new
        if delta <= tol_v:
            return _to_solution(grid, v, currents, it)
    raise NonConvergence(settings.max_iter, delta)


def oracle_solve(
    feeder: Feeder,
    injections: Mapping[Device, complex] | None = None,
    settings: SolverSettings = SolverSettings(),
) -> VoltageSolution:
    """Dense verification solver for feeders of at most 12 nodes.

    Same contract as ``solve_snapshot`` but structurally different: builds
    the full 4n x 4n nodal admittance matrix, partitions out the four fixed
    source conductors, and fixed-point iterates device current injections
    against the reduced linear system.
    """
    grid = _Grid(feeder)
    if grid.n > 12:
        raise ValueError(f"oracle_solve supports at most 12 nodes, got {grid.n}")
    entries = _effective_injections(feeder, injections)

    n4 = 4 * grid.n
    y = np.zeros((n4, n4), dtype=complex)
    for k, seg in enumerate(feeder.segments):
        yb = np.linalg.inv(grid.z[k])
        p = 4 * grid.index[seg.from_node]
        c = 4 * grid.index[seg.to_node]
        y[p : p + 4, p : p + 4] += yb
        y[c : c + 4, c : c + 4] += yb
        y[p : p + 4, c : c + 4] -= yb
        y[c : c + 4, p : p + 4] -= yb

    fixed = np.arange(4)  # source node is index 0 after normalization
    free = np.arange(4, n4)
    v = grid.flat_voltages()
    if free.size == 0:
        return _to_solution(grid, v, np.zeros((0, 4), dtype=complex), 1)

    y_uu = y[np.ix_(free, free)]
    y_uf = y[np.ix_(free, fixed)]
    v_fixed = v.reshape(-1)[fixed]
    tol_v = settings.tol_pu * feeder.v_base_ln
    delta = math.inf
    for it in range(1, settings.max_iter + 1):
        sinks, v_min = _device_sinks(grid, entries, v)
        if v_min < _COLLAPSE_PU:
            raise VoltageCollapse(it, v_min)
        rhs = -sinks.reshape(-1)[free] - y_uf @ v_fixed
        v_free = np.linalg.solve(y_uu, rhs)
        v_new = v.copy()
        v_new.reshape(-1)[free] = v_free
        delta = float(np.max(np.abs(v_new - v)))
        v = v_new
        if delta <= tol_v:
            sinks, _ = _device_sinks(grid, entries, v)
            return _to_solution(grid, v, _branch_currents(grid, sinks), it)
    raise NonConvergence(settings.max_iter, delta)


def summarize_flows(feeder: Feeder, solution: VoltageSolution) -> FlowSummary:
    """Reduce a converged solution to conductor losses and source injection."""
    if not solution.converged:
        raise UnconvergedSolution("summarize_flows requires a converged solution")
    phase_loss: dict[int, dict[str, float]] = {}
    neutral_loss: dict[int, float] = {}
    for k, seg in enumerate(feeder.segments):
        r_ph = (seg.z_phase_per_km * seg.length_km).real
        r_n = (seg.z_neutral_per_km * seg.length_km).real
        amps = solution.branch_current[k]
        phase_loss[k] = {p.value: abs(amps[p.value]) ** 2 * r_ph / 1000.0 for p in Phase}
        neutral_loss[k] = abs(amps["N"]) ** 2 * r_n / 1000.0
    injection: dict[str, complex] = {p.value: 0j for p in Phase}
    v_src = solution.v[feeder.source_node]
    for k, seg in enumerate(feeder.segments):
        if seg.from_node != feeder.source_node:
            continue
        for p in Phase:
            injection[p.value] += (
                v_src[p.value] * solution.branch_current[k][p.value].conjugate() / 1000.0
            )
    return FlowSummary(
        phase_loss_kw=phase_loss,
        neutral_loss_kw=neutral_loss,
        source_injection=injection,
    )


def power_balance_residual_kw(
    feeder: Feeder,
    solution: VoltageSolution,
    injections: Mapping[Device, complex] | None = None,
) -> float:
    """|source P - (device P + losses)| in kW, over devices below the source.

    Uses the requested device powers, so a converged solution must show the
    source supplying exactly the demanded power plus conductor losses.
    Devices on the source bus draw from the stiff source directly and do not
    appear in branch flows, hence their exclusion on both sides.
    """
    summary = summarize_flows(feeder, solution)
    source_p = sum(s.real for s in summary.source_injection.values())
    losses = summary.total_phase_loss_kw + summary.total_neutral_loss_kw
    device_p = 0.0
    for dev, s_kva in _effective_injections(feeder, injections):
        if dev.node == feeder.source_node:
            continue
        device_p += s_kva.real * len(dev.connected_phases)
    return abs(source_p - device_p - losses)
