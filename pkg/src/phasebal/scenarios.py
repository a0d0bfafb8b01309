"""Scenario builders, the time-stepped simulation loop, and aggregation.

A scenario couples a feeder with hourly device profiles, an optional storage
fleet and a dispatch controller. Running it solves one power-flow snapshot
per timestep and aggregates unbalance and loss metrics over the horizon.

Two builder families cover the bundled studies:

- ``build_sweep_scenario``: a six-node chain with balanced base load plus a
  single-phase DG or EV of a given penetration (percent of the per-phase
  load) at a chosen node, on a compact, overloaded or sparse network.
- ``build_stylized_scenario``: the storage showcase; 2 kW per phase per
  node of base load, a 10 kW single-phase solar block from 10:00 to 15:00
  and a 10 kW single-phase EV block from 18:00 to 23:00 at mid-feeder,
  optionally corrected by one of the storage architectures.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

from .errors import PhasebalError, ScenarioStepError, UnknownNode, UnsupportedNode
from .metrics import NodeMetrics, node_metrics
from .network import (
    PHASES,
    Device,
    DeviceKind,
    Feeder,
    Phase,
    chain_feeder,
)
from .powerflow import (
    FlowSummary,
    SolverSettings,
    VoltageSolution,
    solve_snapshot,
    summarize_flows,
)
from .storage import (
    Architecture,
    ArchKind,
    Battery,
    DispatchAction,
    StylizedScheduleCfg,
    apply_action,
    feasible_action,
    fixed_schedule_controller,
    greedy_balance_controller,
)

#: Segment length (km) per network class; load level is the caller's choice,
#: with 5 kW per phase canonical for compact/sparse and 50 kW for overload.
NETWORK_CLASS_SEGMENT_KM: dict[str, float] = {
    "compact": 0.1,
    "overload": 0.1,
    "sparse": 1.0,
}

CONTROLLERS = ("none", "fixed_schedule", "greedy")

_SWEEP_NODES = ("N1", "N2", "N3", "N4", "N5")


@dataclass(frozen=True)
class Scenario:
    """Immutable description of one simulation run."""

    feeder: Feeder
    horizon_h: float = 24.0
    dt_h: float = 1.0
    profiles: dict[str, tuple[float, ...]] = field(default_factory=dict)
    architecture: Architecture | None = None
    controller: str = "none"
    batteries: tuple[Battery, ...] = ()
    schedule: StylizedScheduleCfg | None = None
    seed: int = 0
    label: str = "scenario"

    def __post_init__(self) -> None:
        if self.controller not in CONTROLLERS:
            raise ValueError(f"unknown controller {self.controller!r}")
        steps = self.horizon_h / self.dt_h
        if abs(steps - round(steps)) > 1e-9 or steps < 1:
            raise ValueError("horizon_h must be a positive multiple of dt_h")
        n = self.n_steps
        for dev in self.feeder.devices:
            if dev.profile_id is None:
                continue
            profile = self.profiles.get(dev.profile_id)
            if profile is None:
                raise ValueError(f"device {dev.label!r}: profile {dev.profile_id!r} not defined")
            if len(profile) != n:
                raise ValueError(
                    f"profile {dev.profile_id!r} has {len(profile)} entries, expected {n}"
                )
        battery_ids = {b.id for b in self.batteries}
        if len(battery_ids) != len(self.batteries):
            raise ValueError("duplicate battery ids")
        attached = {d.battery_id for d in self.feeder.storage_devices()}
        if battery_ids != attached:
            raise ValueError(
                f"batteries {sorted(battery_ids)} do not match storage devices {sorted(attached)}"
            )
        if self.architecture is not None and len(self.batteries) != self.architecture.n_batteries:
            raise ValueError(
                f"{self.architecture.kind.value} needs {self.architecture.n_batteries} batteries"
            )
        if self.controller != "none" and self.batteries and self.architecture is None:
            raise ValueError("a storage controller needs an architecture")

    @property
    def n_steps(self) -> int:
        return round(self.horizon_h / self.dt_h)


@dataclass(frozen=True)
class StepRecord:
    """Everything observed at one timestep."""

    t_h: float
    solution: VoltageSolution
    metrics: dict[str, NodeMetrics]
    flows: FlowSummary
    actions: tuple[DispatchAction, ...]
    soc_kwh: dict[str, float]


@dataclass(frozen=True)
class ScenarioResult:
    """Time-aggregated metrics for one scenario run.

    VUF statistics run over all non-source nodes and all timesteps.
    ``max_drop_pct`` / ``max_rise_pct`` are magnitudes (both >= 0) of the
    worst negative / positive line-to-neutral deviation. ``sum_drop_at``
    maps a node to the time-average of its three phase deviations summed.
    """

    label: str
    mean_vuf_pct: float
    max_vuf_pct: float
    neutral_loss_kwh: float
    phase_loss_kwh: float
    max_drop_pct: float
    max_rise_pct: float
    sum_drop_at: dict[str, float]
    per_timestep: tuple[StepRecord, ...]


def run_scenario(scenario: Scenario, settings: SolverSettings = SolverSettings()) -> ScenarioResult:
    """Execute the scenario loop and aggregate the results.

    Per timestep: evaluate profiles, ask the controller for dispatch
    actions, clip and apply them to the batteries, solve the snapshot with
    the storage injections, then collect node metrics and flows. Solver
    failures propagate as ScenarioStepError tagged with the timestep.
    Deterministic: identical scenarios produce identical results.
    """
    feeder = scenario.feeder
    batteries = list(scenario.batteries)
    bat_index = {b.id: i for i, b in enumerate(batteries)}
    storage_dev = {d.battery_id: d for d in feeder.storage_devices()}

    records: list[StepRecord] = []
    vuf_values: list[float] = []
    neutral_kwh = 0.0
    phase_kwh = 0.0
    max_drop = 0.0
    max_rise = 0.0
    drop_sums = {node: 0.0 for node in feeder.nodes}

    for k in range(scenario.n_steps):
        t_h = k * scenario.dt_h
        injections: dict[Device, complex] = {}
        net_kw = {ph: 0.0 for ph in PHASES}
        for dev in feeder.devices:
            if dev.kind is DeviceKind.STORAGE:
                continue
            scale = scenario.profiles[dev.profile_id][k] if dev.profile_id else 1.0
            s = dev.s_rated_kva * scale
            injections[dev] = s
            for ph in dev.connected_phases:
                net_kw[ph] += s.real

        if scenario.controller == "fixed_schedule" and batteries:
            actions = fixed_schedule_controller(
                t_h, scenario.architecture, scenario.schedule or StylizedScheduleCfg(),
                batteries, scenario.dt_h,
            )
        elif scenario.controller == "greedy" and batteries:
            actions = greedy_balance_controller(
                net_kw, scenario.architecture, batteries, scenario.dt_h
            )
        else:
            actions = []

        applied: list[DispatchAction] = []
        for action in actions:
            i = bat_index[action.battery_id]
            final = feasible_action(batteries[i], action, scenario.dt_h)
            batteries[i] = apply_action(batteries[i], final, scenario.dt_h)
            applied.append(final)
            dev = storage_dev[action.battery_id]
            injections[replace(dev, phase=final.phase)] = complex(final.p_kw, final.q_kvar)

        try:
            solution = solve_snapshot(feeder, injections, settings)
        except PhasebalError as exc:
            raise ScenarioStepError(t_h, exc) from exc

        metrics = node_metrics(solution, feeder)
        flows = summarize_flows(feeder, solution)

        neutral_kwh += flows.total_neutral_loss_kw * scenario.dt_h
        phase_kwh += flows.total_phase_loss_kw * scenario.dt_h
        for node, nm in metrics.items():
            if node != feeder.source_node:
                vuf_values.append(nm.vuf_pct)
            drop_sums[node] += sum(nm.drop_pct.values())
            for d in nm.drop_pct.values():
                max_drop = max(max_drop, -d)
                max_rise = max(max_rise, d)

        records.append(
            StepRecord(
                t_h=t_h,
                solution=solution,
                metrics=metrics,
                flows=flows,
                actions=tuple(applied),
                soc_kwh={b.id: b.soc_kwh for b in batteries},
            )
        )

    return ScenarioResult(
        label=scenario.label,
        mean_vuf_pct=sum(vuf_values) / len(vuf_values) if vuf_values else 0.0,
        max_vuf_pct=max(vuf_values, default=0.0),
        neutral_loss_kwh=neutral_kwh,
        phase_loss_kwh=phase_kwh,
        max_drop_pct=max_drop,
        max_rise_pct=max_rise,
        sum_drop_at={node: s / scenario.n_steps for node, s in drop_sums.items()},
        per_timestep=tuple(records),
    )


def _flat_profiles(n_steps: int) -> dict[str, tuple[float, ...]]:
    return {"flat": (1.0,) * n_steps}


def _window_profile(n_steps: int, dt_h: float, window: tuple[float, float]) -> tuple[float, ...]:
    return tuple(1.0 if window[0] <= (k * dt_h) % 24.0 < window[1] else 0.0 for k in range(n_steps))


def build_sweep_scenario(
    total_phase_load_kw: float,
    device_node: str,
    kind: DeviceKind,
    penetration_pct: float,
    network_class: str,
    *,
    device_phase: Phase = Phase.A,
    balanced: bool = False,
    horizon_h: float = 24.0,
    dt_h: float = 1.0,
) -> Scenario:
    """Six-node chain with balanced base load plus one DG or EV.

    The base load (``total_phase_load_kw`` per phase) splits equally over
    N1..N5. The added device is sized at ``penetration_pct`` percent of the
    per-phase load per connected phase: on ``device_phase`` only by default,
    or on all three phases with ``balanced=True``. ``network_class`` picks
    the segment length (compact/overload: 0.1 km, sparse: 1.0 km); profiles
    are constant over the horizon.
    """
    if network_class not in NETWORK_CLASS_SEGMENT_KM:
        raise ValueError(f"unknown network class {network_class!r}")
    if kind not in (DeviceKind.DG, DeviceKind.EV):
        raise ValueError(f"sweep device must be DG or EV, got {kind}")
    if not 0 <= penetration_pct <= 200:
        raise ValueError(f"penetration_pct must be in [0, 200], got {penetration_pct}")
    if device_node not in _SWEEP_NODES:
        raise UnknownNode(device_node, "sweep device placement (N1..N5)")

    per_node_kw = total_phase_load_kw / len(_SWEEP_NODES)
    devices = [
        Device(
            label=f"load-{node}",
            node=node,
            kind=DeviceKind.LOAD,
            phase=None,
            s_rated_kva=complex(per_node_kw, 0.0),
            profile_id="flat",
        )
        for node in _SWEEP_NODES
    ]
    if penetration_pct > 0:
        size_kw = penetration_pct / 100.0 * total_phase_load_kw
        sign = -1.0 if kind is DeviceKind.DG else 1.0
        devices.append(
            Device(
                label=f"{kind.value}-{device_node}",
                node=device_node,
                kind=kind,
                phase=None if balanced else device_phase,
                s_rated_kva=complex(sign * size_kw, 0.0),
                profile_id="flat",
            )
        )

    feeder = chain_feeder(
        6, NETWORK_CLASS_SEGMENT_KM[network_class], devices=devices
    )
    n_steps = round(horizon_h / dt_h)
    tag = "balanced" if balanced else f"phase-{device_phase.value}"
    return Scenario(
        feeder=feeder,
        horizon_h=horizon_h,
        dt_h=dt_h,
        profiles=_flat_profiles(n_steps),
        label=f"{network_class}-{kind.value}-{device_node}-{penetration_pct:g}pct-{tag}",
    )


def build_stylized_scenario(
    arch: Architecture | None,
    storage_node: str = "N5",
    battery_kw: float = 3.0,
    controller: str = "fixed_schedule",
    *,
    target_phase: Phase = Phase.A,
    segment_km: float = 0.1,
    horizon_h: float = 24.0,
    dt_h: float = 1.0,
) -> Scenario:
    """Storage showcase scenario on the six-node chain.

    Base load is 2 kW per phase at each of N1..N5. A 10 kW DG on
    ``target_phase`` at N3 runs 10:00-15:00 and a 10 kW EV block on the same
    phase runs 18:00-23:00. With ``arch`` set, storage of ``battery_kw``
    total rating sits at ``storage_node`` (N0: feeder head, N5: feeder end):
    one unit for A1, three units of a third the rating each for A2/A3. The
    unit on the target phase starts empty (it charges first); companion
    units start full (they discharge first).
    """
    if storage_node not in ("N0", "N5"):
        raise UnsupportedNode(storage_node, ("N0", "N5"))
    if arch is not None and not battery_kw > 0:
        raise ValueError("battery_kw must be > 0 when an architecture is present")

    schedule = StylizedScheduleCfg(target_phase=target_phase)
    devices = [
        Device(
            label=f"load-{node}",
            node=node,
            kind=DeviceKind.LOAD,
            phase=None,
            s_rated_kva=complex(2.0, 0.0),
            profile_id="flat",
        )
        for node in _SWEEP_NODES
    ]
    devices.append(
        Device(
            label="pv-N3",
            node="N3",
            kind=DeviceKind.DG,
            phase=target_phase,
            s_rated_kva=complex(-10.0, 0.0),
            profile_id="dg-window",
        )
    )
    devices.append(
        Device(
            label="ev-N3",
            node="N3",
            kind=DeviceKind.EV,
            phase=target_phase,
            s_rated_kva=complex(10.0, 0.0),
            profile_id="ev-window",
        )
    )

    batteries: list[Battery] = []
    if arch is None:
        controller = "none"
        label = "stylized-nostorage"
    elif arch.kind is ArchKind.A1:
        batteries.append(Battery(id="bat-1", p_max_kw=battery_kw, soc_kwh=0.0))
        devices.append(
            Device(
                label="st-1",
                node=storage_node,
                kind=DeviceKind.STORAGE,
                phase=target_phase,
                battery_id="bat-1",
            )
        )
        label = f"stylized-a1-{storage_node.lower()}"
    else:
        unit_kw = battery_kw / 3.0
        for phase in PHASES:
            unit = Battery(id=f"bat-{phase.value.lower()}", p_max_kw=unit_kw, soc_kwh=0.0)
            if phase is not target_phase:
                unit = replace(unit, soc_kwh=unit.e_max_kwh)
            batteries.append(unit)
            devices.append(
                Device(
                    label=f"st-{phase.value.lower()}",
                    node=storage_node,
                    kind=DeviceKind.STORAGE,
                    phase=phase,
                    battery_id=f"bat-{phase.value.lower()}",
                )
            )
        shift = "" if arch.allow_load_shift else "-noshift"
        label = f"stylized-{arch.kind.value.lower()}-{storage_node.lower()}{shift}"

    feeder = chain_feeder(6, segment_km, devices=devices)
    n_steps = round(horizon_h / dt_h)
    profiles = _flat_profiles(n_steps)
    profiles["dg-window"] = _window_profile(n_steps, dt_h, schedule.dg_window)
    profiles["ev-window"] = _window_profile(n_steps, dt_h, schedule.ev_window)
    return Scenario(
        feeder=feeder,
        horizon_h=horizon_h,
        dt_h=dt_h,
        profiles=profiles,
        architecture=arch,
        controller=controller if arch is not None else "none",
        batteries=tuple(batteries),
        schedule=schedule,
        label=label,
    )


@dataclass(frozen=True)
class SweepTemplate:
    """Fixed parameters of a penetration sweep."""

    total_phase_load_kw: float
    network_class: str = "compact"
    device_phase: Phase = Phase.A
    balanced: bool = False


@dataclass(frozen=True)
class SweepRow:
    """One cell of a sweep table; ``error`` is set when the run failed."""

    kind: DeviceKind
    node: str
    penetration_pct: float
    result: ScenarioResult | None
    error: str | None = None


def sweep_and_tabulate(
    template: SweepTemplate,
    penetrations: Sequence[float],
    nodes: Sequence[str],
    kinds: Sequence[DeviceKind],
    settings: SolverSettings = SolverSettings(),
    jobs: int = 1,
) -> list[SweepRow]:
    """Run the cross product of (kind, node, penetration) and tabulate.

    Rows come back in deterministic loop order regardless of ``jobs``
    (cells may execute concurrently; the table is merged by key order, not
    completion order). A failing cell is recorded with its error message
    instead of aborting the remaining cells.
    """
    if not penetrations or not nodes or not kinds:
        raise ValueError("penetrations, nodes and kinds must be non-empty")
    cells = [
        (kind, node, pen) for kind in kinds for node in nodes for pen in penetrations
    ]

    def run_cell(cell: tuple[DeviceKind, str, float]) -> SweepRow:
        kind, node, pen = cell
        scenario = build_sweep_scenario(
            template.total_phase_load_kw,
            node,
            kind,
            pen,
            template.network_class,
            device_phase=template.device_phase,
            balanced=template.balanced,
        )
        try:
            return SweepRow(kind, node, pen, run_scenario(scenario, settings))
        except PhasebalError as exc:
            return SweepRow(kind, node, pen, None, error=str(exc))

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run_cell, cells))
    return [run_cell(cell) for cell in cells]
