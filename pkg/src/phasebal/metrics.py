"""Symmetrical-component decomposition and unbalance indices.

A three-phase set is unbalanced when the phase magnitudes differ or the
angles between consecutive phasors deviate from 120 degrees. Any such set
decomposes into three balanced sequence sets (zero, positive, negative);
the voltage unbalance factor (VUF) is the negative-to-positive sequence
magnitude ratio in percent.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import UnconvergedSolution, UnknownNorm, ZeroPositiveSequence
from .network import NEUTRAL, PHASES, Feeder, Phase

#: Rotation operator a = 1 at +120 degrees.
ALPHA = cmath.exp(2j * math.pi / 3)

#: Voltage-unbalance limits in percent, by utility/standard.
VUF_NORM_LIMITS: dict[str, float] = {
    "PGE": 2.5,
    "NEMA": 1.0,
    "BCH_STD": 2.0,
    "BCH_RURAL": 3.0,
    "EN50160_LV_MV": 2.0,
    "EN50160_HV": 1.0,
}


@dataclass(frozen=True)
class SequenceComponents:
    """Zero/positive/negative-sequence phasors of a three-phase set."""

    v0: complex
    v1: complex
    v2: complex


@dataclass(frozen=True)
class NodeMetrics:
    """Per-node unbalance and voltage-deviation summary.

    ``drop_pct`` is signed per phase: negative means the line-to-neutral
    magnitude sits below nominal (drop), positive means above (rise).
    """

    vuf_pct: float
    drop_pct: dict[Phase, float]
    v_rms: float


def fortescue(va: complex, vb: complex, vc: complex) -> SequenceComponents:
    """Decompose (Va, Vb, Vc) into symmetrical components.

    v0 = (Va + Vb + Vc) / 3
    v1 = (Va + a Vb + a^2 Vc) / 3      with a = 1 at +120 deg
    v2 = (Va + a^2 Vb + a Vc) / 3
    """
    a = ALPHA
    a2 = ALPHA * ALPHA
    return SequenceComponents(
        v0=(va + vb + vc) / 3,
        v1=(va + a * vb + a2 * vc) / 3,
        v2=(va + a2 * vb + a * vc) / 3,
    )


def inverse_fortescue(seq: SequenceComponents) -> tuple[complex, complex, complex]:
    """Reconstruct (Va, Vb, Vc) from sequence components (exact inverse)."""
    a = ALPHA
    a2 = ALPHA * ALPHA
    va = seq.v0 + seq.v1 + seq.v2
    vb = seq.v0 + a2 * seq.v1 + a * seq.v2
    vc = seq.v0 + a * seq.v1 + a2 * seq.v2
    return va, vb, vc


def vuf(seq: SequenceComponents) -> float:
    """Voltage unbalance factor: 100 |v2| / |v1| percent.

    Raises ZeroPositiveSequence when |v1| = 0 (the ratio is undefined).
    """
    mag1 = abs(seq.v1)
    if mag1 == 0.0:
        raise ZeroPositiveSequence("positive-sequence magnitude is zero")
    return 100.0 * abs(seq.v2) / mag1


def rms_voltage(va_mag: float, vb_mag: float, vc_mag: float) -> float:
    """RMS of the three phase-voltage magnitudes: sqrt((Va^2+Vb^2+Vc^2)/3)."""
    return math.sqrt((va_mag * va_mag + vb_mag * vb_mag + vc_mag * vc_mag) / 3.0)


def check_vuf_norm(vuf_pct: float, norm: str) -> bool:
    """True iff the given VUF (percent) is within the named norm's limit."""
    try:
        limit = VUF_NORM_LIMITS[norm]
    except KeyError:
        raise UnknownNorm(norm) from None
    return vuf_pct <= limit


def node_metrics(solution, feeder: Feeder) -> dict[str, NodeMetrics]:
    """Compute per-node VUF, signed voltage deviation and RMS voltage.

    Works on phase-to-neutral voltages (V_phase - V_neutral), i.e. what a
    line-to-neutral instrument at the node would read: the four-wire model
    makes the local neutral potential nonzero downstream of the source.
    """
    if not solution.converged:
        raise UnconvergedSolution("node_metrics requires a converged solution")
    v_base = feeder.v_base_ln
    out: dict[str, NodeMetrics] = {}
    for node in feeder.nodes:
        vn = solution.v[node][NEUTRAL]
        v_ln = {ph: solution.v[node][ph.value] - vn for ph in PHASES}
        seq = fortescue(v_ln[Phase.A], v_ln[Phase.B], v_ln[Phase.C])
        drops = {ph: 100.0 * (abs(v_ln[ph]) - v_base) / v_base for ph in PHASES}
        out[node] = NodeMetrics(
            vuf_pct=vuf(seq),
            drop_pct=drops,
            v_rms=rms_voltage(*(abs(v_ln[ph]) for ph in PHASES)),
        )
    return out
