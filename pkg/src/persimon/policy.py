"""Parametric trajectory policy.

Each agent follows an ordered list of switching positions theta with a
dwell time paired to each: transit at unit speed to the next point, hold
for its dwell, move on. Once the list is exhausted the agent parks. The
(theta, w) vectors are the decision variables of the whole package; this
module turns them into piecewise-constant controls and phase-boundary
transitions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import AgentSpec

log = logging.getLogger(__name__)


def _sign(x: float) -> int:
    """Sign with sign(0) = 0, the convention for coincident switching points."""
    if x > 0.0:
        return 1
    if x < 0.0:
        return -1
    return 0


@dataclass(frozen=True)
class AgentParams:
    """Decision variables of one agent: switching points and dwell times."""

    theta: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        if self.theta.ndim != 1 or self.w.shape != self.theta.shape:
            raise ValueError("theta and w must be 1-D vectors of equal length")

    @property
    def n_points(self) -> int:
        return int(self.theta.size)

    def validate(self, L: float, path: str = "params") -> None:
        if self.theta.size and (self.theta.min() < 0.0 or self.theta.max() > L):
            raise ValueError(f"{path}: switching points must lie in [0, {L}]")
        if self.w.size and self.w.min() < 0.0:
            raise ValueError(f"{path}: dwell times must be >= 0")


def project_params(params: AgentParams, L: float) -> AgentParams:
    """Clamp switching points into [0, L] and dwell times into [0, inf)."""
    return AgentParams(np.clip(params.theta, 0.0, L), np.maximum(params.w, 0.0))


class PhaseMode(Enum):
    TRANSIT = "TRANSIT"
    DWELL = "DWELL"
    EXHAUSTED = "EXHAUSTED"


@dataclass(frozen=True)
class PhaseState:
    """Where an agent is in its switching-point program.

    ``point`` is the 1-based index of the switching point being approached
    (TRANSIT) or occupied (DWELL; last reached point when EXHAUSTED).
    ``last_dir`` remembers the most recent nonzero control for the sensing
    kink conventions.
    """

    point: int
    mode: PhaseMode
    u: int
    dwell_until: float = 0.0
    last_dir: int = 0


@dataclass(frozen=True)
class Transition:
    """One control-program step at a phase boundary.

    ``arrival`` marks reaching switching point ``point`` (the current
    switch index for derivative bookkeeping becomes ``point``);
    ``departure`` marks leaving it; ``reversal`` is an arrival and
    departure fused by a zero dwell with the direction flipped.
    """

    kind: str
    point: int
    u_before: int
    u_after: int


@dataclass(frozen=True)
class Boundary:
    """Next phase boundary: when it happens, what it does, what comes next."""

    time: float
    transitions: tuple[Transition, ...]
    next_phase: PhaseState


def initial_phase(spec: AgentSpec, params: AgentParams) -> PhaseState:
    """Phase at t = 0: in transit toward the first switching point.

    The configured initial control is reconciled against the direction the
    first switching point demands; the parameterization wins.
    """
    if params.n_points == 0:
        return PhaseState(point=0, mode=PhaseMode.EXHAUSTED, u=0, last_dir=spec.u0)
    u = _sign(float(params.theta[0]) - spec.s0)
    if spec.u0 != u:
        log.warning(
            "agent %d: initial control u0=%+d conflicts with direction %+d toward "
            "first switching point; using %+d", spec.index, spec.u0, u, u)
    return PhaseState(point=1, mode=PhaseMode.TRANSIT, u=u,
                      last_dir=u if u != 0 else spec.u0)


def control_value(phase: PhaseState) -> int:
    """Current speed command: +-1 in transit, 0 while dwelling or parked."""
    return phase.u if phase.mode is PhaseMode.TRANSIT else 0


def _after_departure(params: AgentParams, point: int) -> int:
    """Direction of travel from switching point ``point`` to the next one."""
    return _sign(float(params.theta[point]) - float(params.theta[point - 1]))


def resolve_boundary(phase: PhaseState, s: float, t: float,
                     params: AgentParams, horizon: float) -> Boundary | None:
    """Locate the next phase boundary at or after ``t``, or None past the horizon.

    Arrival times are exact (unit speed, linear motion). A zero dwell fuses
    the arrival with the following departure: a direction flip becomes a
    single reversal transition, a same-direction pass-through stays an
    arrival plus departure pair, and a zero-length follow-up leg (coincident
    switching points) emits the arrival alone, leaving the cascaded arrival
    to the next call at the same instant.
    """
    n = params.n_points
    if phase.mode is PhaseMode.EXHAUSTED:
        return None

    if phase.mode is PhaseMode.TRANSIT:
        tau = t + abs(float(params.theta[phase.point - 1]) - s)
        if tau > horizon:
            return None
        point = phase.point
        u_in = phase.u
        last_dir = u_in if u_in != 0 else phase.last_dir
        arrival = Transition("arrival", point, u_in, 0)
        dwell = float(params.w[point - 1])
        if dwell > 0.0:
            nxt = PhaseState(point, PhaseMode.DWELL, 0, dwell_until=tau + dwell,
                             last_dir=last_dir)
            return Boundary(tau, (arrival,), nxt)
        if point == n:
            nxt = PhaseState(point, PhaseMode.EXHAUSTED, 0, last_dir=last_dir)
            return Boundary(tau, (arrival,), nxt)
        u_next = _after_departure(params, point)
        if u_next == 0:
            # coincident next point: cascade re-arrives at the same instant
            nxt = PhaseState(point + 1, PhaseMode.TRANSIT, 0, last_dir=last_dir)
            return Boundary(tau, (arrival,), nxt)
        nxt = PhaseState(point + 1, PhaseMode.TRANSIT, u_next, last_dir=u_next)
        if u_in != 0 and u_next == -u_in:
            return Boundary(tau, (Transition("reversal", point, u_in, u_next),), nxt)
        departure = Transition("departure", point, 0, u_next)
        return Boundary(tau, (arrival, departure), nxt)

    # DWELL
    tau = phase.dwell_until
    if tau > horizon:
        return None
    point = phase.point
    if point == n:
        nxt = PhaseState(point, PhaseMode.EXHAUSTED, 0, last_dir=phase.last_dir)
        return Boundary(tau, (), nxt)
    u_next = _after_departure(params, point)
    if u_next == 0:
        nxt = PhaseState(point + 1, PhaseMode.TRANSIT, 0, last_dir=phase.last_dir)
        return Boundary(tau, (), nxt)
    nxt = PhaseState(point + 1, PhaseMode.TRANSIT, u_next, last_dir=u_next)
    return Boundary(tau, (Transition("departure", point, 0, u_next),), nxt)


def next_phase_boundary(phase: PhaseState, s: float, t: float,
                        params: AgentParams, horizon: float):
    """Time and transitions of the next control-program boundary, or None."""
    b = resolve_boundary(phase, s, t, params, horizon)
    if b is None:
        return None
    return b.time, b.transitions


def advance_phase(phase: PhaseState, boundary: Boundary) -> PhaseState:
    """Step the phase across a boundary produced by ``resolve_boundary``."""
    if boundary.next_phase.point < phase.point and phase.mode is not PhaseMode.EXHAUSTED:
        raise ValueError("boundary does not belong to this phase")
    return boundary.next_phase


def position_schedule(spec: AgentSpec, params: AgentParams,
                      horizon: float) -> list[tuple[float, float, int]]:
    """Breakpoints (t, s, u-after) of the piecewise-linear trajectory.

    Independent of the simulator; used as a ground-truth position oracle.
    """
    pts = [(0.0, spec.s0, 0)]
    phase = initial_phase(spec, params)
    t, s = 0.0, spec.s0
    pts[0] = (0.0, s, control_value(phase))
    while True:
        b = resolve_boundary(phase, s, t, params, horizon)
        if b is None:
            break
        t = b.time
        if phase.mode is PhaseMode.TRANSIT:
            s = float(params.theta[phase.point - 1])
        phase = advance_phase(phase, b)
        pts.append((t, s, control_value(phase)))
    return pts


def position_at(schedule: list[tuple[float, float, int]], t: float) -> float:
    """Evaluate a trajectory from its breakpoint schedule."""
    s, u, t0 = schedule[0][1], schedule[0][2], schedule[0][0]
    for tb, sb, ub in schedule:
        if tb > t:
            break
        t0, s, u = tb, sb, ub
    return s + u * (t - t0)
