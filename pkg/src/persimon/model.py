"""Domain model for 1D persistent monitoring.

Targets sit at fixed points of a mission segment [0, L]; their uncertainty
grows at a constant rate while unobserved and is driven down when one or
more agents sense them. Agents move at unit speed with a finite-range
sensor whose detection probability decays linearly with distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence


class ScenarioError(ValueError):
    """Raised when a scenario description violates a model invariant."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class InfoMode(Enum):
    """How much of the global event stream each agent gets to see."""

    CENTRALIZED = "CENTRALIZED"
    ALMOST = "ALMOST"
    LOCAL = "LOCAL"


@dataclass(frozen=True)
class Target:
    """Point of interest with scalar uncertainty dynamics.

    Uncertainty grows at rate ``growth`` when unobserved and decreases at
    ``growth - decay * P`` under joint detection probability P. ``decay``
    must exceed ``growth`` so a point-blank observer wins.
    """

    index: int
    x: float
    growth: float  # uncertainty increase rate while unobserved
    decay: float   # maximum uncertainty decrease rate under full detection
    r0: float      # initial uncertainty

    def validate(self, L: float) -> None:
        path = f"targets[{self.index}]"
        if not 0.0 <= self.x <= L:
            raise ScenarioError(path, f"position x={self.x} outside mission space [0, {L}]")
        if self.growth <= 0.0:
            raise ScenarioError(path, f"growth rate A={self.growth} must be > 0")
        if self.decay <= self.growth:
            raise ScenarioError(
                path, f"decay rate B={self.decay} must exceed growth rate A={self.growth}")
        if self.r0 < 0.0:
            raise ScenarioError(path, f"initial uncertainty R0={self.r0} must be >= 0")


@dataclass(frozen=True)
class AgentSpec:
    """Static description of one agent (initial state and sensing ranges)."""

    index: int
    s0: float            # initial position
    u0: int              # initial control in {-1, 0, 1}
    r: float             # sensing range
    r_comm: float        # communication range

    def validate(self, L: float) -> None:
        path = f"agents[{self.index}]"
        if not 0.0 <= self.s0 <= L:
            raise ScenarioError(path, f"initial position s0={self.s0} outside [0, {L}]")
        if self.u0 not in (-1, 0, 1):
            raise ScenarioError(path, f"initial control u0={self.u0} not in {{-1, 0, 1}}")
        if self.r <= 0.0:
            raise ScenarioError(path, f"sensing range r={self.r} must be > 0")
        if self.r_comm < 2.0 * self.r:
            raise ScenarioError(
                path, f"communication range r_c={self.r_comm} must be >= 2*r = {2 * self.r}")


@dataclass(frozen=True)
class Numerics:
    """Integration and event-localization settings."""

    h: float = 1e-3           # quadrature / guard-bracketing step
    eps_event: float = 1e-9   # event time localization tolerance
    sample_dt: float = 0.1    # output sampling resolution

    def validate(self) -> None:
        if self.h <= 0.0:
            raise ScenarioError("numerics.h", f"step h={self.h} must be > 0")
        if self.eps_event <= 0.0 or self.eps_event >= self.h:
            raise ScenarioError(
                "numerics.eps_event",
                f"event tolerance {self.eps_event} must lie in (0, h={self.h})")
        if self.sample_dt <= 0.0:
            raise ScenarioError("numerics.sample_dt", "sample_dt must be > 0")


@dataclass(frozen=True)
class Scenario:
    """Immutable mission description: space, horizon, targets, agents, mode."""

    L: float
    T: float
    targets: tuple[Target, ...]
    agents: tuple[AgentSpec, ...]
    mode: InfoMode = InfoMode.CENTRALIZED
    numerics: Numerics = field(default_factory=Numerics)
    # LOCAL-mode agents may infer a missed depletion when they re-acquire a
    # target and observe zero uncertainty; disable to hold stale values.
    local_reentry_reset: bool = True

    def validate(self) -> None:
        if self.L <= 0.0:
            raise ScenarioError("mission.L", f"mission length L={self.L} must be > 0")
        if self.T <= 0.0:
            raise ScenarioError("mission.T", f"horizon T={self.T} must be > 0")
        for tgt in self.targets:
            tgt.validate(self.L)
        for ag in self.agents:
            ag.validate(self.L)
        self.numerics.validate()

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def n_targets(self) -> int:
        return len(self.targets)


def sensing_prob(x: float, s: float, r: float) -> float:
    """Detection probability of a point at ``x`` by an agent at ``s``.

    Linear decay over the sensing range: 1 at zero distance, 0 at or
    beyond distance ``r``. Clamped to [0, 1] against float artifacts.
    """
    p = 1.0 - abs(x - s) / r
    if p < 0.0:
        return 0.0
    if p > 1.0:
        return 1.0
    return p


def sensing_grad(x: float, s: float, r: float, direction: int = 0) -> float:
    """Derivative of ``sensing_prob`` with respect to the agent position.

    Piecewise constant in {0, +1/r, -1/r}. At the two kinks the convention
    is: exactly at the range boundary the gradient is 0; exactly on the
    target it is -direction/r, where ``direction`` is the agent's motion
    sign (0 when unknown, giving 0).
    """
    d = abs(x - s)
    if d >= r:
        return 0.0
    if d == 0.0:
        return -direction / r
    return math.copysign(1.0 / r, x - s)


def joint_detection(x: float, positions: Sequence[float], ranges: Sequence[float]) -> float:
    """Joint detection probability of independent observers at ``positions``.

    Agents out of range contribute a factor of 1 and may be included or
    dropped without changing the value.
    """
    miss = 1.0
    for s, r in zip(positions, ranges):
        miss *= 1.0 - sensing_prob(x, s, r)
    p = 1.0 - miss
    if p < 0.0:
        return 0.0
    if p > 1.0:
        return 1.0
    return p


def uncertainty_rate(R: float, P: float, growth: float, decay: float) -> float:
    """Time derivative of a target's uncertainty.

    Held at 0 on the boundary arc (R = 0 with enough sensing pressure),
    otherwise growth - decay * P. Negative R means the caller's integrator
    already missed an event, which is unrecoverable.
    """
    if R < 0.0:
        raise ValueError(f"negative uncertainty R={R}: integrator missed a zero crossing")
    rate = growth - decay * P
    if R == 0.0 and rate <= 0.0:
        return 0.0
    return rate
