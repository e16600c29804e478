"""Two-zone building thermal model on a lumped RC network.

Two zones (nodes 1, 2) exchange heat with a shared wall (nodes 3, 4, a
3R2C surface) and with the ambient; supply air at temperature t_supply
enters each zone with a controlled mass flow rate, so the control enters
bilinearly: the input column for zone k scales with (t_supply - T_k).

Temperatures are deviations from the ambient reference, which is why the
stock setpoints (2.5, 6.0) are small numbers and the supply temperature
sits below the whole operating band (it must never cross a zone
temperature, or the input matrix drops rank).

Parameter values are implementation defaults chosen for unit round-trip
convenience, not measurements.
"""

from dataclasses import dataclass

import numpy as np

from ..control import ControllerGains, make_setpoint
from ..core import Box, ControlAffineModel
from ..simulate import SimulationConfig


@dataclass(frozen=True)
class HvacParams:
    """Capacitances, resistances and supply-air constants of the network.

    r31/r13 and r42/r24 name the same physical resistor seen from either
    side; r10 and r20 are the per-zone ambient resistances (equal by
    default).
    """

    c1: float = 1.0
    c2: float = 1.0
    c3: float = 2.0
    c4: float = 2.0
    r31: float = 1.0
    r42: float = 1.0
    r34: float = 1.0
    r10: float = 1.0
    r20: float = 1.0
    cp: float = 1.0
    t_supply: float = -10.0
    t_ambient: float = 0.0
    domain_lo: float = -5.0
    domain_hi: float = 9.0

    def __post_init__(self):
        for name in ("c1", "c2", "c3", "c4", "r31", "r42", "r34", "r10", "r20", "cp"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.domain_lo < self.domain_hi:
            raise ValueError("domain_lo must be below domain_hi")
        if self.domain_lo <= self.t_supply <= self.domain_hi:
            raise ValueError(
                "t_supply must lie outside the state domain so the input matrix "
                "keeps full rank on it"
            )

    @property
    def r13(self):
        return self.r31

    @property
    def r24(self):
        return self.r42


def hvac_model(params=None):
    """Control-affine model of the two-zone network, n=4, m=2.

    Analytic Jacobians and the closed-form potential of M g are attached;
    the metric is the diagonal of thermal capacitances.
    """
    p = params or HvacParams()

    def drift(T):
        t1, t2, t3, t4 = T
        return np.array(
            [
                ((t3 - t1) / p.r31 + (p.t_ambient - t1) / p.r10) / p.c1,
                ((t4 - t2) / p.r42 + (p.t_ambient - t2) / p.r20) / p.c2,
                ((t1 - t3) / p.r13 + (t4 - t3) / p.r34) / p.c3,
                ((t2 - t4) / p.r24 + (t3 - t4) / p.r34) / p.c4,
            ]
        )

    drift_jac = np.array(
        [
            [-(1.0 / p.r31 + 1.0 / p.r10) / p.c1, 0.0, 1.0 / (p.c1 * p.r31), 0.0],
            [0.0, -(1.0 / p.r42 + 1.0 / p.r20) / p.c2, 0.0, 1.0 / (p.c2 * p.r42)],
            [1.0 / (p.c3 * p.r13), 0.0, -(1.0 / p.r13 + 1.0 / p.r34) / p.c3, 1.0 / (p.c3 * p.r34)],
            [0.0, 1.0 / (p.c4 * p.r24), 1.0 / (p.c4 * p.r34), -(1.0 / p.r24 + 1.0 / p.r34) / p.c4],
        ]
    )

    def input_matrix(T):
        return np.array(
            [
                [p.cp / p.c1 * (p.t_supply - T[0]), 0.0],
                [0.0, p.cp / p.c2 * (p.t_supply - T[1])],
                [0.0, 0.0],
                [0.0, 0.0],
            ]
        )

    def input_matrix_jacobian(T, w):
        return np.array(
            [
                [-p.cp / p.c1 * w[0], 0.0],
                [0.0, -p.cp / p.c2 * w[1]],
                [0.0, 0.0],
                [0.0, 0.0],
            ]
        )

    def potential(T):
        return np.array(
            [
                -0.5 * p.cp * (T[0] - p.t_supply) ** 2,
                -0.5 * p.cp * (T[1] - p.t_supply) ** 2,
            ]
        )

    return ControlAffineModel(
        n=4,
        m=2,
        drift=drift,
        input_matrix=input_matrix,
        metric=np.diag([p.c1, p.c2, p.c3, p.c4]),
        state_domain=Box(np.full(4, p.domain_lo), np.full(4, p.domain_hi)),
        drift_jacobian=lambda T: drift_jac,
        input_matrix_jacobian=input_matrix_jacobian,
        potential=potential,
        name="hvac2z",
    )


def resolve_walls(params, t1, t2):
    """Steady-state wall temperatures for given zone temperatures.

    The wall nodes carry no input, so their equilibrium is a 2x2 linear
    solve in (t3, t4).
    """
    p = params
    a = np.array(
        [
            [1.0 / p.r13 + 1.0 / p.r34, -1.0 / p.r34],
            [-1.0 / p.r34, 1.0 / p.r24 + 1.0 / p.r34],
        ]
    )
    b = np.array([t1 / p.r13, t2 / p.r24])
    t3, t4 = np.linalg.solve(a, b)
    return float(t3), float(t4)


def make_hvac_setpoint(model, params, t1_star, t2_star):
    """Setpoint for target zone temperatures; wall temperatures and the
    equilibrium flow rates are solved for."""
    t3, t4 = resolve_walls(params, t1_star, t2_star)
    return make_setpoint(model, np.array([t1_star, t2_star, t3, t4]))


DEFAULT_ZONE_TARGETS = (2.5, 6.0)

DEFAULT_GAINS = ControllerGains(k1=1.0, kd=1.0, ki=2.0)


def default_scenario(params=None):
    """Stock converging run: both zones start at ambient, targets (2.5, 6.0).

    Zone 2's initial-to-target gap is deliberately the larger one.  Fully
    deterministic.
    """
    p = params or HvacParams()
    model = hvac_model(p)
    setpoint = make_hvac_setpoint(model, p, *DEFAULT_ZONE_TARGETS)
    config = SimulationConfig(
        t_end=40.0,
        dt=1e-3,
        x0=np.zeros(4),
        u0=np.zeros(2),
        gains=DEFAULT_GAINS,
        setpoint=setpoint,
        log_stride=10,
    )
    return model, config
