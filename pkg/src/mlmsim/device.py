"""Compact models for a single memristor.

The device is described by a normalized internal state w in [0, 1] that maps
linearly onto resistance between r_on (w=0) and r_off (w=1), with an optional
linear temperature factor. State evolves under an applied voltage with a
polynomial window that pins the endpoints:

    dw/dt = drift_rate * v * f(w),   f(w) = 1 - (2w - 1)^(2p)

Positive voltage (at the programming terminal) drives w up, i.e. toward high
resistance; negative voltage erases toward w = 0. The threshold variant
freezes the state whenever v_th_neg < v < v_th_pos, which is what makes the
small read voltage non-destructive.

The window is zero at both endpoints, so a state sitting exactly on a bound
would be stuck there for good. To keep the erased state programmable, the
window argument is nudged off the boundary (by W_BOUNDARY_ESCAPE) whenever
the drive points back into the interval; motion *outward* across a bound
stays forbidden, which preserves the clamp behaviour.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

# Escape band for inward drive at the state bounds; has no effect on
# trajectories that stay inside [W_BOUNDARY_ESCAPE, 1 - W_BOUNDARY_ESCAPE].
W_BOUNDARY_ESCAPE = 1e-3

# Three-state snap targets for the fast behavioral model, selected by
# quantizing the applied write level at the midpoints between 0/2.5/4 V.
SNAP_MID_THRESHOLD = 1.25
SNAP_HIGH_THRESHOLD = 3.25


class DeviceModelKind(Enum):
    IDEAL_THREE_STATE = "ideal_three_state"
    LINEAR_DRIFT = "linear_drift"
    THRESHOLD_DRIFT = "threshold_drift"


@dataclass(frozen=True)
class MemristorParams:
    """Constants mapping (state, temperature) to resistance and voltage to drift.

    r_on/r_off bound the resistance range, v_th_pos/v_th_neg gate the
    threshold model, drift_rate scales state velocity in 1/(V*s), window_p
    is the window exponent, and temp_coeff/t_ref define the linear
    temperature factor on resistance.
    """

    r_on: float = 1_000.0
    r_off: float = 100_000.0
    v_th_pos: float = 0.3
    v_th_neg: float = -2.0
    drift_rate: float = 2_000.0
    window_p: int = 1
    temp_coeff: float = 5e-5
    t_ref: float = 293.15

    def __post_init__(self):
        if self.r_on <= 0:
            raise ValueError(f"r_on must be positive, got {self.r_on}")
        if self.r_off <= self.r_on:
            raise ValueError(f"r_off must exceed r_on, got {self.r_off} <= {self.r_on}")
        if self.v_th_pos < 0:
            raise ValueError(f"v_th_pos must be nonnegative, got {self.v_th_pos}")
        if self.drift_rate < 0:
            raise ValueError(f"drift_rate must be nonnegative, got {self.drift_rate}")
        if self.window_p < 1 or int(self.window_p) != self.window_p:
            raise ValueError(f"window_p must be a positive integer, got {self.window_p}")


@dataclass(frozen=True)
class MemristorState:
    """Normalized internal state; 0 means r_on, 1 means r_off."""

    w: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"state must lie in [0, 1], got {self.w}")


def reset_state(params: MemristorParams) -> MemristorState:
    """Post-erase state: fully low-resistance (w = 0)."""
    return MemristorState(0.0)


def resistance(state: MemristorState, params: MemristorParams, temperature: float) -> float:
    """Device resistance at the given temperature in kelvin."""
    return resistance_array(np.asarray(state.w), params, temperature).item()


def resistance_array(w, params: MemristorParams, temperature: float):
    """Vectorized resistance for an array of states."""
    base = params.r_on + np.asarray(w) * (params.r_off - params.r_on)
    return base * (1.0 + params.temp_coeff * (temperature - params.t_ref))


def step(state: MemristorState, v: float, dt: float, params: MemristorParams,
         kind: DeviceModelKind = DeviceModelKind.THRESHOLD_DRIFT) -> MemristorState:
    """Advance the state by one timestep under voltage v (positive terminal)."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    w = np.array([state.w])
    step_array(w, np.array([v]), dt, params, kind)
    return MemristorState(float(w[0]))


def step_array(w, v, dt, params: MemristorParams, kind: DeviceModelKind):
    """In-place vectorized state update; this is the kernel `step` wraps.

    IDEAL_THREE_STATE snaps instantly (dt-independent) to the state implied
    by the applied level; the drift kinds integrate one forward-Euler step.
    """
    if kind is DeviceModelKind.IDEAL_THREE_STATE:
        w[v <= params.v_th_neg] = 0.0
        programmed = v >= params.v_th_pos
        w[programmed & (v >= SNAP_HIGH_THRESHOLD)] = 1.0
        w[programmed & (v >= SNAP_MID_THRESHOLD) & (v < SNAP_HIGH_THRESHOLD)] = 0.5
        w[programmed & (v < SNAP_MID_THRESHOLD)] = 0.0
        return w

    active = np.ones_like(w, dtype=bool)
    if kind is DeviceModelKind.THRESHOLD_DRIFT:
        active = (v >= params.v_th_pos) | (v <= params.v_th_neg)

    # window evaluated off the boundary when the drive points inward
    arg = np.where(v > 0, np.maximum(w, W_BOUNDARY_ESCAPE),
                   np.minimum(w, 1.0 - W_BOUNDARY_ESCAPE))
    f = 1.0 - ((2.0 * arg - 1.0) ** 2) ** params.window_p
    dw = params.drift_rate * v * f * dt
    w += np.where(active, dw, 0.0)
    np.clip(w, 0.0, 1.0, out=w)
    return w


def integrate_pulse(state: MemristorState, v: float, duration: float, dt: float,
                    params: MemristorParams,
                    kind: DeviceModelKind = DeviceModelKind.THRESHOLD_DRIFT) -> MemristorState:
    """Apply a constant-voltage pulse by repeated stepping."""
    n_steps = int(round(duration / dt))
    w = np.array([state.w])
    vv = np.array([v])
    for _ in range(n_steps):
        step_array(w, vv, dt, params, kind)
    return MemristorState(float(w[0]))
