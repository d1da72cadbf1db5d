"""Space-clamped Hodgkin-Huxley membrane model.

Units follow the normalised squid-axon convention: conductances in mS/mm^2,
potentials in mV, capacitance in uF/mm^2, currents in uA/mm^2, time in ms.
The external current is given in units of ``current_scale`` (default
0.1 uA/mm^2, i.e. 10 uA/cm^2), so ``i_ext = 1.0`` drives the membrane into
periodic firing.  The ionic current enters as

    C_m dV/dt = current_scale * I_ext - [g_Na m^3 h (V - E_Na) + g_K n^4 (V - E_K) + g_L (V - E_L)]

and each gate x in (n, m, h) relaxes as dx/dt = alpha_x(V) (1 - x) - beta_x(V) x
with the classical rate expressions (resting potential near -65 mV).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import exprel

GATE_TOL = 1e-9


class IntegrationError(ArithmeticError):
    """The integrator produced a non-finite state."""

    def __init__(self, step: int, time: float):
        super().__init__(f"non-finite state at step {step} (t = {time:g} ms)")
        self.step = step
        self.time = time


@dataclass(frozen=True)
class HHParameters:
    g_na: float = 1.2
    g_k: float = 0.36
    g_l: float = 0.003
    e_na: float = 55.17
    e_k: float = -72.14
    e_l: float = -49.42
    c_m: float = 0.01
    i_ext: float = 1.0
    current_scale: float = 0.1

    def __post_init__(self):
        if min(self.g_na, self.g_k, self.g_l) <= 0:
            raise ValueError("conductances must be positive")
        if self.c_m <= 0:
            raise ValueError("c_m must be positive")


@dataclass(frozen=True)
class HHState:
    v: float
    n: float
    m: float
    h: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.n, self.m, self.h], dtype=float)

    @classmethod
    def resting(cls, v: float = -60.0) -> "HHState":
        """Membrane at ``v`` with every gate at its steady-state value."""
        an, bn, am, bm, ah, bh = hh_rates(v)
        return cls(float(v), float(an / (an + bn)), float(am / (am + bm)), float(ah / (ah + bh)))


def _lin_exp(x):
    # x / (1 - exp(-x)), equal to 1 at x = 0
    return 1.0 / exprel(-x)


def hh_rates(v):
    """Opening/closing rates ``(alpha_n, beta_n, alpha_m, beta_m, alpha_h, beta_h)`` in 1/ms.

    alpha_n and alpha_m have the form a*(V - V0) / (1 - exp(-(V - V0)/k)); at
    V = V0 they take their limits 0.1 and 1.0.
    """
    v = np.asarray(v, dtype=float)
    alpha_n = 0.1 * _lin_exp(0.1 * (v + 55.0))
    beta_n = 0.125 * np.exp(-0.0125 * (v + 65.0))
    alpha_m = _lin_exp(0.1 * (v + 40.0))
    beta_m = 4.0 * np.exp(-(v + 65.0) / 18.0)
    alpha_h = 0.07 * np.exp(-0.05 * (v + 65.0))
    beta_h = 1.0 / (1.0 + np.exp(-0.1 * (v + 35.0)))
    return alpha_n, beta_n, alpha_m, beta_m, alpha_h, beta_h


def ionic_current(params: HHParameters, v, n, m, h):
    return (
        params.g_na * m**3 * h * (v - params.e_na)
        + params.g_k * n**4 * (v - params.e_k)
        + params.g_l * (v - params.e_l)
    )


def hh_rhs(params: HHParameters, y: np.ndarray, clamp_v: bool = False) -> np.ndarray:
    v, n, m, h = y
    an, bn, am, bm, ah, bh = hh_rates(v)
    dv = 0.0 if clamp_v else (params.current_scale * params.i_ext - ionic_current(params, v, n, m, h)) / params.c_m
    return np.array([dv, an * (1 - n) - bn * n, am * (1 - m) - bm * m, ah * (1 - h) - bh * h])


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    v: np.ndarray
    n: np.ndarray
    m: np.ndarray
    h: np.ndarray
    max_gate_excursion: float = 0.0

    def state(self, i: int) -> HHState:
        return HHState(float(self.v[i]), float(self.n[i]), float(self.m[i]), float(self.h[i]))

    @property
    def final(self) -> HHState:
        return self.state(-1)

    def voltage_interpolant(self) -> CubicSpline:
        return CubicSpline(self.t, self.v)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "V", "n", "m", "h"])
            for row in zip(self.t, self.v, self.n, self.m, self.h):
                w.writerow([f"{x:.17g}" for x in row])
        return path


def hh_simulate(params: HHParameters, initial: HHState, t_end: float, dt: float = 0.01,
                clamp_v: bool = False) -> Trajectory:
    """Integrate with classical fixed-step RK4 from t = 0 to ``t_end``.

    Gates are clamped back into [0, 1] after every step; the largest excursion
    seen before clamping is reported on the trajectory.  With ``clamp_v`` the
    membrane potential is held fixed (voltage-clamp experiment).
    """
    if not dt > 0 or not t_end > 0:
        raise ValueError("dt and t_end must be positive")
    y0 = initial.as_array()
    if np.any(y0[1:] < 0) or np.any(y0[1:] > 1):
        raise ValueError("initial gate values must lie in [0, 1]")
    steps = int(round(t_end / dt))
    if not np.isclose(steps * dt, t_end, rtol=0, atol=1e-9 * max(1.0, t_end)):
        raise ValueError("t_end must be an integer multiple of dt")

    out = np.empty((steps + 1, 4))
    out[0] = y0
    y = y0
    excursion = 0.0
    for k in range(steps):
        # overflow is detected below and reported with its step
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = hh_rhs(params, y, clamp_v)
            k2 = hh_rhs(params, y + 0.5 * dt * k1, clamp_v)
            k3 = hh_rhs(params, y + 0.5 * dt * k2, clamp_v)
            k4 = hh_rhs(params, y + dt * k3, clamp_v)
            y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(k + 1, (k + 1) * dt)
        gates = y[1:]
        excursion = max(excursion, float(np.max(gates - 1.0)), float(np.max(-gates)))
        y[1:] = np.clip(gates, 0.0, 1.0)
        out[k + 1] = y
    t = np.arange(steps + 1) * dt
    return Trajectory(t, out[:, 0], out[:, 1], out[:, 2], out[:, 3], max(excursion, 0.0))


# Regression window: [lead, lead + window] ms of the simulation, mapped to [0, 1].
HH_LEAD = 5.0
HH_WINDOW = 60.0
HH_DT = 0.01
HH_HIGH_CURRENT = 1.0
HH_LOW_CURRENT = 1.05


@lru_cache(maxsize=8)
def _hh_traces(lead: float, window: float, dt: float, i_high: float, i_low: float):
    initial = HHState.resting()
    high = hh_simulate(HHParameters(i_ext=i_high), initial, lead + window, dt)
    low = hh_simulate(HHParameters(i_ext=i_low), initial, lead + window, dt)
    return high, low


class _NormalisedVoltage:
    """V(t) of a trajectory as a function of normalised window time."""

    def __init__(self, traj: Trajectory, lead: float, window: float):
        self._spline = CubicSpline(traj.t, traj.v, extrapolate=False)
        self.lead = lead
        self.window = window
        self.domain = (-lead / window, (traj.t[-1] - lead) / window)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return self._spline(self.lead + s * self.window)


def hh_benchmark(lead: float = HH_LEAD, window: float = HH_WINDOW, dt: float = HH_DT,
                 i_high: float = HH_HIGH_CURRENT, i_low: float = HH_LOW_CURRENT):
    """Benchmark pair of membrane potentials at two external currents.

    Both runs start from the same resting state at -60 mV.  Time is
    normalised so the regression window is [0, 1]; the ``lead`` ms before
    the window keep delayed evaluations inside the simulated range.
    """
    from .benchmarks import HH_NAME, BenchmarkPair

    high, low = _hh_traces(lead, window, dt, i_high, i_low)
    f_h = _NormalisedVoltage(high, lead, window)
    f_l = _NormalisedVoltage(low, lead, window)
    return BenchmarkPair(
        HH_NAME, f_h, f_l, (0.0, 1.0), (20, 300),
        description=f"V_m at I_ext = {i_high} (high) and {i_low} (low), {window:g} ms window",
        f_l_domain=f_l.domain,
    )


def hh_fidelity_pair(t_h, t_l, seed: int = 0, **kwargs):
    """Sample the two Hodgkin-Huxley traces at normalised times.

    The simulation is deterministic, so ``seed`` only exists for interface
    symmetry with the other generators.
    """
    from ..fusion import FidelityPair

    bench = hh_benchmark(**kwargs)
    t_h = np.asarray(t_h, dtype=float).ravel()
    t_l = np.asarray(t_l, dtype=float).ravel()
    return FidelityPair(t_h, bench.f_h(t_h), t_l, bench.f_l(t_l), bench.domain, bench.f_l,
                        bench.f_l_domain)
