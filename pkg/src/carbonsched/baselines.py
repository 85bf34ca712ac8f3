"""Heuristic baseline schedulers: equal sharing and earliest deadline first.

Both are constructive per-slot policies: they never violate the per-EV
power limit, the station cap, or SoC limits, and they clip the final
slot's power so a session never overshoots its target SoC.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .ingest import ChargingSession
from .scheduler import ScheduleResult, StationConfig, result_from_power

_EPS = 1e-12


def _need_power_kw(session: ChargingSession, soc: float) -> float:
    """Power that would exactly reach the target SoC in one slot."""
    return max(session.soc_target - soc, 0.0) * session.capacity_kwh / session.delta


def _active(sessions: Sequence[ChargingSession], soc: np.ndarray, t: int) -> list[int]:
    return [i for i, s in enumerate(sessions)
            if s.t_arrival <= t < s.t_depart and soc[i] < s.soc_target - _EPS]


def _water_fill(budget: float, caps: list[float]) -> list[float]:
    """Split `budget` equally, redistributing the surplus of capped
    participants until a fixpoint."""
    alloc = [0.0] * len(caps)
    uncapped = list(range(len(caps)))
    remaining = budget
    while uncapped and remaining > _EPS:
        share = remaining / len(uncapped)
        newly = [i for i in uncapped if caps[i] <= share + _EPS]
        if not newly:
            for i in uncapped:
                alloc[i] = share
            return alloc
        for i in newly:
            alloc[i] = caps[i]
            remaining -= caps[i]
            uncapped.remove(i)
    return alloc


def equal_sharing(sessions: Sequence[ChargingSession], config: StationConfig,
                  carbon: np.ndarray | None = None) -> ScheduleResult:
    """Each slot, divide the station cap equally among active unfinished
    sessions by water-filling over the per-EV caps."""
    T = config.horizon_slots
    power = np.zeros((len(sessions), T))
    soc = np.array([s.soc_arrival for s in sessions])
    for t in range(T):
        act = _active(sessions, soc, t)
        if not act:
            continue
        caps = [min(sessions[i].power_max_kw, _need_power_kw(sessions[i], soc[i]))
                for i in act]
        alloc = _water_fill(config.power_cap_kw, caps)
        for i, u in zip(act, alloc):
            power[i, t] = u
            soc[i] += u * sessions[i].delta / sessions[i].capacity_kwh
    return result_from_power(sessions, power, config, carbon)


def earliest_deadline_first(sessions: Sequence[ChargingSession],
                            config: StationConfig,
                            carbon: np.ndarray | None = None) -> ScheduleResult:
    """Each slot, grant max power to active sessions in deadline order
    (ties: arrival, then id) until the station budget is exhausted."""
    T = config.horizon_slots
    power = np.zeros((len(sessions), T))
    soc = np.array([s.soc_arrival for s in sessions])
    for t in range(T):
        act = _active(sessions, soc, t)
        act.sort(key=lambda i: (sessions[i].t_depart, sessions[i].t_arrival,
                                sessions[i].id))
        budget = config.power_cap_kw
        for i in act:
            if budget <= _EPS:
                break
            u = min(sessions[i].power_max_kw, _need_power_kw(sessions[i], soc[i]),
                    budget)
            power[i, t] = u
            soc[i] += u * sessions[i].delta / sessions[i].capacity_kwh
            budget -= u
    return result_from_power(sessions, power, config, carbon)
