"""Energy-delivery-quality and emission metrics, plus policy comparison."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .errors import UnknownBaseline, ZeroDemand
from .ingest import ChargingSession
from .scheduler import ScheduleResult

_EPS = 1e-12


@dataclass(frozen=True)
class RunReport:
    """Aggregate outcome of one policy run."""

    policy: str
    total_emissions_kg: float
    emissions_per_session_kg: float
    edq_station: float
    edq_session: float
    energy_delivered_kwh: float
    n_sessions: int
    per_season: dict[str, dict] | None = None

    def to_dict(self) -> dict:
        d = {
            "policy": self.policy,
            "total_emissions_kg": self.total_emissions_kg,
            "emissions_per_session_kg": self.emissions_per_session_kg,
            "edq_station": self.edq_station,
            "edq_session": self.edq_session,
            "energy_delivered_kwh": self.energy_delivered_kwh,
            "n_sessions": self.n_sessions,
        }
        if self.per_season is not None:
            d["per_season"] = self.per_season
        return d


def edq_station(result: ScheduleResult, sessions: Sequence[ChargingSession]) -> float:
    """Station-level delivery quality: total delivered SoC over total
    requested SoC (weights sessions by their SoC delta)."""
    delivered = sum(abs(result.soc[i, -1] - s.soc_arrival)
                    for i, s in enumerate(sessions))
    requested = sum(abs(s.soc_target - s.soc_arrival) for s in sessions)
    if requested <= _EPS:
        raise ZeroDemand("no session requests any energy")
    return float(delivered / requested)


def edq_session(result: ScheduleResult, sessions: Sequence[ChargingSession]) -> float:
    """Mean per-session delivery quality; zero-demand sessions count as 1."""
    if not sessions:
        return 1.0
    ratios = []
    for i, s in enumerate(sessions):
        req = abs(s.soc_target - s.soc_arrival)
        if req <= _EPS:
            ratios.append(1.0)
        else:
            ratios.append(abs(result.soc[i, -1] - s.soc_arrival) / req)
    return float(np.mean(ratios))


def edq_station_energy(result: ScheduleResult,
                       sessions: Sequence[ChargingSession]) -> float:
    """Energy-weighted station EDQ (kWh delivered / kWh requested). Not one
    of the standard two metrics; weights sessions by energy instead of SoC."""
    delivered = sum(abs(result.soc[i, -1] - s.soc_arrival) * s.capacity_kwh
                    for i, s in enumerate(sessions))
    requested = sum(s.demand_kwh for s in sessions)
    if requested <= _EPS:
        raise ZeroDemand("no session requests any energy")
    return float(delivered / requested)


def make_report(policy: str, result: ScheduleResult,
                sessions: Sequence[ChargingSession],
                per_season: dict[str, dict] | None = None) -> RunReport:
    n = len(sessions)
    return RunReport(
        policy=policy,
        total_emissions_kg=result.emissions_kg,
        emissions_per_session_kg=result.emissions_kg / n if n else 0.0,
        edq_station=edq_station(result, sessions) if n else 1.0,
        edq_session=edq_session(result, sessions),
        energy_delivered_kwh=result.delivered_kwh(sessions),
        n_sessions=n,
        per_season=per_season,
    )


def compare(reports: Sequence[RunReport], baseline: str) -> list[dict]:
    """Per-policy comparison rows with percent deltas vs `baseline`.

    Deltas are 100*(base - x)/base, computed from unrounded values, so a
    positive emissions delta is a reduction.
    """
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    base = next((r for r in reports if r.policy == baseline), None)
    if base is None:
        raise UnknownBaseline(baseline)

    def pct(b: float, x: float) -> float:
        return 100.0 * (b - x) / b if abs(b) > _EPS else 0.0

    rows = []
    for r in reports:
        rows.append({
            "policy": r.policy,
            "emissions_per_session_kg": r.emissions_per_session_kg,
            "total_emissions_kg": r.total_emissions_kg,
            "edq_station": r.edq_station,
            "edq_session": r.edq_session,
            "emissions_reduction_pct": pct(base.total_emissions_kg,
                                           r.total_emissions_kg),
            "edq_station_change_pct": pct(base.edq_station, r.edq_station),
        })
    return rows


_TABLE_COLS = ("policy", "emissions_per_session_kg", "edq_station", "edq_session",
               "emissions_reduction_pct")


def comparison_csv(rows: Sequence[dict], out: IO[str]) -> None:
    w = csv.DictWriter(out, fieldnames=list(rows[0].keys()))
    w.writeheader()
    w.writerows(rows)


def format_table(rows: Sequence[dict]) -> str:
    """Aligned-text comparison table, three decimals."""
    header = [c for c in _TABLE_COLS]
    body = [[r["policy"]] + [f"{r[c]:.3f}" for c in header[1:]] for r in rows]
    widths = [max(len(h), *(len(b[j]) for b in body)) for j, h in enumerate(header)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header)]
    lines.extend(fmt.format(*b) for b in body)
    return "\n".join(lines)
