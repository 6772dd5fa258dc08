"""Built-in V2X service-requirement profiles.

The profile table ships as a data file (``data/profiles.json``)
transcribing the 3GPP enhanced-V2X service requirements (TS 22.186,
highest degree of automation): per-scenario delay budgets, datarate
budgets, minimum communication ranges, and reliability targets.  A dash in
the source table becomes ``null``/``None``.  Rows whose datarate is split
into uplink/downlink carry the uplink figure as the budget (the simulated
link is an uplink) and keep the downlink figure for reference; rows
sharing a category and description (the Extended Sensors sub-rows) are
disambiguated by their minimum range.

The infrastructure sensor-sharing row — Advanced Driving / Info sharing
between UEs and RSUs, 100 ms and 50 Mbps — is flagged ``teleoperated``;
it is the headline budget a remote-perception uplink must meet.
"""

from __future__ import annotations

import json
from importlib import resources

from .errors import ConfigError
from .netsim import RequirementProfile

__all__ = ["PROFILES", "get_profile", "teleoperated_profile"]


def _load_profiles() -> tuple[RequirementProfile, ...]:
    raw = resources.files("tdbench").joinpath("data/profiles.json").read_text("utf-8")
    rows = json.loads(raw)["profiles"]
    profiles = []
    for row in rows:
        profiles.append(
            RequirementProfile(
                name=row["name"],
                category=row["category"],
                description=row["description"],
                entities=row["entities"],
                max_delay_ms=None if row["max_delay_ms"] is None else float(row["max_delay_ms"]),
                min_datarate_mbps=None if row["datarate_mbps"] is None else float(row["datarate_mbps"]),
                datarate_dl_mbps=None if row["datarate_dl_mbps"] is None else float(row["datarate_dl_mbps"]),
                min_range_m=None if row["min_range_m"] is None else float(row["min_range_m"]),
                reliability_pct=None if row["reliability_pct"] is None else float(row["reliability_pct"]),
                teleoperated=bool(row["teleoperated"]),
            )
        )
    names = [p.name for p in profiles]
    if len(set(names)) != len(names):
        raise ConfigError("profile table contains duplicate names")
    return tuple(profiles)


PROFILES: tuple[RequirementProfile, ...] = _load_profiles()


def get_profile(name: str) -> RequirementProfile:
    """Look a profile up by exact name; raises with the known names."""
    for profile in PROFILES:
        if profile.name == name:
            return profile
    known = ", ".join(p.name for p in PROFILES)
    raise ConfigError(f"unknown profile {name!r}; known profiles: {known}")


def teleoperated_profile() -> RequirementProfile:
    """The infrastructure sensor-sharing row used as the headline budget."""
    for profile in PROFILES:
        if profile.teleoperated:
            return profile
    raise ConfigError("no teleoperated profile defined")
