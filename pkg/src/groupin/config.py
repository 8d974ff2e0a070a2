"""Run configuration from TOML files and command-line overrides."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .centralized import MatchScoreVector, MddParams
from .cluster import ClusterParams
from .decentralized import UprParams
from .pipeline import RunConfig
from .preprocess import NormalizationConfig


class ConfigError(ValueError):
    pass


# key -> expected type; keys mirror the CLI flags with underscores
KEYS: dict[str, type] = {
    "sample_secs": float,
    "interval_secs": float,
    "origin": float,
    "rssi_min": float,
    "rssi_max": float,
    "global_ref_rssi": float,
    "agg": str,
    "scheme": str,
    "matcher": str,
    "zeta": float,
    "upsilon": list,
    "omega": float,
    "cluster": str,
    "min_edge_weight": float,
    "threshold": float,
    "cluster_distance": float,
    "lateness": float,
}


def load_toml(path: str | Path) -> dict[str, Any]:
    """Read a flat TOML table; a ``[run]`` table is accepted as well."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    if isinstance(data.get("run"), dict):
        data = {**{k: v for k, v in data.items() if k != "run"}, **data["run"]}
    return data


def _coerce(key: str, value: Any) -> Any:
    kind = KEYS[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        return float(value)
    if kind is list:
        if isinstance(value, str):
            value = [x for x in value.split(",") if x.strip()]
        try:
            return [float(x) for x in value]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key} must be a list of numbers") from exc
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string, got {value!r}")
    return value


def resolve_scheme(scheme: str, matcher: Optional[str]) -> str:
    if scheme in ("centralized-wfm", "centralized-mdd", "decentralized"):
        if matcher and scheme.startswith("centralized") and scheme != f"centralized-{matcher}":
            raise ConfigError(f"scheme {scheme} conflicts with matcher {matcher}")
        return scheme
    if scheme == "centralized":
        m = matcher or "wfm"
        if m not in ("wfm", "mdd"):
            raise ConfigError(f"matcher must be wfm or mdd, got {m!r}")
        return f"centralized-{m}"
    raise ConfigError(f"unknown scheme {scheme!r}")


def build_run_config(file_values: Mapping[str, Any], overrides: Mapping[str, Any]) -> RunConfig:
    """Merge file values with overrides (overrides win) into a RunConfig."""
    merged: dict[str, Any] = {}
    for source in (file_values, overrides):
        for key, value in source.items():
            if value is None:
                continue
            if key not in KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = _coerce(key, value)
    try:
        norm = NormalizationConfig(
            mode=merged.get("agg", "median"),
            rssi_min=merged.get("rssi_min", -100.0),
            rssi_max=merged.get("rssi_max", -40.0),
            global_ref_rssi=merged.get("global_ref_rssi", -59.0),
        )
        cluster = ClusterParams(
            algorithm=merged.get("cluster", "hcs"),
            min_edge_weight=merged.get("min_edge_weight"),
            threshold=merged.get("threshold", 0.5),
            cluster_distance=merged.get("cluster_distance", 0.2),
        )
        kwargs: dict[str, Any] = dict(
            sample_seconds=merged.get("sample_secs", 5.0),
            interval_seconds=merged.get("interval_secs", 120.0),
            origin=merged.get("origin"),
            normalization=norm,
            scheme=resolve_scheme(merged.get("scheme", "centralized"), merged.get("matcher")),
            cluster=cluster,
            lateness=merged.get("lateness"),
        )
        if "upsilon" in merged:
            kwargs["upsilon"] = MatchScoreVector(tuple(merged["upsilon"]))
        if "zeta" in merged:
            kwargs["mdd"] = MddParams(merged["zeta"])
        if "omega" in merged:
            kwargs["upr"] = UprParams(merged["omega"])
        return RunConfig(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
