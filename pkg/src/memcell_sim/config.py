"""JSON run configuration: cell parameters, solver policy, output paths.

The document mirrors the CellConfig field names in snake_case; a
bundled defaults file documents every knob. Any subset of keys may be
given; missing ones fall back to the defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib.resources import files

from .circuit import StepPolicy
from .device import MosParams
from .leak import LeakModel
from .memcell import CellConfig, ConfigError, PulseWidths


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation needs: the cell, the integrator
    policy, an optional output directory, and a seed reserved for future
    stochastic paths."""

    cell: CellConfig = field(default_factory=CellConfig)
    policy: StepPolicy = field(default_factory=StepPolicy)
    out_dir: str = "."
    seed: int = 0


def _build_switch(d: dict) -> MosParams:
    return MosParams(
        mu0=d["mu0"], tox=d["tox"], w_eff=d["w_eff"], l_eff=d["l_eff"],
        vt0=d["vt0"], gamma=d.get("gamma", 0.0),
        phi_f_abs2=d.get("phi_f_abs2", 0.7), lam=d.get("lambda", 0.0),
        polarity=d.get("polarity", "nmos"))


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def default_document() -> dict:
    text = files("memcell_sim.data").joinpath("default_config.json").read_text()
    return json.loads(text)


def load_config(path: str | None = None) -> RunConfig:
    """Build a RunConfig from a JSON file merged over the bundled
    defaults; ``path=None`` yields the defaults themselves. Validation
    errors carry the offending field name."""
    doc = default_document()
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        doc = _merge(doc, user)
    try:
        c = doc["cell"]
        cell = CellConfig(
            c_primary=c["c_primary"], c_secondary=c["c_secondary"],
            r0=c["r0"], r1=c["r1"], supply_rail=c["supply_rail"],
            control_high=c["control_high"],
            switch_params=_build_switch(c["switch"]),
            leak=LeakModel(g0=c["leak"]["g0"], g1=c["leak"]["g1"]),
            pulse=PulseWidths(**c["pulse"]),
            refresh_period=c["refresh_period"],
            storage_time=c["storage_time"], frame_rate=c["frame_rate"],
            opamp_gbw=c.get("opamp_gbw"))
        s = doc["solver"]
        policy = StepPolicy(dt_fine=s["dt_fine"], dt_coarse=s["dt_coarse"],
                            window=s["event_window"], tol=s["tol"],
                            max_newton=s["max_newton"])
    except KeyError as exc:
        raise ConfigError(f"missing config key: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    return RunConfig(cell=cell, policy=policy,
                     out_dir=doc.get("out_dir", "."),
                     seed=doc.get("seed", 0))
