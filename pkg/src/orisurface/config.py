"""Experiment configuration: a single JSON file with a strict schema.

Unknown keys are rejected with their full path, missing required fields name
the field, and the normalized form (all defaults filled in, keys sorted) is
what gets echoed into result sidecars so an experiment is reproducible from
its outputs. The ORI_SEED environment variable overrides the config seed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass

from .cpg import CpgParams, PARAM_BOUNDS
from .dynamics import ContactParams, ObjectSpec, SimConfig
from .kinematics import CanfieldGeometry
from .surface import ManipulationMode, ModuleGrid, parse_mode


class ConfigError(ValueError):
    pass


_SECTION_TYPES = {
    "grid": ModuleGrid,
    "sim": SimConfig,
    "contact": ContactParams,
    "geometry": CanfieldGeometry,
}
_TOP_KEYS = {"object", "mode", "cpg", "campaign", "grid", "sim", "contact",
             "geometry", "output"}
_OBJECT_KEYS = {"shape", "size", "mass"}
_OUTPUT_KEYS = {"trajectory", "metrics", "sidecar"}


def _check_keys(d, allowed, path):
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown key '{path}{key}'")


def _build_section(name, data):
    cls = _SECTION_TYPES[name]
    fields = {f.name: f for f in dataclasses.fields(cls)}
    _check_keys(data, fields, f"{name}.")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{name}' section: {exc}") from exc


@dataclass
class ExperimentConfig:
    obj_spec: ObjectSpec
    mode: ManipulationMode
    params: CpgParams | None
    campaign_path: str | None
    grid: ModuleGrid
    sim: SimConfig
    contact: ContactParams
    geom: CanfieldGeometry
    output: dict

    @staticmethod
    def from_dict(doc, base_dir="."):
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
        _check_keys(doc, _TOP_KEYS, "")

        if "object" not in doc:
            raise ConfigError("missing required field 'object'")
        obj = doc["object"]
        if not isinstance(obj, dict):
            raise ConfigError("'object' must be an object with shape/size/mass")
        _check_keys(obj, _OBJECT_KEYS, "object.")
        for field in ("size", "mass"):
            if field not in obj:
                raise ConfigError(f"missing required field 'object.{field}'")
        try:
            obj_spec = ObjectSpec(size=tuple(obj["size"]), mass=obj["mass"],
                                  shape=obj.get("shape", "box"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid 'object' section: {exc}") from exc

        if "mode" not in doc:
            raise ConfigError("missing required field 'mode'")
        try:
            mode = parse_mode(doc["mode"])
        except ValueError as exc:
            raise ConfigError(f"invalid 'mode': {exc}") from exc

        params = None
        campaign_path = None
        if "cpg" in doc:
            cpg = doc["cpg"]
            if not isinstance(cpg, dict):
                raise ConfigError("'cpg' must be an object of parameter values")
            _check_keys(cpg, PARAM_BOUNDS, "cpg.")
            for name in PARAM_BOUNDS:
                if name not in cpg:
                    raise ConfigError(f"missing required field 'cpg.{name}'")
            try:
                params = CpgParams(**cpg)
            except ValueError as exc:
                raise ConfigError(f"invalid 'cpg' section: {exc}") from exc
        elif "campaign" in doc:
            campaign_path = os.path.join(base_dir, doc["campaign"])
            if not os.path.exists(campaign_path):
                raise ConfigError(f"campaign file not found: {campaign_path}")
        else:
            raise ConfigError("missing required field 'cpg' (or 'campaign')")

        sections = {}
        for name in _SECTION_TYPES:
            data = doc.get(name, {})
            if not isinstance(data, dict):
                raise ConfigError(f"'{name}' must be an object")
            sections[name] = _build_section(name, data)

        output = doc.get("output", {})
        if not isinstance(output, dict):
            raise ConfigError("'output' must be an object")
        _check_keys(output, _OUTPUT_KEYS, "output.")

        seed_env = os.environ.get("ORI_SEED")
        if seed_env is not None:
            try:
                sections["sim"] = dataclasses.replace(sections["sim"], seed=int(seed_env))
            except ValueError as exc:
                raise ConfigError(f"ORI_SEED must be an integer: {exc}") from exc

        return ExperimentConfig(obj_spec=obj_spec, mode=mode, params=params,
                                campaign_path=campaign_path, grid=sections["grid"],
                                sim=sections["sim"], contact=sections["contact"],
                                geom=sections["geometry"], output=dict(output))

    @staticmethod
    def load(path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return ExperimentConfig.from_dict(doc, base_dir=os.path.dirname(path) or ".")

    def resolve_params(self) -> CpgParams:
        if self.params is not None:
            return self.params
        from .optimizer import Campaign
        return Campaign.from_json(self.campaign_path).best_params()

    def normalized(self):
        """Canonical dict with every default filled in."""
        doc = {
            "object": self.obj_spec.as_dict(),
            "mode": self.mode.label,
            "cpg": self.resolve_params().as_dict(),
            "grid": dataclasses.asdict(self.grid),
            "sim": dataclasses.asdict(self.sim),
            "contact": dataclasses.asdict(self.contact),
            "geometry": {**dataclasses.asdict(self.geom),
                         "leg_azimuths": list(self.geom.leg_azimuths)},
            "output": dict(self.output),
        }
        return doc

    def normalized_json(self):
        return json.dumps(self.normalized(), indent=2, sort_keys=True)


def object_spec_from_string(text) -> ObjectSpec:
    """Parse 'box:0.3x0.3x0.01:0.254' (shape : LxWxH meters : mass kg)."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError("object spec must look like box:0.3x0.3x0.01:0.254")
    shape, dims, mass = parts
    try:
        size = tuple(float(d) for d in dims.split("x"))
        return ObjectSpec(size=size, mass=float(mass), shape=shape)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad object spec '{text}': {exc}") from exc


def cell_hash(doc) -> str:
    """Stable identity of one sweep cell: hash of its canonical config."""
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:12]
