"""Simulator configuration: one JSON document, every field defaulted.

An empty document (or no file at all) resolves to the reference experiment:
the three-sub-cell cell with calibrated device parameters, the standard bin
table, and the standard cycle timing. Sections mirror the module types:

    {
      "device":   {"r_on": ..., "kind": "threshold_drift", ...},
      "topology": {"n_subcells": 3, "r_series": 500, "wiring": {...}, ...},
      "encoder":  {"bins": [[0.0, 0.3, "222"], ...], "v_th": 0.3, ...},
      "cycle":    {"v_reset": 4.0, "dt": 5e-7, ...},
      "noise":    {"source_noise_sigma": 0.0, "rng_seed": 0}
    }

Unknown keys anywhere are an error (reported with their full path), and
JSON syntax errors surface with line/column. The resolved configuration
hashes deterministically, so written-out defaults and an empty file
produce the same hash.
"""

import dataclasses
import hashlib
import json

from . import controller as ctl
from . import device as dev
from . import encoder as enc
from . import network as net


class ConfigError(Exception):
    """Configuration file failed to parse or referenced unknown/invalid fields."""


@dataclasses.dataclass
class SimConfig:
    params: dev.MemristorParams
    kind: dev.DeviceModelKind
    topology: net.CellTopology
    table: enc.BinTable
    enc_cfg: enc.EncoderConfig
    cycle: ctl.CycleConfig
    noise: ctl.NoiseConfig

    def make_cell(self):
        return ctl.make_cell(self.topology, self.params, self.kind)

    def resolved(self):
        """Fully-defaulted plain-dict form, suitable for hashing/manifests."""
        return {
            "device": {
                **{f.name: getattr(self.params, f.name)
                   for f in dataclasses.fields(self.params)},
                "kind": self.kind.value,
            },
            "topology": {
                "n_subcells": self.topology.n_subcells,
                "r_series": list(self.topology.per_subcell("r_series")),
                "r_write": list(self.topology.per_subcell("r_write")),
                "r_ground": self.topology.r_ground,
                "wiring": dataclasses.asdict(self.topology.wiring),
            },
            "encoder": {
                "bins": [[row.a1, row.a2, str(row.code)] for row in self.table.rows],
                **{f.name: (list(getattr(self.enc_cfg, f.name))
                            if f.name == "logic0_band"
                            else getattr(self.enc_cfg, f.name))
                   for f in dataclasses.fields(self.enc_cfg)},
            },
            "cycle": {f.name: getattr(self.cycle, f.name)
                      for f in dataclasses.fields(self.cycle)},
            "noise": {f.name: getattr(self.noise, f.name)
                      for f in dataclasses.fields(self.noise)},
        }


def default_config() -> SimConfig:
    return SimConfig(
        params=dev.MemristorParams(),
        kind=dev.DeviceModelKind.THRESHOLD_DRIFT,
        topology=net.CellTopology(),
        table=enc.DEFAULT_BIN_TABLE,
        enc_cfg=enc.EncoderConfig(),
        cycle=ctl.CycleConfig(),
        noise=ctl.NoiseConfig(),
    )


def _take(section, path, known):
    unknown = set(section) - set(known)
    if unknown:
        raise ConfigError(f"unknown key {path}.{sorted(unknown)[0]}")


def _build(cls, section, path, extra_known=()):
    known = [f.name for f in dataclasses.fields(cls)] + list(extra_known)
    _take(section, path, known)
    kwargs = {k: v for k, v in section.items() if k not in extra_known}
    try:
        return cls(**kwargs)
    except (ValueError, TypeError, net.InvalidTopology) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_device(section):
    kind = dev.DeviceModelKind.THRESHOLD_DRIFT
    if "kind" in section:
        try:
            kind = dev.DeviceModelKind(section["kind"])
        except ValueError:
            names = [k.value for k in dev.DeviceModelKind]
            raise ConfigError(f"device.kind must be one of {names}, "
                              f"got {section['kind']!r}") from None
    params = _build(dev.MemristorParams, section, "device", extra_known=("kind",))
    return params, kind


def _parse_topology(section):
    wiring = net.CellWiring()
    if "wiring" in section:
        wiring = _build(net.CellWiring, section["wiring"], "topology.wiring")
    section = {k: v for k, v in section.items() if k != "wiring"}
    known = ("n_subcells", "r_series", "r_write", "r_ground")
    _take(section, "topology", known)
    try:
        return net.CellTopology(wiring=wiring, **section)
    except (ValueError, net.InvalidTopology) as exc:
        raise ConfigError(f"topology: {exc}") from None


def _parse_encoder(section):
    table = enc.DEFAULT_BIN_TABLE
    if "bins" in section:
        try:
            rows = []
            for entry in section["bins"]:
                a1, a2, code = entry
                rows.append(enc.BinRow(float(a1), float(a2),
                                       enc.TernaryCode.from_string(str(code))))
            table = enc.BinTable(tuple(rows))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"encoder.bins: {exc}") from None
    section = {k: v for k, v in section.items() if k != "bins"}
    if "logic0_band" in section:
        section["logic0_band"] = tuple(section["logic0_band"])
    cfg = _build(enc.EncoderConfig, section, "encoder")
    return table, cfg


def load_config(path=None) -> SimConfig:
    """Load a config file; None or an empty document yields the defaults."""
    if path is None:
        return default_config()
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not text.strip():
        return default_config()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    _take(data, "config", ("device", "topology", "encoder", "cycle", "noise"))

    params, kind = _parse_device(data.get("device", {}))
    topology = _parse_topology(data.get("topology", {}))
    table, enc_cfg = _parse_encoder(data.get("encoder", {}))
    cycle = _build(ctl.CycleConfig, data.get("cycle", {}), "cycle")
    noise = _build(ctl.NoiseConfig, data.get("noise", {}), "noise")
    return SimConfig(params, kind, topology, table, enc_cfg, cycle, noise)


def config_hash(config: SimConfig) -> str:
    """Stable hash of the fully-resolved configuration."""
    canonical = json.dumps(config.resolved(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
