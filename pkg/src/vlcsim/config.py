"""Experiment configuration: INI sections, documented defaults, env overrides.

Every key may be overridden by an environment variable named
``VLCSIM_<SECTION>_<KEY>`` in upper case, e.g. ``VLCSIM_SIMULATION_WORKERS=4``.
"""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass, field

from vlcsim.analysis import ReceiverTemplate
from vlcsim.geometry import NoiseModel, RoomConfig, direction_from_angles
from vlcsim.mappers import parse_modulation
from vlcsim.montecarlo import SimSpec, StopRule
from vlcsim.system import ReceiverConfig, SchemeSpec, SystemConfig, TransmitterConfig

ENV_PREFIX = "VLCSIM_"


class ConfigError(Exception):
    pass


def _floats(text: str) -> tuple:
    """'a,b,c' or 'start:step:stop' (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[1] <= 0:
            raise ValueError("ranges are start:step:stop with step > 0")
        start, step, stop = parts
        n = int(round((stop - start) / step)) + 1
        if n < 1:
            raise ValueError("empty range")
        return tuple(round(start + k * step, 12) for k in range(n))
    return tuple(float(p) for p in text.split(",") if p.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "auto", "center") else float(text)


def _int(text: str) -> int:
    """Integer, also accepting exponent notation such as 1e7."""
    text = text.strip()
    if any(c in text for c in ".eE"):
        value = float(text)
        if not value.is_integer():
            raise ValueError(f"expected an integer, got {text!r}")
        return int(value)
    return int(text)


# section -> key -> (parser, default)
SCHEMA = {
    "room": {"length_m": (float, 5.0), "width_m": (float, 5.0), "height_m": (float, 3.5)},
    "transmitter": {
        "d_tx": (float, 1.0),
        "height": (float, 3.0),
        "center_x": (_opt_float, None),
        "center_y": (_opt_float, None),
        "half_power_semiangle_deg": (float, 60.0),
        "elevation_deg": (float, -90.0),
        "azimuth_deg": (float, 0.0),
        "placement": (str, "auto"),
        "led_power_w": (float, 1.0),
    },
    "receiver": {
        "d_rx": (float, 0.1),
        "height": (float, 0.8),
        "center_x": (_opt_float, None),
        "center_y": (_opt_float, None),
        "area_m2": (float, 1e-4),
        "fov_deg": (float, 85.0),
        "responsivity_a": (float, 1.0),
        "elevation_deg": (float, 90.0),
        "azimuth_deg": (float, 0.0),
    },
    "noise": {
        "q": (float, 1.602e-19),
        "ambient_current_ia": (float, 5.84e-3),
        "noise_bw_factor_i2": (float, 0.562),
        "symbol_interval_t": (float, 5e-8),
        "amp_bandwidth_ba": (float, 5e7),
        "amp_noise_density_rho": (float, 5e-12),
    },
    "scheme": {"scheme": (str, "qcm"), "modulation": (str, "qam-4"), "rotation_deg": (float, 0.0)},
    "ofdm": {"n_subcarriers": (_int, 8), "detector": (str, "zf"), "structured": (_bool, False)},
    "simulation": {
        "eb_n0_db": (_floats, _floats("30:1:44")),
        "fixed_eb_n0_db": (float, 35.0),
        "d_tx_list": (_floats, (0.2, 1.0, 2.0, 3.0, 4.0, 4.8)),
        "rotation_list_deg": (_floats, _floats("0:5:90")),
        "min_bit_errors": (_int, 200),
        "max_bits": (_int, 10_000_000),
        "seed": (_int, 0),
        "workers": (_int, 1),
    },
    "analysis": {
        "target_ber": (float, 1e-5),
        "resolution_m": (float, 0.025),
        "method": (str, "local"),
        "eta_list": (_floats, (0, 1, 2, 3, 4, 5, 6)),
        "placements": (lambda t: tuple(p.strip() for p in t.split(",") if p.strip()), ("p1", "p2")),
    },
}


def _key_lines(text: str) -> dict:
    """(section, key) -> 1-based line number, for diagnostics."""
    out, section = {}, None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
        elif section and s and s[0] not in "#;":
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            out[(section, key)] = n
    return out


def load_values(path=None, environ=None) -> dict:
    """Raw typed values per section after defaults, file and environment."""
    values = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
    sources = []
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            parser.read_string(text, source=str(path))
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: expected a [section] header before {exc.line.strip()!r}") from exc
        except configparser.ParsingError as exc:
            lineno, line = exc.errors[0]
            raise ConfigError(f"{path}:{lineno}: cannot parse line {line}") from exc
        except configparser.Error as exc:
            lineno = getattr(exc, "lineno", None)
            where = f"{path}:{lineno}" if lineno else str(path)
            raise ConfigError(f"{where}: {str(exc).splitlines()[0]}") from exc
        lines = _key_lines(text)
        for sec in parser.sections():
            sec_l = sec.lower()
            if sec_l not in SCHEMA:
                raise ConfigError(f"{path}: unknown section [{sec}]")
            for key, raw in parser.items(sec):
                sources.append((sec_l, key.lower(), raw, f"{path}:{lines.get((sec_l, key.lower()), '?')}"))
    env = os.environ if environ is None else environ
    for name, raw in sorted(env.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX) :].lower()
        sec = next((s for s in SCHEMA if rest.startswith(s + "_")), None)
        if sec is None:
            raise ConfigError(f"environment variable {name}: unknown section")
        sources.append((sec, rest[len(sec) + 1 :], raw, f"environment variable {name}"))
    for sec, key, raw, where in sources:
        if key not in SCHEMA[sec]:
            raise ConfigError(f"{where}: unknown key '{key}' in [{sec}]")
        try:
            values[sec][key] = SCHEMA[sec][key][0](raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{where}: bad value {raw!r} for {sec}.{key}: {exc}") from exc
    return values


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig
    scheme: SchemeSpec
    values: dict = field(repr=False)

    @property
    def sim(self) -> dict:
        return self.values["simulation"]

    @property
    def analysis(self) -> dict:
        return self.values["analysis"]

    def sim_spec(self, scheme: SchemeSpec | None = None, eb_n0_db=None) -> SimSpec:
        s = self.sim
        return SimSpec(
            scheme or self.scheme,
            self.system,
            tuple(eb_n0_db if eb_n0_db is not None else s["eb_n0_db"]),
            StopRule(s["min_bit_errors"], s["max_bits"]),
            s["seed"],
            s["workers"],
        )

    def ofdm_scheme(self) -> SchemeSpec:
        base = self.scheme.scheme
        if base not in ("qcm", "dcm"):
            raise ConfigError(f"OFDM runs need scheme qcm or dcm, got {base}")
        o = self.values["ofdm"]
        try:
            return SchemeSpec(
                base + "-ofdm", self.scheme.modulation, 0.0, o["n_subcarriers"], o["detector"], o["structured"]
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _center(x, y):
    if x is None and y is None:
        return None
    if x is None or y is None:
        raise ValueError("center_x and center_y must be given together")
    return (x, y)


def build(values: dict) -> ExperimentConfig:
    try:
        room = RoomConfig(**values["room"])
        t = values["transmitter"]
        tx = TransmitterConfig(
            d_tx=t["d_tx"],
            height=t["height"],
            center=_center(t["center_x"], t["center_y"]),
            half_power_semiangle_deg=t["half_power_semiangle_deg"],
            normal=tuple(direction_from_angles(t["elevation_deg"], t["azimuth_deg"])),
            placement=t["placement"],
            led_power_w=t["led_power_w"],
        )
        if tx.placement not in ("auto", "qcm-grid", "p1", "p2"):
            raise ValueError(f"placement must be auto, qcm-grid, p1 or p2, got {tx.placement!r}")
        if not tx.led_power_w > 0:
            raise ValueError("led_power_w must be > 0")
        r = values["receiver"]
        template = ReceiverTemplate(
            r["d_rx"],
            r["height"],
            r["area_m2"],
            r["fov_deg"],
            r["responsivity_a"],
            tuple(direction_from_angles(r["elevation_deg"], r["azimuth_deg"])),
        )
        rx = ReceiverConfig(template, _center(r["center_x"], r["center_y"]))
        n = values["noise"]
        noise = NoiseModel(
            n["q"],
            n["ambient_current_ia"],
            n["noise_bw_factor_i2"],
            n["symbol_interval_t"],
            n["amp_bandwidth_ba"],
            n["amp_noise_density_rho"],
        )
        sc = values["scheme"]
        if sc["scheme"] not in ("qcm", "qcm-pr", "dcm", "sm-dcm"):
            raise ValueError(f"scheme must be qcm, qcm-pr, dcm or sm-dcm, got {sc['scheme']!r}")
        parse_modulation(sc["modulation"])
        scheme = SchemeSpec(sc["scheme"], sc["modulation"].strip().lower(), sc["rotation_deg"])
        system = SystemConfig(room, tx, rx, noise)
        # Validate the geometry once so bad layouts fail as config errors.
        system.layout(scheme.scheme)
        s = values["simulation"]
        StopRule(s["min_bit_errors"], s["max_bits"])
        if s["workers"] < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= s["seed"] < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if values["analysis"]["method"] not in ("local", "reference"):
            raise ValueError("analysis method must be local or reference")
        if not values["analysis"]["resolution_m"] > 0:
            raise ValueError("analysis resolution_m must be > 0")
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(system, scheme, values)


def load(path=None, environ=None, overrides: dict | None = None) -> ExperimentConfig:
    values = load_values(path, environ)
    for (sec, key), v in (overrides or {}).items():
        values[sec][key] = v
    return build(values)
