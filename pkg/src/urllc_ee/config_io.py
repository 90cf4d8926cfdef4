"""Flat key = value config files.

One ``key = value`` pair per line, ``#`` starts a comment, values are SI
units.  dB/dBm keys are converted to linear here so the rest of the library
never sees decibels.  The full key list lives in the README.
"""

from __future__ import annotations

from .model import ConfigError, SystemConfig, UserProfile, dbm_to_watts

_SCALAR_KEYS = {
    "frame_duration", "dl_fraction", "e2e_delay", "backhaul_delay",
    "noise_psd", "noise_psd_dbm_hz", "total_bandwidth",
    "max_bs_power", "max_bs_power_dbm", "circuit_power_per_antenna",
    "fixed_circuit_power", "amplifier_efficiency", "packet_bits",
    "loss_budget", "nodes_per_user", "node_packet_rate_hz",
}
_LIST_KEYS = {"user_distances_m", "user_gains", "user_arrival_rates_pps"}

DEFAULT_CONFIG_TEXT = """\
# Cell and QoS parameters (SI units; dB keys are converted at ingestion)
frame_duration = 1e-4
dl_fraction = 0.5e-4
e2e_delay = 1e-3
backhaul_delay = 1e-4
noise_psd_dbm_hz = -173
total_bandwidth = 20e6
max_bs_power_dbm = 40
circuit_power_per_antenna = 0.05
fixed_circuit_power = 0.05
amplifier_efficiency = 0.5
packet_bits = 160
loss_budget = 3e-7

# Users: one entry per user; traffic aggregates nodes_per_user nodes
user_distances_m = 250
nodes_per_user = 20
node_packet_rate_hz = 10
"""


def parse_config_text(text: str) -> tuple[SystemConfig, list[UserProfile]]:
    """Parse config text into a SystemConfig and its user list."""
    scalars: dict[str, float] = {}
    lists: dict[str, list[float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key in _SCALAR_KEYS:
            try:
                scalars[key] = float(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: bad number {val!r}") from None
        elif key in _LIST_KEYS:
            try:
                lists[key] = [float(x) for x in val.split(",") if x.strip()]
            except ValueError:
                raise ConfigError(f"line {lineno}: bad number list {val!r}") from None
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")

    kwargs: dict[str, float] = {}
    for name in ("frame_duration", "dl_fraction", "e2e_delay",
                 "backhaul_delay", "total_bandwidth",
                 "circuit_power_per_antenna", "fixed_circuit_power",
                 "amplifier_efficiency", "loss_budget"):
        if name in scalars:
            kwargs[name] = scalars[name]
    if "packet_bits" in scalars:
        kwargs["packet_bits"] = int(scalars["packet_bits"])
    if "noise_psd_dbm_hz" in scalars:
        kwargs["noise_psd"] = dbm_to_watts(scalars["noise_psd_dbm_hz"])
    elif "noise_psd" in scalars:
        kwargs["noise_psd"] = scalars["noise_psd"]
    if "max_bs_power_dbm" in scalars:
        kwargs["max_bs_power"] = dbm_to_watts(scalars["max_bs_power_dbm"])
    elif "max_bs_power" in scalars:
        kwargs["max_bs_power"] = scalars["max_bs_power"]
    cfg = SystemConfig(**kwargs)

    distances = lists.get("user_distances_m")
    gains = lists.get("user_gains")
    if distances is None and gains is None:
        raise ConfigError("config must provide user_distances_m or user_gains")
    count = len(distances if distances is not None else gains)
    if count == 0:
        raise ConfigError("user list is empty")

    rates_pps = lists.get("user_arrival_rates_pps")
    if rates_pps is not None and len(rates_pps) != count:
        raise ConfigError("user_arrival_rates_pps length does not match users")
    nodes = int(scalars.get("nodes_per_user", 1))
    node_rate = scalars.get("node_packet_rate_hz", 0.0)
    users = []
    for i in range(count):
        if rates_pps is not None:
            lam = rates_pps[i] * cfg.frame_duration
        else:
            if node_rate <= 0:
                raise ConfigError(
                    "need node_packet_rate_hz (with nodes_per_user) or "
                    "user_arrival_rates_pps")
            lam = nodes * node_rate * cfg.frame_duration
        users.append(UserProfile(
            arrival_rate=lam,
            distance=distances[i] if distances is not None else None,
            large_scale_gain=gains[i] if gains is not None else None,
            node_count=nodes,
        ))
    return cfg, users


def load_config(path: str) -> tuple[SystemConfig, list[UserProfile]]:
    """Load a config file; raises ConfigError naming the offending line."""
    with open(path) as fh:
        return parse_config_text(fh.read())
