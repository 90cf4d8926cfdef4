import math

import pytest

from urllc_ee import SystemConfig, UserProfile, YFunction
from urllc_ee.rate import LN2, inv_gaussian_q

# Reference cell parameters used throughout: 0.1 ms frames, 0.05 ms DL
# transmission, 1 ms end-to-end budget, -173 dBm/Hz noise, 20 MHz, 10 W,
# 50 mW circuit power per antenna and fixed, PA efficiency 0.5, 160-bit
# packets, 3e-7 overall loss budget.
DEFAULT_CFG = SystemConfig()


@pytest.fixture
def cfg() -> SystemConfig:
    return DEFAULT_CFG


@pytest.fixture
def single_user(cfg) -> UserProfile:
    # 20 nodes at 10 packets/s each -> 0.02 packets/frame, 250 m cell edge
    return UserProfile.from_nodes(250.0, 20, 10.0, cfg)


def unit_rate_yfunction(eps_c: float, cfg: SystemConfig = DEFAULT_CFG,
                        alpha: float = 1.0) -> YFunction:
    """Objective kernel at a nominal service rate of one packet/frame."""
    l = cfg.packet_bits * LN2 / cfg.dl_fraction
    v = inv_gaussian_q(eps_c) / math.sqrt(cfg.dl_fraction) if eps_c < 0.5 else 0.0
    return YFunction(l=l, v=v, alpha=alpha)


# Bandwidth minimizers of the unit-rate kernel, MHz, per decoding-error
# target; reference values for regression checks at +/-1%.
WTH_REFERENCE_MHZ = {1e-8: 7.35, 1e-7: 7.42, 1e-6: 7.53, 1e-5: 7.70}
