"""End-to-end rate and fidelity of an ``m``-level network.

Level 1 is the parent switch on the elementary links.  Each higher level
fuses ``N`` copies of the level below; its inputs wait in memory for their
siblings and each output qubit picks up one BSM channel per fusion.
"""

from __future__ import annotations

import logging

import numpy as np

from .models import NetworkParams, SwitchKind, ghz_weight_from_fidelity
from .parent import expected_residual_wait, source_based_fidelity, measurement_based_fidelity
from .repeater import (
    RateResult,
    final_fidelity_array,
    rate_model,
    teleport_expected_time,
    total_distribution_time,
)

log = logging.getLogger(__name__)


def distribution_rate(params: NetworkParams, rate_mode: str = "renewal") -> RateResult:
    return total_distribution_time(params, mode=rate_mode)


def expected_stage_waits(params: NetworkParams, rate_mode: str = "renewal") -> list:
    """Mean residual memory wait (in rounds) at each level ``1..m``."""
    n = params.n_users
    if params.parent_kind is SwitchKind.SOURCE_BASED:
        waits = [expected_residual_wait(n, params.q_eff())]
    else:
        waits = [0.0]
    model = rate_model(params, rate_mode)
    t_tel = teleport_expected_time(n, params.q_bsm)
    for level in range(2, params.nesting_level + 1):
        child_done = model.expected_t_max(level - 1) * t_tel
        w = model.expected_t_max(level) - child_done
        if w < 0:
            log.info("negative residual wait %.3g at level %d set to 0 (%s mode)", w, level, rate_mode)
            w = 0.0
        waits.append(w)
    return waits


def repeater_fidelity(params: NetworkParams, rate_mode: str = "renewal",
                      subset_rule: str = "verbatim") -> float:
    """Fidelity of the final GHZ state using mean waits at every level."""
    n = params.n_users
    waits = expected_stage_waits(params, rate_mode)
    if params.parent_kind is SwitchKind.SOURCE_BASED:
        f = source_based_fidelity(params, [waits[0]] * n)
    else:
        f = measurement_based_fidelity(params)
    for w in waits[1:]:
        keep = params.p_bsm * params.p_mem**w
        weight = ghz_weight_from_fidelity(f, n)
        f_arr, _ = final_fidelity_array(np.full(n, weight), np.full(n, keep), subset_rule)
        f = float(f_arr)
    return f
