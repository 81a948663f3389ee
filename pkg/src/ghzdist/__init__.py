"""Rate and fidelity models for multipartite GHZ-state distribution.

Covers single-switch ("parent") protocols, a recursive repeater that fuses
``N`` parent states per level, a seeded Monte Carlo simulator, and a small
density-matrix oracle used to cross-check the closed forms.
"""

__version__ = "0.1.0"

from .models import (  # noqa: E402
    DepolarizingParam,
    DivergenceError,
    DomainError,
    NetworkParams,
    SwitchKind,
    effective_success_probability,
    link_success_probability,
    memory_keep_after_wait,
)
from .parent import (  # noqa: E402
    expected_rounds_all_links,
    measurement_based_fidelity,
    min_parallel_attempts,
    parent_rate,
    source_based_fidelity,
)
from .repeater import (  # noqa: E402
    cdf_parent_ready,
    expected_t_max,
    final_fidelity,
    g_function,
    total_distribution_time,
)
from .network import distribution_rate, repeater_fidelity  # noqa: E402

__all__ = [
    "DepolarizingParam",
    "DivergenceError",
    "DomainError",
    "NetworkParams",
    "SwitchKind",
    "cdf_parent_ready",
    "distribution_rate",
    "effective_success_probability",
    "expected_rounds_all_links",
    "expected_t_max",
    "final_fidelity",
    "g_function",
    "link_success_probability",
    "measurement_based_fidelity",
    "memory_keep_after_wait",
    "min_parallel_attempts",
    "parent_rate",
    "repeater_fidelity",
    "source_based_fidelity",
    "total_distribution_time",
]
