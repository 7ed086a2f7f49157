"""Halpern iteration with W-mappings on CAT(1) model spaces (S^d and segments)."""

__version__ = "0.1.0"

from halpern_cat1._backend import BACKEND  # noqa: E402
from halpern_cat1.engine import (  # noqa: E402
    BetaSchedule,
    HalpernProblem,
    check_conditions,
    diagnostics_gamma_t,
    halpern_step,
    kasahara_diagnostic,
    run,
)
from halpern_cat1.geometry import combine, dist, segment, unit_sphere  # noqa: E402
from halpern_cat1.mappings import WSchedule, build_w_mapping  # noqa: E402

__all__ = [
    "BACKEND", "BetaSchedule", "HalpernProblem", "WSchedule", "build_w_mapping", "check_conditions",
    "combine", "diagnostics_gamma_t", "dist", "halpern_step", "kasahara_diagnostic", "run", "segment",
    "unit_sphere",
]
