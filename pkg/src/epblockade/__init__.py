"""Exceptional-point photon statistics of a two-mode Kerr resonator."""

from .params import (
    SystemParams,
    DerivedRates,
    coupling_rates,
    kerr_coefficient,
    ep_angles,
    nth_from_temperature,
    paper_params,
)

__version__ = "0.1.0"

__all__ = [
    "SystemParams",
    "DerivedRates",
    "coupling_rates",
    "kerr_coefficient",
    "ep_angles",
    "nth_from_temperature",
    "paper_params",
    "__version__",
]
