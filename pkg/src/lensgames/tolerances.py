"""Central numeric tolerances.

Every module reads its epsilons from the single record below so that the
property tests and the library always agree on what counts as zero.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """Shared numeric slack.

    norm          probability vectors / channel rows must sum to 1 within this
    support       outcomes with mass at or below this are treated as null
    divergence    slack on nonnegativity and self-divergence of scorers
    almost_equal  default tolerance for support-restricted family comparison
    sym           max allowed asymmetry of a covariance matrix
    psd           most negative eigenvalue a covariance may have
    tie           objective gap within which argmin candidates count as tied
    mono          per-step slack when checking monotone descent
    """

    norm: float = 1e-9
    support: float = 1e-12
    divergence: float = 1e-12
    almost_equal: float = 1e-9
    sym: float = 1e-9
    psd: float = 1e-9
    tie: float = 1e-9
    mono: float = 1e-7


TOL = Tolerances()
