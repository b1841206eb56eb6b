"""Scalar objectives: period-doubling match for the Dicke model, spectral shaping for the chain."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import Spectrum, fcma


@dataclass(frozen=True)
class CostBreakdown:
    total: float
    terms: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def of(cls, terms: dict, **diagnostics) -> "CostBreakdown":
        return cls(math.fsum(terms.values()), dict(terms), diagnostics)

    def to_dict(self) -> dict:
        def clean(v):
            return v if isinstance(v, (int, bool, str)) or (v is not None and math.isfinite(v)) else None

        return {"total": clean(self.total), "terms": {k: clean(v) for k, v in self.terms.items()}}


def cost_dicke(jx_strobe, s: int = 50, eps_div: float = 1e-12, window: int = 1) -> CostBreakdown:
    """``|j(s) - j(s+2)| + 1/max(|j(s) - j(s+1)|, eps_div)`` on stroboscopic jx.

    ``window > 1`` averages both addends over the triples starting at s, ..., s+window-1.
    """
    x = np.asarray(jx_strobe, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    if x.size < s + window + 2:
        raise ValueError(f"series of length {x.size} does not cover index {s + window + 1}")
    match = penalty = 0.0
    for n in range(s, s + window):
        match += abs(x[n] - x[n + 2])
        penalty += 1.0 / max(abs(x[n] - x[n + 1]), eps_div)
    return CostBreakdown.of({"match": match / window, "penalty": penalty / window})


def cost_chain(
    spectrum: Spectrum,
    threshold: float = 0.05,
    penalty: float = 1e4,
    exclude_dc: bool = True,
) -> CostBreakdown:
    """FCMA offset + sideband weight + threshold barrier on the subharmonic peak."""
    half = spectrum.half_bin
    f = fcma(spectrum, exclude_dc)
    # an all-zero spectrum has no maximum; score the offset as if the peak sat at DC
    fcma_term = abs((0.0 if f is None else f) - 0.5 * spectrum.Omega0)
    side = spectrum.mags.copy()
    side[half] = 0.0
    if exclude_dc:
        side[0] = 0.0
    sideband = math.fsum(side)
    x = spectrum.mags[half] - threshold
    clamped = abs(x) < 1e-15
    theta = penalty if x <= 0 else 1.0
    barrier = theta / max(abs(x), 1e-15)
    return CostBreakdown.of(
        {"fcma": fcma_term, "sideband": sideband, "threshold": barrier},
        x=x,
        clamped=clamped,
    )
