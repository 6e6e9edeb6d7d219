"""Per-level convergence bookkeeping shared by quadvar and integrate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["ConvergenceReport", "make_report"]


@dataclass
class ConvergenceReport:
    """Per-level values of a limiting quantity.

    Attributes
    ----------
    levels : list of int
    values : ndarray
        Value at each level.
    diffs : ndarray
        ``|v_n - v_{n-1}|``; the first entry is NaN.
    j1 : ndarray or None
        Skorokhod distances between consecutive level functions, when the
        per-level objects are paths. The first entry is NaN.
    limit : float
        Highest-level value.
    extrapolated : float
        First-order Richardson extrapolant ``2 v_N - v_{N-1}`` (mesh halving).
    converged : bool
        True when the tail of the Cauchy diagnostics is below `tol`.
    tol : float
    reference : float, optional
        Independent value the limit is compared against.
    """

    levels: list
    values: np.ndarray
    diffs: np.ndarray
    j1: np.ndarray | None
    limit: float
    extrapolated: float
    converged: bool
    tol: float
    reference: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def verdict(self):
        return "converged" if self.converged else "diverged"

    @property
    def error(self):
        """``|limit - reference|`` (NaN without a reference)."""
        if self.reference is None:
            return float("nan")
        return abs(self.limit - self.reference)


def make_report(levels, values, tol, j1=None, tail=2, reference=None, **extra):
    values = np.asarray(values, dtype=float)
    diffs = np.full(values.shape, np.nan)
    diffs[1:] = np.abs(np.diff(values))
    if j1 is not None:
        j1 = np.asarray(j1, dtype=float)
    cauchy = (j1 if j1 is not None else diffs)[1:]
    if cauchy.size == 0:
        converged = False
    else:
        converged = bool(np.all(cauchy[-tail:] < tol))
    limit = float(values[-1])
    extrap = float(2 * values[-1] - values[-2]) if values.size > 1 else limit
    return ConvergenceReport(list(levels), values, diffs, j1, limit, extrap, converged, float(tol),
                             reference, dict(extra))
