"""Scalar guided-mode solver for a micropillar treated as a step-index guide.

Weak-guidance (LP) approximation: modes solve the scalar characteristic
equation matching Bessel J in the core to modified Bessel K in the cladding.
Good for mode ordering, counts and widths; not a vectorial solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv, kv

from .errors import InvalidParameterError, NumericalFailureError

_NEFF_GRID_STEP = 1e-4
_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class PillarGeometry:
    diameter_um: float
    n_core: float
    n_clad: float = 1.0

    def __post_init__(self):
        if self.diameter_um <= 0:
            raise InvalidParameterError("pillar diameter must be > 0")
        if self.n_clad < 1.0:
            raise InvalidParameterError("cladding index must be >= 1")
        if self.n_core < self.n_clad:
            raise InvalidParameterError("need n_core >= n_clad")

    @property
    def radius_nm(self) -> float:
        return self.diameter_um * 1000.0 / 2.0


@dataclass(frozen=True)
class GuidedMode:
    azimuthal_index: int
    radial_index: int
    n_eff: float
    mode_field_radius_um: float | None
    guided: bool = True
    residual: float = 0.0


def v_number(geometry: PillarGeometry, lam_nm: float) -> float:
    """Normalized frequency V = pi d / lam * sqrt(n_core^2 - n_clad^2)."""
    if lam_nm <= 0:
        raise InvalidParameterError("wavelength must be > 0")
    d_nm = geometry.diameter_um * 1000.0
    return np.pi * d_nm / lam_nm * np.sqrt(geometry.n_core**2 - geometry.n_clad**2)


def marcuse_mode_field_radius(geometry: PillarGeometry, lam_nm: float) -> float:
    """Gaussian-equivalent radius of the fundamental (Marcuse fit), in um."""
    V = v_number(geometry, lam_nm)
    if V <= 0:
        raise InvalidParameterError("zero index contrast has no confined mode")
    a = geometry.diameter_um / 2.0
    return a * (0.65 + 1.619 * V**-1.5 + 2.879 * V**-6.0)


def _characteristic(l: int, ka: float, n_core: float, n_clad: float, n_eff):
    """LP dispersion function; zero at guided-mode effective indices.

    g = u J_{l+1}(u) K_l(w) - w K_{l+1}(w) J_l(u), u/w the transverse core
    and cladding arguments.  Sign changes at J_l poles are rejected later by
    the residual check.
    """
    n_eff = np.asarray(n_eff, dtype=float)
    u = ka * np.sqrt(np.maximum(n_core**2 - n_eff**2, 0.0))
    w = ka * np.sqrt(np.maximum(n_eff**2 - n_clad**2, 0.0))
    return u * jv(l + 1, u) * kv(l, w) - w * kv(l + 1, w) * jv(l, u)


def _residual(l: int, ka: float, n_core: float, n_clad: float, n_eff: float) -> float:
    u = ka * np.sqrt(max(n_core**2 - n_eff**2, 0.0))
    w = ka * np.sqrt(max(n_eff**2 - n_clad**2, 0.0))
    t1 = u * jv(l + 1, u) * kv(l, w)
    t2 = w * kv(l + 1, w) * jv(l, u)
    scale = abs(t1) + abs(t2)
    if scale == 0.0:
        return np.inf
    return abs(t1 - t2) / scale


def solve_guided_modes(geometry: PillarGeometry, lam_nm: float, l_max: int) -> list[GuidedMode]:
    """All guided LP modes with azimuthal index 0..l_max at lam_nm.

    Roots are bracketed on a dense n_eff grid and refined with Brent's
    method; each returned root has normalized characteristic residual below
    1e-10.  The fundamental always carries the Marcuse mode-field radius.
    """
    if lam_nm <= 0:
        raise InvalidParameterError("wavelength must be > 0")
    if l_max < 0:
        raise InvalidParameterError("l_max must be >= 0")
    if geometry.n_core <= geometry.n_clad:
        raise InvalidParameterError("mode solving needs n_core > n_clad")

    ka = 2 * np.pi / lam_nm * geometry.radius_nm
    n_core, n_clad = geometry.n_core, geometry.n_clad
    grid = np.arange(n_clad + 1e-9, n_core - 1e-9, _NEFF_GRID_STEP)

    modes: list[GuidedMode] = []
    for l in range(l_max + 1):
        g = _characteristic(l, ka, n_core, n_clad, grid)
        sign = np.sign(g)
        brackets = list(np.flatnonzero(sign[:-1] * sign[1:] < 0))
        roots: list[float] = []

        def f(ne, _l=l):
            return float(_characteristic(_l, ka, n_core, n_clad, ne))

        for i in brackets:
            try:
                root = brentq(f, grid[i], grid[i + 1], xtol=1e-13, rtol=4 * np.finfo(float).eps)
            except ValueError as exc:
                raise NumericalFailureError(
                    f"root refinement failed for l={l}",
                    details={"bracket": (float(grid[i]), float(grid[i + 1]))},
                ) from exc
            if _residual(l, ka, n_core, n_clad, root) < _RESIDUAL_TOL:
                roots.append(float(root))

        if l == 0 and not roots:
            # fundamental has no cutoff; for very small V it hugs the
            # cladding index closer than the grid step
            for off in np.geomspace(1e-12, _NEFF_GRID_STEP, 40):
                lo = n_clad + off
                if f(lo) * f(grid[0]) < 0:
                    root = brentq(f, lo, grid[0], xtol=1e-14, rtol=4 * np.finfo(float).eps)
                    if _residual(l, ka, n_core, n_clad, root) < _RESIDUAL_TOL:
                        roots.append(float(root))
                    break

        # deduplicate and order by decreasing n_eff (m = 1 is the least
        # oscillatory, highest-index root)
        roots = sorted(set(roots), reverse=True)
        deduped: list[float] = []
        for r in roots:
            if not deduped or abs(deduped[-1] - r) > 1e-8:
                deduped.append(r)

        for m, ne in enumerate(deduped, start=1):
            w0 = None
            if l == 0 and m == 1:
                w0 = marcuse_mode_field_radius(geometry, lam_nm)
            modes.append(
                GuidedMode(
                    azimuthal_index=l,
                    radial_index=m,
                    n_eff=ne,
                    mode_field_radius_um=w0,
                    guided=True,
                    residual=_residual(l, ka, n_core, n_clad, ne),
                )
            )
    return modes


def fundamental_mode(modes: list[GuidedMode]) -> GuidedMode:
    for mode in modes:
        if mode.azimuthal_index == 0 and mode.radial_index == 1:
            return mode
    raise InvalidParameterError("mode list has no fundamental (l=0, m=1)")


def pillar_resonance_shift(lam_c_nm: float, mode: GuidedMode, geometry: PillarGeometry) -> float:
    """Pillar-mode resonance from the planar one via the effective-index model.

    lam_mode = lam_c * n_eff / n_core; higher-order modes land blue of the
    fundamental because their n_eff is lower.
    """
    if not mode.guided:
        raise InvalidParameterError("resonance shift is defined for guided modes")
    return lam_c_nm * mode.n_eff / geometry.n_core


def far_field_na(mode: GuidedMode, lam_nm: float) -> float:
    """Emission numerical aperture from Gaussian divergence of the mode field."""
    w0 = mode.mode_field_radius_um
    if w0 is None or not w0 > 0:
        raise InvalidParameterError("far field needs the fundamental with w0 > 0")
    lam_um = lam_nm / 1000.0
    return float(np.sin(lam_um / (np.pi * w0)))
