"""Transfer-matrix solver for planar multilayer stacks at normal incidence.

Conventions: wavelengths and thicknesses in nm, time dependence exp(-i w t),
scalar fields.  The characteristic matrix of a layer relates (E, H) at the
incident-side face to (E, H) at the exit-side face; H is in units of E so a
forward wave in index n has H = n E.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguousWindowError,
    InvalidParameterError,
    ResonanceNotFoundError,
)

ALLOWED_SPACER_LENGTHS = (0.5, 1.0, 1.5, 2.0)


@dataclass(frozen=True)
class OpticalMaterial:
    """A non-dispersive optical material.

    The imaginary part of the index (>= 0) models absorption; passive media
    only.
    """

    name: str
    refractive_index: complex

    def __post_init__(self):
        n = complex(self.refractive_index)
        if n.real <= 0:
            raise InvalidParameterError(f"material {self.name!r}: Re(n) must be > 0")
        if n.imag < 0:
            raise InvalidParameterError(f"material {self.name!r}: Im(n) must be >= 0 (passive)")
        object.__setattr__(self, "refractive_index", n)

    @property
    def n(self) -> complex:
        return self.refractive_index


AIR = OpticalMaterial("air", 1.0)
GAAS = OpticalMaterial("GaAs", 3.53)
ALAS = OpticalMaterial("AlAs", 2.95)
SIO2 = OpticalMaterial("SiO2", 1.45)


@dataclass(frozen=True)
class Layer:
    material: OpticalMaterial
    thickness_nm: float

    def __post_init__(self):
        if not self.thickness_nm > 0:
            raise InvalidParameterError(
                f"layer of {self.material.name!r}: thickness must be > 0, got {self.thickness_nm}"
            )


@dataclass(frozen=True)
class LayerStack:
    """Ordered thin-film stack between two semi-infinite media.

    ``spacer_index`` marks the cavity defect layer when the stack was built
    as a cavity; resonance searches place the emitting source at its center.
    """

    incident_medium: OpticalMaterial
    layers: tuple[Layer, ...]
    exit_medium: OpticalMaterial
    spacer_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.spacer_index is not None and not (0 <= self.spacer_index < len(self.layers)):
            raise InvalidParameterError("spacer_index outside the layer list")

    @property
    def total_thickness_nm(self) -> float:
        return sum(l.thickness_nm for l in self.layers)

    def spacer_center_z(self) -> float:
        if self.spacer_index is None:
            raise InvalidParameterError("stack has no designated spacer layer")
        z = sum(l.thickness_nm for l in self.layers[: self.spacer_index])
        return z + self.layers[self.spacer_index].thickness_nm / 2

    def reversed(self) -> "LayerStack":
        n = len(self.layers)
        sp = None if self.spacer_index is None else n - 1 - self.spacer_index
        return LayerStack(self.exit_medium, tuple(reversed(self.layers)), self.incident_medium, sp)


@dataclass(frozen=True)
class StackResponse:
    r: complex
    t: complex
    reflectance: float
    transmittance: float


@dataclass(frozen=True)
class PlanarCavityResult:
    resonance_wavelength_nm: float
    quality_factor: float
    linewidth_nm: float
    top_mirror_reflectance: float
    bottom_mirror_reflectance: float
    top_escape_fraction: float
    peak_enhancement: float = field(default=float("nan"), compare=False)


@dataclass(frozen=True, eq=False)
class FieldProfile:
    z_nm: np.ndarray
    intensity: np.ndarray          # |E(z)|^2, unit incident amplitude from the top
    eps_intensity: np.ndarray      # Re(n)^2 |E|^2, the mode-volume weight
    spacer_peak_z_nm: float
    effective_length_nm: float


def build_quarter_wave_cavity(
    lam0_nm: float,
    n_top_pairs: int,
    n_bottom_pairs: int,
    high: OpticalMaterial = GAAS,
    low: OpticalMaterial = ALAS,
    spacer: OpticalMaterial = GAAS,
    substrate: OpticalMaterial = GAAS,
    incident: OpticalMaterial = AIR,
    spacer_optical_length: float = 1.0,
) -> LayerStack:
    """Assemble incident / top mirror / spacer / bottom mirror / substrate.

    Each mirror layer is a quarter wave thick at lam0; pairs adjacent to the
    spacer start with the low-index material so the spacer carries a field
    antinode at its center for integer spacer_optical_length.
    """
    if lam0_nm <= 0:
        raise InvalidParameterError("design wavelength must be > 0")
    if n_top_pairs < 1 or n_bottom_pairs < 1:
        raise InvalidParameterError("mirror pair counts must be >= 1")
    if spacer_optical_length not in ALLOWED_SPACER_LENGTHS:
        raise InvalidParameterError(
            f"spacer_optical_length must be one of {ALLOWED_SPACER_LENGTHS}"
        )

    def quarter(mat: OpticalMaterial) -> Layer:
        return Layer(mat, lam0_nm / (4 * mat.n.real))

    layers: list[Layer] = []
    for _ in range(n_top_pairs):
        layers.append(quarter(high))
        layers.append(quarter(low))
    spacer_idx = len(layers)
    layers.append(Layer(spacer, spacer_optical_length * lam0_nm / spacer.n.real))
    for _ in range(n_bottom_pairs):
        layers.append(quarter(low))
        layers.append(quarter(high))
    return LayerStack(incident, tuple(layers), substrate, spacer_idx)


def _char_matrix(layers, lam):
    """Characteristic matrix components over a wavelength array."""
    lam = np.asarray(lam, dtype=float)
    m11 = np.ones(lam.shape, dtype=complex)
    m12 = np.zeros(lam.shape, dtype=complex)
    m21 = np.zeros(lam.shape, dtype=complex)
    m22 = np.ones(lam.shape, dtype=complex)
    for layer in layers:
        n = layer.material.n
        delta = 2 * np.pi * n * layer.thickness_nm / lam
        c = np.cos(delta)
        s = np.sin(delta)
        l11 = c
        l12 = -1j * s / n
        l21 = -1j * n * s
        l22 = c
        m11, m12, m21, m22 = (
            m11 * l11 + m12 * l21,
            m11 * l12 + m12 * l22,
            m21 * l11 + m22 * l21,
            m21 * l12 + m22 * l22,
        )
    return m11, m12, m21, m22


def _amplitudes(stack: LayerStack, lam):
    n0 = stack.incident_medium.n
    ns = stack.exit_medium.n
    m11, m12, m21, m22 = _char_matrix(stack.layers, lam)
    denom = n0 * (m11 + m12 * ns) + (m21 + m22 * ns)
    r = (n0 * (m11 + m12 * ns) - (m21 + m22 * ns)) / denom
    t = 2 * n0 / denom
    return r, t


def stack_response(stack: LayerStack, lam_nm: float, incidence_side: str = "top") -> StackResponse:
    """Complex r, t and power R, T of the stack at one wavelength.

    T carries the exit/incident index ratio so that R + T = 1 for purely
    real indices.
    """
    if lam_nm <= 0:
        raise InvalidParameterError("wavelength must be > 0")
    if incidence_side not in ("top", "bottom"):
        raise InvalidParameterError("incidence_side must be 'top' or 'bottom'")
    s = stack if incidence_side == "top" else stack.reversed()
    r, t = _amplitudes(s, np.array([lam_nm]))
    r = complex(r[0])
    t = complex(t[0])
    R = abs(r) ** 2
    T = (s.exit_medium.n.real / s.incident_medium.n.real) * abs(t) ** 2
    return StackResponse(r, t, R, T)


def _field_walk(stack: LayerStack, lam: float):
    """Per-layer (E, H) at each layer's exit-side face for unit top illumination."""
    r, t = _amplitudes(stack, np.array([lam]))
    ns = stack.exit_medium.n
    E = complex(t[0])
    H = ns * E
    rights = [None] * len(stack.layers)
    for j in range(len(stack.layers) - 1, -1, -1):
        rights[j] = (E, H)
        layer = stack.layers[j]
        n = layer.material.n
        delta = 2 * np.pi * n * layer.thickness_nm / lam
        c, s = np.cos(delta), np.sin(delta)
        E, H = c * E - 1j * s * H / n, -1j * n * s * E + c * H
    return rights, complex(r[0]), complex(t[0])


def field_at(stack: LayerStack, lam: float, z):
    """Complex E(z) for unit-amplitude top illumination.

    z is measured from the top face of the first layer, in nm; z values must
    lie inside the stack.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    rights, _, _ = _field_walk(stack, lam)
    out = np.zeros(z.shape, dtype=complex)
    done = np.zeros(z.shape, dtype=bool)
    z_left = 0.0
    for j, layer in enumerate(stack.layers):
        z_right = z_left + layer.thickness_nm
        sel = ~done & (z >= z_left - 1e-12) & (z <= z_right + 1e-12)
        if sel.any():
            n = layer.material.n
            rem = np.clip(z_right - z[sel], 0.0, layer.thickness_nm)
            delta = 2 * np.pi * n * rem / lam
            Er, Hr = rights[j]
            out[sel] = np.cos(delta) * Er - 1j * np.sin(delta) * Hr / n
            done[sel] = True
        z_left = z_right
    if not done.all():
        raise InvalidParameterError("z samples outside the stack")
    return out


def _source_spectrum(stack: LayerStack, lam_grid, source_z: float):
    """|E(source_z)|^2 under top illumination, vectorized over wavelength.

    By reciprocity this is proportional to the power an internal point
    source at source_z radiates through the top, which is the observable
    that defines the cavity resonance here.
    """
    lam = np.asarray(lam_grid, dtype=float)
    below = []
    z_left = 0.0
    split_rem = None
    for layer in stack.layers:
        z_right = z_left + layer.thickness_nm
        if source_z <= z_right + 1e-12 and split_rem is None:
            split_rem = (layer, z_right - source_z)
            below.append(Layer(layer.material, max(z_right - source_z, 1e-12)))
        elif split_rem is not None:
            below.append(layer)
        z_left = z_right
    if split_rem is None:
        raise InvalidParameterError("source position outside the stack")
    _, t = _amplitudes(stack, lam)
    ns = stack.exit_medium.n
    m11, m12, _, _ = _char_matrix(below, lam)
    E = t * (m11 + m12 * ns)
    return np.abs(E) ** 2


def emission_spectrum(stack: LayerStack, lam_grid, source_z: float | None = None) -> np.ndarray:
    """Top-collected emission spectrum of an internal point source.

    Evaluated by reciprocity as |E(source_z)|^2 under unit top illumination;
    the source defaults to the spacer center.
    """
    if source_z is None:
        source_z = stack.spacer_center_z()
    return _source_spectrum(stack, lam_grid, source_z)


def find_resonance(
    stack: LayerStack,
    lam_min_nm: float,
    lam_max_nm: float,
    source_z: float | None = None,
    n_scan: int | None = None,
) -> PlanarCavityResult:
    """Locate the cavity resonance of the internal-source emission spectrum.

    The scan window must contain exactly one resonance; the peak wavelength
    is refined to better than 0.01 nm and the linewidth is the spectrum
    FWHM.  Mirror reflectances are evaluated from the spacer at the peak.
    """
    if not lam_min_nm < lam_max_nm:
        raise InvalidParameterError("need lam_min < lam_max")
    if not stack.layers:
        raise InvalidParameterError("stack has no layers")
    if source_z is None:
        source_z = stack.spacer_center_z()

    if n_scan is None:
        n_scan = max(801, int((lam_max_nm - lam_min_nm) / 0.02) + 1)
    lam = np.linspace(lam_min_nm, lam_max_nm, n_scan)
    S = _source_spectrum(stack, lam, source_z)

    imax = int(np.argmax(S))
    if imax <= 1 or imax >= n_scan - 2:
        raise ResonanceNotFoundError(
            f"no interior emission peak in [{lam_min_nm}, {lam_max_nm}] nm"
        )
    peaks = np.flatnonzero(
        (S[1:-1] > S[:-2]) & (S[1:-1] >= S[2:]) & (S[1:-1] >= 0.5 * S[imax])
    )
    if len(peaks) > 1:
        raise AmbiguousWindowError(
            f"{len(peaks)} comparable peaks in window; narrow the scan"
        )

    # refine the peak on a fine local grid (coarse step is ~0.02 nm)
    step = lam[1] - lam[0]
    fine = np.linspace(lam[imax] - step, lam[imax] + step, 81)
    Sf = _source_spectrum(stack, fine, source_z)
    jf = int(np.argmax(Sf))
    fine2 = np.linspace(fine[jf] - step / 40, fine[jf] + step / 40, 41)
    Sf2 = _source_spectrum(stack, fine2, source_z)
    j2 = int(np.argmax(Sf2))
    lam_c = float(fine2[j2])
    s_peak = float(Sf2[j2])

    half = s_peak / 2

    def crossing(lo, hi):
        # bisection for S(lam) = half; lo is on the below-half side
        flo = float(_source_spectrum(stack, [lo], source_z)[0]) - half
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = float(_source_spectrum(stack, [mid], source_z)[0]) - half
            if flo * fm <= 0:
                hi = mid
            else:
                lo, flo = mid, fm
            if abs(hi - lo) < 1e-7:
                break
        return 0.5 * (lo + hi)

    left_idx = np.flatnonzero(S[: imax + 1] < half)
    right_idx = np.flatnonzero(S[imax:] < half)
    if len(left_idx) == 0 or len(right_idx) == 0:
        raise ResonanceNotFoundError("half-maximum crossings not inside the scan window")
    il = left_idx[-1]
    ir = imax + right_idx[0]
    lam_l = crossing(lam[il], lam[il + 1])
    lam_r = crossing(lam[ir], lam[ir - 1])
    fwhm = abs(lam_r - lam_l)

    r_top, r_bot = mirror_reflectances(stack, lam_c)
    t_top, t_bot = 1 - r_top, 1 - r_bot
    eta_top = t_top / (t_top + t_bot)

    return PlanarCavityResult(
        resonance_wavelength_nm=lam_c,
        quality_factor=lam_c / fwhm,
        linewidth_nm=fwhm,
        top_mirror_reflectance=r_top,
        bottom_mirror_reflectance=r_bot,
        top_escape_fraction=eta_top,
        peak_enhancement=s_peak,
    )


def mirror_reflectances(stack: LayerStack, lam_nm: float) -> tuple[float, float]:
    """(R_top, R_bot) seen from the spacer material at lam_nm."""
    if stack.spacer_index is None:
        raise InvalidParameterError("stack has no designated spacer layer")
    spacer_mat = stack.layers[stack.spacer_index].material
    top = LayerStack(
        spacer_mat,
        tuple(reversed(stack.layers[: stack.spacer_index])),
        stack.incident_medium,
    )
    bot = LayerStack(
        spacer_mat,
        stack.layers[stack.spacer_index + 1 :],
        stack.exit_medium,
    )
    r_t, _ = _amplitudes(top, np.array([lam_nm]))
    r_b, _ = _amplitudes(bot, np.array([lam_nm]))
    return abs(complex(r_t[0])) ** 2, abs(complex(r_b[0])) ** 2


def round_trip_q_estimate(stack: LayerStack, lam_c_nm: float) -> float:
    """Q from the complex-pole picture: round-trip phase slope over loss.

    Q = -lam * dphi/dlam / (-ln(R_top R_bot)) with phi the spacer round-trip
    phase including both mirror reflection phases.
    """
    if stack.spacer_index is None:
        raise InvalidParameterError("stack has no designated spacer layer")
    spacer = stack.layers[stack.spacer_index]
    n_sp = spacer.material.n.real
    spacer_mat = spacer.material
    top = LayerStack(
        spacer_mat, tuple(reversed(stack.layers[: stack.spacer_index])), stack.incident_medium
    )
    bot = LayerStack(spacer_mat, stack.layers[stack.spacer_index + 1 :], stack.exit_medium)

    def phi(lam):
        r_t, _ = _amplitudes(top, np.array([lam]))
        r_b, _ = _amplitudes(bot, np.array([lam]))
        return (
            2 * (2 * np.pi * n_sp * spacer.thickness_nm / lam)
            + np.angle(complex(r_t[0]))
            + np.angle(complex(r_b[0]))
        )

    h = 0.01
    dphi = (phi(lam_c_nm + h) - phi(lam_c_nm - h)) / (2 * h)
    r_top, r_bot = mirror_reflectances(stack, lam_c_nm)
    return -lam_c_nm * dphi / (-np.log(r_top * r_bot))


def field_profile(stack: LayerStack, lam_nm: float, step_nm: float = 0.5) -> FieldProfile:
    """Sampled |E(z)|^2 through the stack for top illumination.

    Also reports the position of the spacer field maximum and the effective
    length integral(eps |E|^2) / max(eps |E|^2) used for mode volumes.
    """
    if step_nm > 1.0 or step_nm <= 0:
        raise InvalidParameterError("sampling step must be in (0, 1] nm")
    total = stack.total_thickness_nm
    z = np.arange(0.0, total, step_nm)
    E = field_at(stack, lam_nm, z)
    intensity = np.abs(E) ** 2

    eps = np.empty_like(intensity)
    z_left = 0.0
    for layer in stack.layers:
        z_right = z_left + layer.thickness_nm
        sel = (z >= z_left - 1e-12) & (z < z_right)
        eps[sel] = layer.material.n.real ** 2
        z_left = z_right

    weight = eps * intensity
    l_eff = float(np.trapezoid(weight, z) / weight.max())

    if stack.spacer_index is not None:
        z0 = sum(l.thickness_nm for l in stack.layers[: stack.spacer_index])
        z1 = z0 + stack.layers[stack.spacer_index].thickness_nm
        sel = (z >= z0) & (z <= z1)
        peak_z = float(z[sel][np.argmax(intensity[sel])])
    else:
        peak_z = float(z[np.argmax(intensity)])

    return FieldProfile(
        z_nm=z,
        intensity=intensity,
        eps_intensity=weight,
        spacer_peak_z_nm=peak_z,
        effective_length_nm=l_eff,
    )
