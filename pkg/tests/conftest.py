import numpy as np
import pytest

from pairpillar import emitter, layered, pillar


@pytest.fixture(scope="session")
def baseline_stack():
    return layered.build_quarter_wave_cavity(910.0, 5, 18)


@pytest.fixture(scope="session")
def baseline_planar(baseline_stack):
    return layered.find_resonance(baseline_stack, 885.0, 935.0)


@pytest.fixture(scope="session")
def baseline_profile(baseline_stack, baseline_planar):
    return layered.field_profile(baseline_stack, baseline_planar.resonance_wavelength_nm)


@pytest.fixture(scope="session")
def baseline_geometry():
    return pillar.PillarGeometry(2.02, 3.53, 1.0)


@pytest.fixture(scope="session")
def default_model():
    return emitter.default_leaky_model()


@pytest.fixture(scope="session")
def baseline_purcell(baseline_planar, baseline_profile, baseline_geometry):
    w0 = pillar.marcuse_mode_field_radius(baseline_geometry, 910.0)
    v_eff = (np.pi * w0**2 / 2) * (baseline_profile.effective_length_nm / 1000.0)
    return emitter.purcell_peak(
        baseline_planar.quality_factor, v_eff, baseline_planar.resonance_wavelength_nm, 3.53
    )
