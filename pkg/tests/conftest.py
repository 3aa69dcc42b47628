import numpy as np
import pytest

from memfac.maps import build_factorization_data
from memfac.models import build_tls_boson_model, build_tls_lindblad_model

RHO_MIXED = np.array([[0.6, 0.3 + 0.1j], [0.3 - 0.1j, 0.4]], dtype=complex)


@pytest.fixture(scope="session")
def lindblad_model():
    return build_tls_lindblad_model(radiative_decay=0.05, rabi=0.04, detuning=0.01)


@pytest.fixture(scope="session")
def boson_model():
    """Light non-Markovian workhorse for unit tests (composite dim 6)."""
    return build_tls_boson_model(
        dim_env=3, coupling=0.4, mode_energy=1.0, mode_damping=1.6,
        radiative_decay=0.02, rabi=0.05, temperature=0.0,
    )


@pytest.fixture(scope="session")
def strong_model():
    """Strong-coupling surrogate used by the heavier engine tests."""
    return build_tls_boson_model(
        dim_env=4, coupling=0.6, mode_energy=1.0, mode_damping=1.6,
        radiative_decay=0.01, rabi=0.1, temperature=4.0,
    )


@pytest.fixture(scope="session")
def boson_fdata(boson_model):
    return build_factorization_data(boson_model, dt=0.2, threshold=1e-10, t_max=60.0)


@pytest.fixture(scope="session")
def strong_fdata(strong_model):
    return build_factorization_data(strong_model, dt=0.2, threshold=1e-8, t_max=70.0)


@pytest.fixture(scope="session")
def lindblad_fdata(lindblad_model):
    return build_factorization_data(lindblad_model, dt=0.2, threshold=1e-12, t_max=20.0)
