import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from mpvesd.law import PopulationSpectrum, solve_law

TWO_ATOM = ((4.0, 0.5), (1.0, 0.5))
SPIKED = ((4.0, 0.1), (1.0, 0.9))


@pytest.fixture(scope="session")
def mp_law_d2():
    """delta_1, d = 2 (the classical MP setting of the acceptance checks)."""
    return solve_law(PopulationSpectrum.identity(), 2.0)


@pytest.fixture(scope="session")
def mp_law_d05():
    """delta_1, d = 0.5 (the simulation setting)."""
    return solve_law(PopulationSpectrum.identity(), 0.5)


@pytest.fixture(scope="session")
def two_atom_law_d05():
    """0.5 delta_1 + 0.5 delta_4 at d = 0.5."""
    return solve_law(PopulationSpectrum(atoms=TWO_ATOM), 0.5)


@pytest.fixture(scope="session")
def spiked_law_d2():
    """0.9 delta_1 + 0.1 delta_4 at d = 2 (two bulk components)."""
    return solve_law(PopulationSpectrum(atoms=SPIKED), 2.0)
