"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from thermomesh.mesh import (ConstantR, MaterialSet, MeshSpec, NoInterlayer,
                             ceramic_ntc, vo2_interlayer)
from thermomesh.network import assemble, sensitivity_matrix


@pytest.fixture(scope="session")
def mesh4x5():
    return MeshSpec(rows=4, cols=5)


@pytest.fixture(scope="session")
def mesh16():
    return MeshSpec(rows=16, cols=16)


@pytest.fixture(scope="session")
def linear_materials():
    return MaterialSet(interlayer=ConstantR(resistance=100.0))


@pytest.fixture(scope="session")
def merged_materials():
    return MaterialSet(interlayer=NoInterlayer())


@pytest.fixture(scope="session")
def ceramic_materials():
    return MaterialSet(interlayer=ceramic_ntc())


@pytest.fixture(scope="session")
def vo2_materials():
    return MaterialSet(interlayer=vo2_interlayer())


@pytest.fixture(scope="session")
def linear_a16(mesh16, linear_materials):
    """Dense sensitivity matrix of the shipped 16x16 linear configuration."""
    return sensitivity_matrix(assemble(mesh16, linear_materials))


@pytest.fixture(scope="session")
def hot_center_state():
    def make(mesh, t_amb, t_hot):
        field = np.full(mesh.n_pixels, float(t_amb))
        field[(mesh.rows // 2) * mesh.cols + mesh.cols // 2] = float(t_hot)
        return field
    return make
