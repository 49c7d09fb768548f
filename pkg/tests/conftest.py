"""Shared fixtures: small meshes and bundles reused across test modules."""

import numpy as np
import pytest

import sketchfem as sf


@pytest.fixture(scope="session")
def square4():
    return sf.square_mesh(4)


@pytest.fixture(scope="session")
def square4_grad(square4):
    return sf.gradient_operator(square4)


@pytest.fixture(scope="session")
def jittered10():
    # centered domain so the default ball forcing has support
    return sf.jittered_square_mesh(10, amplitude=0.2, lo=-1.0, hi=1.0, seed=3)


@pytest.fixture(scope="session")
def jittered10_grad(jittered10):
    return sf.gradient_operator(jittered10)


@pytest.fixture(scope="session")
def bundle10(jittered10, jittered10_grad):
    """rho = 10 bundle on the jittered mesh, attached and ready to query."""
    bundle = sf.build_offline_bundle(jittered10, jittered10_grad, 10,
                                     sf.ball_forcing(jittered10))
    bundle.attach(jittered10, jittered10_grad)
    return bundle


@pytest.fixture()
def mesh_file(tmp_path, square4):
    path = tmp_path / "square4.txt"
    sf.write_mesh(square4, path)
    return str(path)
