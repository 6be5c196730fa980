import pytest

from tunneltime import create_app
from tunneltime.quantities import BarrierSpec
from tunneltime.solver import build_model


@pytest.fixture
def app(tmp_path):
    app = create_app({
        "TESTING": True,
        "WORKERS": 2,
        "OUTPUT_DIR": str(tmp_path / "out"),
    })
    yield app


@pytest.fixture
def client(app):
    return app.test_client()


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture(scope="session")
def tunneling_spec():
    """Barrier and energy of the reference tunneling transient (t_max = 5.17 fs at x = L)."""
    return BarrierSpec(V=0.3, L=4.0, m_rel=0.067, E=0.001)


@pytest.fixture(scope="session")
def position_spec():
    return BarrierSpec(V=0.3, L=4.13, m_rel=0.067, E=0.01)


@pytest.fixture(scope="session")
def tunneling_model(tunneling_spec):
    return build_model(tunneling_spec)


@pytest.fixture(scope="session")
def above_barrier_spec():
    return BarrierSpec(V=0.3, L=4.0, m_rel=0.067, E=0.45)
