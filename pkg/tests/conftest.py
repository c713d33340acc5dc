import pytest

import avgtrack as at

from helpers import scalar_problem as _scalar_problem


@pytest.fixture(scope="session")
def scalar_prob():
    return _scalar_problem()


@pytest.fixture(scope="session")
def scalar_ss(scalar_prob):
    return at.steady_state(scalar_prob)


@pytest.fixture(scope="session")
def scalar_ctx(scalar_prob, scalar_ss):
    return at.StageContext(scalar_prob, scalar_ss)


@pytest.fixture(scope="session")
def scalar_ctx_exact(scalar_prob):
    return at.StageContext(scalar_prob, at.steady_state(scalar_prob, at.Convention.EXACT))


@pytest.fixture(scope="session")
def scalar_dare(scalar_prob):
    return at.solve_dare(scalar_prob.system, scalar_prob.Q, scalar_prob.R)
