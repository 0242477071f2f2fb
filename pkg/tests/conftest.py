import numpy as np
import pytest

from hjlab.hamiltonian import derive_constants, free_model, legendre_dual, pendulum_model

F_LIP = 0.5 * np.pi  # Lipschitz constant of cos(pi x / 2)


@pytest.fixture(scope="session")
def pendulum_table():
    # wide velocity window so the full constant chain (4 a0) is certifiable
    return legendre_dual(pendulum_model(), x_res=256, v_max=26.0, v_res=521,
                         p_max=27.0, p_res=541)


@pytest.fixture(scope="session")
def pendulum_constants(pendulum_table):
    return derive_constants(pendulum_model(), pendulum_table, K=F_LIP)


@pytest.fixture(scope="session")
def free_table():
    return legendre_dual(free_model(1), x_res=256, v_max=17.0, v_res=681,
                         p_max=18.0, p_res=721)
