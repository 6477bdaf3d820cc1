import numpy as np
import pytest

from caloron import nahm, oracle


def zero_mat(k):
    return [[[0.0, 0.0] for _ in range(k)] for _ in range(k)]


@pytest.fixture(scope="session")
def reference():
    """The standard two-interval SU(2) dataset used by most end-to-end tests."""
    return oracle.su2_reference_data()


@pytest.fixture(scope="session")
def free_config():
    # k=1, T == 0, Q == 0: everything about this dataset is exactly solvable
    return {
        "k": 1,
        "lambdas": [float(np.pi)],
        "intervals": [
            {"degree": 0, "T": {str(mu): [zero_mat(1)] for mu in range(4)}}
        ],
        "Q": [[[[0.0, 0.0]], [[0.0, 0.0]]]],
        "description": "free field",
    }


@pytest.fixture(scope="session")
def free_data(free_config):
    return nahm.from_dict(free_config)
