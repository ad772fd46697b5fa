import pathlib

import pytest

from odeliveness.syntax import parse_problem

ROOT = pathlib.Path(__file__).resolve().parent.parent
PROBLEMS = ROOT / "problems"


@pytest.fixture(scope="session")
def alpha_l():
    """Linear spiral u' = -v - u, v' = u - v."""
    return parse_problem("ode { u' = -v - u; v' = u - v }  goal { u^2 + v^2 <= 1/4 }")


@pytest.fixture(scope="session")
def alpha_n():
    """Nonlinear spiral with finite-time blow-up outside the inner disk."""
    return parse_problem(
        "ode { u' = -v - u*(1/4 - u^2 - v^2); v' = u - v*(1/4 - u^2 - v^2) }"
        "  goal { u^2 + v^2 >= 2 }"
    )


def problem_path(name: str) -> pathlib.Path:
    return PROBLEMS / name
