import numpy as np
import pytest
from hypothesis import settings

from cossiga.assembly import assemble_full
from cossiga.dictionary import build_dictionary
from cossiga.exact import get_exact
from cossiga.geometry import builtin_domain
from cossiga.quadrature import default_quadrature
from cossiga.testspace import build_test_basis, choose_R

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class Small:
    """A tiny discretization shared across tests."""

    def __init__(self, domain, case, p, L, l0=1, regularity="Cmax"):
        self.g = builtin_domain(domain)
        self.exact = get_exact(case)
        self.quad = default_quadrature(p, L)
        self.dic = build_dictionary(p, regularity, l0, L, self.g, self.quad)
        self.R = choose_R(p, regularity, L)
        self.tb = build_test_basis(self.R, self.g, self.quad)
        self._sys = None

    @property
    def system(self):
        if self._sys is None:
            self._sys = assemble_full(self.dic, self.tb, self.g, self.quad, self.exact)
        return self._sys


@pytest.fixture(scope="session")
def annulus_p1():
    return Small("quarter_annulus", "poly_only_2d", 1, 2)


@pytest.fixture(scope="session")
def annulus_p2():
    return Small("quarter_annulus", "polygauss2d", 2, 3)


@pytest.fixture(scope="session")
def square_p2():
    return Small("unit_square", "sine_mode", 2, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
