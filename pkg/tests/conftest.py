import numpy as np
import pytest

from micropolar.spectral import GridSpec, SpectralField, VectorField, dealias, leray_project


def random_scalar(grid, rng, mean_free=True):
    f = dealias(SpectralField.from_physical(grid, rng.standard_normal(grid.shape)))
    if mean_free:
        f.coeffs[0, 0, 0] = 0.0
    return f


def random_vector(grid, rng, mean_free=True):
    f = dealias(VectorField.from_physical(grid, rng.standard_normal((3,) + grid.shape)))
    if mean_free:
        f.coeffs[:, 0, 0, 0] = 0.0
    return f


def random_solenoidal(grid, rng):
    return leray_project(random_vector(grid, rng))


def smooth_vector(grid, rng, kmax=3, decay=2.0):
    """Random field on |k_i| <= kmax with coefficients ~ |k|^-decay."""
    from micropolar.spectral import lattice_indices, wavenumber_squared

    ki = lattice_indices(grid)
    band = np.all(np.abs(ki) <= kmax, axis=0)
    f = random_vector(grid, rng)
    k2 = wavenumber_squared(grid).copy()
    k2[0, 0, 0] = 1.0
    f.coeffs *= np.where(band, k2 ** (-decay / 2), 0.0)
    return f


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


@pytest.fixture
def grid16():
    return GridSpec(16)


_ACCEPTANCE_LINES: dict[int, str] = {}


class AcceptanceRecorder:
    """Collects one verdict line per acceptance criterion."""

    def record(self, number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES[number] = line
        print(line)
        return ok


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[number])
