import numpy as np
import pytest

from wiltscan.raster import multispectral_profile


@pytest.fixture
def ms_profile():
    return multispectral_profile()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Six plots per class, every sensor, written once per session."""
    from wiltscan.synth import SynthConfig, generate_synthetic_dataset

    out = tmp_path_factory.mktemp("synth")
    gt = generate_synthetic_dataset(SynthConfig(n_plots_per_class=6, plot_size=12, seed=5), out)
    return out, gt


_ACCEPTANCE = {}


@pytest.fixture
def record_criterion(request):
    """Record a one-line pass/fail verdict for an acceptance criterion."""

    def record(number, passed, detail):
        _ACCEPTANCE[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
