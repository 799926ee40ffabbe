import numpy as np
import pytest

from priorsynth import Attribute, Schema


class FixedUniform:
    """Stand-in rng whose ``random`` always returns the same uniform draw.

    u = 0.5 maps to exactly zero Laplace noise.
    """

    def __init__(self, u=0.5):
        self.u = u

    def random(self, size=None):
        if size is None:
            return self.u
        return np.full(size, self.u)


@pytest.fixture
def ab_schema():
    return Schema([Attribute("A", ("a0", "a1")), Attribute("B", ("b0", "b1", "b2"))])


@pytest.fixture
def zero_noise():
    return FixedUniform(0.5)


def write_run(directory, data, public=None, **overrides):
    """Write private/public CSVs for ``data`` and a config next to them; return the config path."""
    import json

    from priorsynth.io import write_csv

    write_csv(directory / "private.csv", data)
    write_csv(directory / "public.csv", public if public is not None else data)
    config = {
        "config_version": 1,
        "schema": data.schema.to_dict(),
        "puma_to_state": dict(data.states),
        "privacy": {"epsilon": 10.0, "stability": 1},
        "paths": {"public": "public.csv", "private": "private.csv", "output_dir": "out"},
        "seed": 0,
    }
    config.update(overrides)
    path = directory / "config.json"
    path.write_text(json.dumps(config, indent=2))
    return path


ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)
