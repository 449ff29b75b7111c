import numpy as np
import pytest

from grouppolar.groups import make_group

GROUP_SPECS = {
    "Z2": [(2, 1)],
    "Z4": [(2, 2)],
    "Z6": [(2, 1), (3, 1)],
    "Z8": [(2, 3)],
    "Z2xZ2": [(2, 1), (2, 1)],
}


def random_ensemble(count: int, specs=None):
    """Seeded random channels cycling over the groups, 2 to 10 outputs each."""
    from grouppolar.channels import random_channel

    specs = specs or GROUP_SPECS
    names = sorted(specs)
    for s in range(count):
        outputs = 2 + (s * 7919) % 9
        yield random_channel(make_group(specs[names[s % len(names)]]), outputs, seed=s)


_ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    _ACCEPTANCE.setdefault(criterion, []).append((passed, detail))


@pytest.fixture
def acceptance():
    return record


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[k]
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
