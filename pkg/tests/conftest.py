import numpy as np
import pytest

from flowtrack.model import BBox, DatasetConfig, Observation

SMALL = DatasetConfig(appearance_dim=4, paf_rgb_dim=2, paf_flow_dim=2, class_names=("a", "b", "c"))


def make_obs(frame=0, box=(0.0, 0.0, 10.0, 20.0), score=0.9, app=None, paf=None, actions=None, cfg=SMALL):
    app = np.eye(cfg.appearance_dim)[0] if app is None else app
    paf = np.eye(cfg.paf_dim)[0] if paf is None else paf
    actions = np.zeros(cfg.n_classes) if actions is None else actions
    return Observation(frame, BBox(*box), score, app, paf, actions)


@pytest.fixture
def small_cfg():
    return SMALL


@pytest.fixture
def rng():
    return np.random.default_rng(0)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance(request):
    """``acceptance(n, ok, detail)`` records the verdict line for criterion ``n``."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[n] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
