import os
import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    """Matrix cache shared by the whole session (FRACOCP_CACHE_DIR wins if set)."""
    env = os.environ.get("FRACOCP_CACHE_DIR")
    return Path(env) if env else tmp_path_factory.mktemp("matrix_cache")


@pytest.fixture(scope="session")
def operators(cache_dir):
    """Memoized ``(mesh, dofmap, ops)`` per ``(s, level)``."""
    from fracocp import assemble_fractional_stiffness, build_dofmap, make_disc_mesh
    memo = {}

    def get(s, level):
        key = (float(s), int(level))
        if key not in memo:
            mesh = make_disc_mesh(level)
            dm = build_dofmap(mesh)
            memo[key] = (mesh, dm, assemble_fractional_stiffness(mesh, dm, s, cache_dir=cache_dir))
        return memo[key]
    return get


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
