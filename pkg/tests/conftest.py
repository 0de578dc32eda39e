import numpy as np
import pytest

from rspap.assignment import build_disclosure_table
from rspap.measures import PropertyContext, PropertyKind
from rspap.rbac import bind_dataset, evaluate_profile, generate_workload
from rspap.synthetic import synthetic_table
from rspap.vuln import generate_vuln_matrix


@pytest.fixture(scope="session")
def corpus_cells():
    return synthetic_table(60000, np.random.default_rng(7)).cells


def small_instance(n, m, seed, cells, kind="KLD", s=1.2, objects=None, clusters=None):
    """Evaluated profile, disclosure table and matrix for a seeded toy problem."""
    rng = np.random.default_rng(seed)
    skel = generate_workload(n, objects or 150 * n, s, rng)
    bound = bind_dataset(skel, cells.size, rng)
    support = np.concatenate([e.entry_ids for e in bound.partitions.values()])
    ctx = PropertyContext(cells, PropertyKind(kind), support=support)
    prof = evaluate_profile(bound, ctx, 3)
    D = generate_vuln_matrix(clusters or [m], rng)
    return prof, build_disclosure_table(prof), D


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
