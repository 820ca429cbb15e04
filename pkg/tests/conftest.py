"""Shared fixtures: a session-wide campaign cache for the acceptance suite and
a collector that prints one verdict line per acceptance criterion."""

import pytest

from tolfalsify.cli import read_records, run_rep
from tolfalsify.config import ExperimentConfig

RESULTS = pytest.StashKey[dict]()

# Two-layer: 99 candidates x 100 lower sims + 100 nominal = 10,000 sims,
# matching the one-layer budget exactly.
CAMPAIGN = {"upper_budget": 99, "lower_budget": 100, "budget": 10_000, "seed": 0}


def pytest_configure(config):
    config.stash[RESULTS] = {}


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(RESULTS, {})
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture
def verdict(request):
    """Record and print the outcome of one acceptance criterion."""

    def record(n, ok, detail):
        request.config.stash[RESULTS][n] = (bool(ok), detail)
        print(f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        return ok

    return record


class CampaignCache:
    def __init__(self, root):
        self.root = root
        self._done = {}

    def config(self, system, mode, **extra):
        return ExperimentConfig(system=system, mode=mode, **{**CAMPAIGN, **extra})

    def run(self, system, mode, rep=0):
        """Run (once per session) rep ``rep`` of a campaign through the CLI
        writer; returns ``(rep_dir, records)``."""
        key = (system, mode, rep)
        if key not in self._done:
            cfg = self.config(system, mode)
            rep_dir = self.root / f"{system}-{mode}" / f"rep-{rep}"
            run_rep(cfg, rep, rep_dir)
            self._done[key] = (rep_dir, read_records(rep_dir / "records.jsonl"))
        return self._done[key]

    def runs(self):
        return dict(self._done)


@pytest.fixture(scope="session")
def campaigns(tmp_path_factory):
    return CampaignCache(tmp_path_factory.mktemp("campaigns"))
