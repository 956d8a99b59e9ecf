"""Acceptance suite: one catalogue experiment per criterion, run at its shipped configuration.

Each test prints a PASS/FAIL line; the lines are repeated in the terminal summary so they
survive output capture.
"""
import pytest

from kinspde.experiments import catalog, resolve_config, run_experiment

BY_CRITERION = {e.criterion: e for e in catalog()}


@pytest.mark.slow
@pytest.mark.parametrize("criterion", sorted(BY_CRITERION))
def test_criterion(criterion, tmp_path, acceptance_log):
    exp = BY_CRITERION[criterion]
    result = run_experiment(resolve_config({"name": exp.name}), tmp_path)
    failed = [a for a in result.assertions if not a.passed]
    detail = "; ".join(a.line() for a in failed) if failed else f"{len(result.assertions)} assertions"
    line = f"{'PASS' if result.passed else 'FAIL'} criterion {criterion}: {exp.name} ({detail})"
    print(line)
    acceptance_log.append(line)
    assert result.passed, "\n".join(a.line() for a in result.assertions)
