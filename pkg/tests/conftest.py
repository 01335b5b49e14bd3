"""Terminal-summary hook giving one verdict line per acceptance test."""

from __future__ import annotations

_ACCEPTANCE_LABELS = {
    "test_bounds_suite": "divergence/entropy bounds on 1e4 random instances, disjoint attainment",
    "test_gradient_suite": "analytic gradients vs central differences, 100 instances per loss",
    "test_toy_reproduction": "four-bump two-group comparison over 20 seeds (medians)",
    "test_algorithm_contract": "loop contract: 18 updates, trace length 28, steps in {0, alpha}",
    "test_improvement_and_ablation": "separation improvement and ablation ordering over 20 seeds",
    "test_extraction_equivalence": "token extraction vs transcription oracle on 1e3 matrices",
    "test_score_construction": "score construction: disjoint/identical/ramp/golden CSV",
    "test_dump_roundtrip": "dump write/read round-trip, bit for bit",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            if name in _ACCEPTANCE_LABELS and name not in verdicts:
                verdicts[name] = "PASS" if outcome == "passed" else "FAIL"
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for name, label in _ACCEPTANCE_LABELS.items():
            if name in verdicts:
                terminalreporter.write_line(f"{verdicts[name]}  {label}")
