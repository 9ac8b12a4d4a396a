"""The eleven acceptance criteria, run once per session through the suite."""
import pytest

from gunitary import suite

NAMES = {
    1: "cb-norm calibration",
    2: "unital exactness",
    3: "level-sweep monotonicity",
    4: "classical constants",
    5: "l1-sum constant",
    6: "min-quantization attainment",
    7: "cone exactness",
    8: "operator-system characterization",
    9: "M-ideal quotient",
    10: "non-unital operator systems",
    11: "determinism and sandwich",
}


@pytest.fixture(scope="module")
def results():
    res, timing = suite.run_suite(suite.SuiteConfig(seed=0))
    by_number = {r.number: r for r in res}
    print()
    for r in res:
        print(r.line())
    return by_number, timing


@pytest.mark.parametrize("number", sorted(NAMES), ids=lambda n: f"{n:02d}-{NAMES[n]}")
def test_criterion(results, number):
    by_number, _ = results
    r = by_number[number]
    print(r.line())
    assert r.name == NAMES[number]
    assert r.passed, r.line()


def test_all_criteria_reported(results):
    by_number, _ = results
    assert sorted(by_number) == sorted(NAMES)


def test_runtime_limits(results):
    _, timing = results
    assert timing["cb_calibration"] < 30
    assert timing["unital_exactness"] < 300
    assert timing["classical_constants"] < 120
