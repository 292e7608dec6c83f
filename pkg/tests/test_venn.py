import numpy as np
import pytest

from xfvar.algebra import EXACT, ExplanationMeasure
from xfvar.errors import DomainError
from xfvar.venn import venn_ascii, venn_svg


def _m2():
    return ExplanationMeasure(("W1", "W2"), np.array([0.0, 0.5, 0.0, 0.5]), None, EXACT)


def _m3():
    atoms = np.array([0.05, 0.1, 0.2, 0.05, 0.3, 0.1, 0.15, 0.05])
    return ExplanationMeasure(("A", "B", "C"), atoms, None, EXACT)


def test_ascii_two_vars():
    text = venn_ascii(_m2(), None)
    assert "{W1}" in text and "{W1∧W2}" in text
    assert "0.500" in text
    assert text.endswith("\n")


def test_ascii_three_vars_has_all_regions():
    text = venn_ascii(_m3(), None)
    for label in ("{}", "{A}", "{B}", "{C}", "{A∧B}", "{A∧C}", "{B∧C}", "{A∧B∧C}"):
        assert label in text


def test_svg_structure():
    svg = venn_svg(_m3(), None)
    assert svg.startswith("<svg")
    assert svg.count("<circle") == 3
    assert "0.300" in svg  # the {C} region mass
    assert svg.rstrip().endswith("</svg>")


def test_svg_two_circles():
    svg = venn_svg(_m2(), None)
    assert svg.count("<circle") == 2
    assert "W1" in svg and "W2" in svg


def test_svg_is_deterministic():
    assert venn_svg(_m3(), None) == venn_svg(_m3(), None)


def test_outcome_marginalized_before_render():
    atoms = np.zeros(8)
    atoms[0b001] = 0.5  # {W1}
    atoms[0b011] = 0.3  # {W1, W2}
    atoms[0b100] = 0.2  # {Y} alone
    m = ExplanationMeasure(("W1", "W2", "Y"), atoms, None, EXACT)
    text = venn_ascii(m, "Y")
    assert "{W1}" in text and "Y" not in text.replace("W1", "").replace("W2", "")
    assert "{W1}    = 0.500" in text
    assert "{}      = 0.200" in text  # the {Y} atom folds into the rest region
    svg = venn_svg(m, "Y")
    assert svg.count("<circle") == 2


def test_variable_count_bounds():
    one = ExplanationMeasure(("A",), np.array([0.4, 0.6]), None, EXACT)
    with pytest.raises(DomainError):
        venn_ascii(one, None)
    atoms = np.zeros(16)
    atoms[0] = 1.0
    four = ExplanationMeasure(("A", "B", "C", "D"), atoms, None, EXACT)
    with pytest.raises(DomainError):
        venn_svg(four, None)
    # an outcome column brings a 4-variable report back in range
    atoms4 = np.zeros(16)
    atoms4[0b0001] = 1.0
    m = ExplanationMeasure(("A", "B", "C", "Y"), atoms4, None, EXACT)
    assert venn_svg(m, "Y").count("<circle") == 3


def test_negative_zero_not_rendered():
    m = ExplanationMeasure(("A", "B"), np.array([0.0, 1.0, -0.0, 0.0]), None, EXACT)
    text = venn_ascii(m, None)
    assert "-0.000" not in text
