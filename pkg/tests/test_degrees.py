import csv
import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudodyn.degrees import (
    DegreeSequence,
    check_log_concavity,
    degree_sequence,
    dyn_degree_estimate,
    dynamical_degrees,
    largest_real_root_abs,
    monomial_degree_sequence,
    sequence_csv,
    spectral_radius,
    stability_report,
)
from pseudodyn.maps import catalog, cremona_catalog_entry, identity_map, monomial_map, squaring_map

CYCLIC = ((1, 1, 0), (0, 1, 1), (1, 0, 1))
J = cremona_catalog_entry()


def homog_degree(B):
    """Oracle: degree of the homogenized torus map x -> x^B, written independently."""
    B = np.asarray(B, dtype=object)
    cols = [min(0, *B[:, j]) for j in range(3)]
    return max([-sum(cols)] + [sum(B[i, j] - cols[j] for j in range(3)) for i in range(3)])


def test_cremona_sequence():
    assert degree_sequence(J, 2).degrees == [3, 1]
    assert degree_sequence(J, 6).degrees == [3, 1, 3, 1, 3, 1]


def test_squaring_sequence():
    assert degree_sequence(squaring_map(), 3).degrees == [2, 4, 8]


def test_monomial_sequence_matches_oracle():
    f = monomial_map(CYCLIC)
    seq = degree_sequence(f, 8)
    A = np.array(CYCLIC, dtype=object)
    P = np.identity(3, dtype=object)
    expected = []
    for _ in range(8):
        P = P.dot(A)
        expected.append(homog_degree(P))
    assert seq.degrees == expected == monomial_degree_sequence(CYCLIC, 8)
    assert expected[:4] == [2, 4, 8, 16]


@given(st.lists(st.lists(st.integers(-2, 2), min_size=3, max_size=3), min_size=3, max_size=3))
def test_monomial_closed_form_random(A):
    if round(np.linalg.det(np.array(A, dtype=float))) == 0:
        return
    f = monomial_map(A)
    seq = degree_sequence(f, 3)
    assert seq.degrees == monomial_degree_sequence(A, 3)
    assert seq.submultiplicative()


def test_submultiplicative_catalog():
    for f in catalog().values():
        assert degree_sequence(f, 5).submultiplicative()


def test_inverse_degrees():
    assert degree_sequence(J, 3, p=2).degrees == [3, 1, 3]
    with pytest.raises(ValueError):
        degree_sequence(squaring_map(), 2, p=2)


def test_term_budget_truncates():
    seq = degree_sequence(monomial_map(CYCLIC), 6, term_budget=0)
    assert seq.truncated and len(seq.entries) == 1


def test_estimates():
    assert dyn_degree_estimate(degree_sequence(J, 6)).estimate == 1.0
    est = dyn_degree_estimate(degree_sequence(squaring_map(), 6))
    assert est.estimate == 2.0 and est.upper_bound == 2.0
    with pytest.raises(ValueError):
        dyn_degree_estimate(degree_sequence(J, 2))


def test_estimate_flags_truncation():
    seq = DegreeSequence("x", ((1, 2), (2, 4), (3, 8)), truncated=True)
    assert dyn_degree_estimate(seq).approximate


def test_spectral_radius_examples():
    enc = spectral_radius(J.action.M11)
    assert enc.certified and enc.contains(1.0) and enc.hi - enc.lo <= Fraction(1, 10 ** 12)
    assert spectral_radius([[1 if i == j else 0 for j in range(5)] for i in range(5)]).contains(1.0)
    golden = spectral_radius([[1, 1], [1, 0]])
    assert golden.contains((1 + 5 ** 0.5) / 2)
    assert abs(golden.value - 1.6180339887) < 1e-10


def test_spectral_radius_negative_root():
    enc = spectral_radius([[-3, 0], [0, 2]])
    assert enc.contains(3.0)


def test_spectral_radius_complex_dominant_uncertified():
    # eigenvalues 2i, -2i and 1: no real root attains the modulus
    enc = spectral_radius([[0, -2, 0], [2, 0, 0], [0, 0, 1]])
    assert not enc.certified and abs(enc.value - 2.0) < 1e-9


def test_largest_root_zero_poly():
    assert largest_real_root_abs([1, 0, 0]) == (0, 0)


def test_pushforward_conjugacy():
    act = J.action
    a, b = spectral_radius(act.M11), spectral_radius(act.push22)
    assert a.lo == b.lo and a.hi == b.hi


def test_log_concavity_examples():
    assert check_log_concavity((1, 1, 1, 1)).passed
    r = check_log_concavity((1, 2, 4, 8))
    assert r.passed and r.margins == (0.0, 0.0)
    assert not check_log_concavity((1, 1, 3, 1)).passed
    for f in catalog().values():
        assert check_log_concavity(dynamical_degrees(f)).passed


def test_dynamical_degrees_monomial():
    lams = dynamical_degrees(monomial_map(CYCLIC))
    ev = np.linalg.eigvals(np.array(CYCLIC, dtype=float))
    pairs = [abs(ev[i] * ev[j]) for i in range(3) for j in range(i + 1, 3)]
    assert abs(lams[1] - max(abs(ev))) < 1e-9
    assert abs(lams[2] - max(pairs)) < 1e-9
    assert lams[3] == 2.0


def test_stability_reports():
    r = stability_report(J, 6)
    assert not r.stable_downstairs and r.first_drop == 2
    assert r.upstairs_stable
    assert r.predicted == [3.0, 1.0] * 3
    s = stability_report(squaring_map(), 5)
    assert s.stable_downstairs and s.first_drop is None and s.sequence.degrees == [2, 4, 8, 16, 32]
    m = stability_report(monomial_map(CYCLIC), 5)
    assert m.predicted == [float(d) for d in m.sequence.degrees]


def test_stability_needs_data():
    from pseudodyn.maps import RationalMap
    from pseudodyn.polynomials import Poly
    x = [Poly.var(i) for i in range(4)]
    f = RationalMap((x[0] * x[1], x[1] * x[1], x[2] * x[0], x[3] * x[3]))
    with pytest.raises(ValueError):
        stability_report(f, 3)


def test_sequence_csv():
    text = sequence_csv(degree_sequence(J, 4), rho=1.0)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["n", "d_n", "d_n_root", "rho_power", "stable_flag"]
    assert [(int(r[0]), int(r[1])) for r in rows[1:]] == [(1, 3), (2, 1), (3, 3), (4, 1)]
