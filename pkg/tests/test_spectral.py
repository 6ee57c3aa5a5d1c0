from fractions import Fraction
from itertools import product

import mpmath
import pytest
from hypothesis import given

from conftest import class_coeffs
from pseudodyn.cohomology import Class11, Class22, cup11, make_blowup_space, pair
from pseudodyn.linalg import identity, inverse, matvec
from pseudodyn.maps import CohAction, cremona_action, pairing_dual
from pseudodyn.spectral import (
    SpectralError,
    cesaro_means,
    check_pseudo_identities,
    holomorphic_like_check,
    perron_pair,
    self_intersection_zero_solutions,
)

ACT = cremona_action()
X = ACT.space
SALEM = ((0, 0, 0, -1), (1, 0, 0, 1), (0, 1, 0, 1), (0, 0, 1, 1))


def action_from(M11, n):
    space = make_blowup_space(n)
    M11 = tuple(tuple(Fraction(v) for v in r) for r in M11)
    return CohAction(space, M11, pairing_dual(space, M11))


def test_cremona_nonsimple():
    with pytest.raises(SpectralError) as exc:
        perron_pair(ACT)
    assert exc.value.code == "NONSIMPLE_DOMINANT"


def test_cremona_cesaro_fallback():
    p = perron_pair(ACT, cesaro_fallback=True)
    assert p.method == "cesaro"
    assert p.theta_plus.coeffs == (Fraction(1, 3),) + (Fraction(-1, 6),) * 4
    assert p.eta_minus.coeffs == (Fraction(6),) + (Fraction(-3, 2),) * 4
    assert p.pairing == 1
    # fixed by the involution
    assert Class11(X, matvec(ACT.M11, p.theta_plus.coeffs)) == p.theta_plus


def test_fallback_scale_canonical():
    a = perron_pair(ACT, cesaro_fallback=True)
    b = perron_pair(ACT, cesaro_fallback=True, v0=X.H() * Fraction(7, 3), w0=X.h() * 5)
    assert a.theta_plus == b.theta_plus and a.eta_minus == b.eta_minus


def test_diagonal_action():
    M = [[2 if i == j == 0 else (1 if i == j else 0) for j in range(5)] for i in range(5)]
    p = perron_pair(action_from(M, 4))
    assert p.theta_plus == X.H() and p.pairing == 1
    assert p.eta_minus == X.h()
    assert p.checks["simple_dominant"]


def test_salem_matrix_against_mp_oracle():
    act = action_from(SALEM, 3)
    p = perron_pair(act)
    assert p.method == "kernel-mp"
    mpmath.mp.dps = 60
    roots = mpmath.polyroots([1, -1, -1, -1, 1], maxsteps=200, extraprec=200)
    lam = max((r for r in roots if abs(mpmath.im(r)) < mpmath.mpf(10) ** -40), key=lambda r: abs(r))
    lam = mpmath.re(lam)
    # kernel of M - lam: solve with the last coordinate fixed to 1
    A = mpmath.matrix([[SALEM[i][j] - (lam if i == j else 0) for j in range(4)] for i in range(4)])
    sub = A[0:3, 0:3]
    rhs = -A[0:3, 3]
    v = list(mpmath.lu_solve(sub, rhs)) + [mpmath.mpf(1)]
    s = sum(abs(x) for x in v)
    sign = 1 if next(x for x in v if x != 0) > 0 else -1
    v = [sign * x / s for x in v]
    for a, b in zip(p.theta_plus.coeffs, v):
        assert abs(mpmath.mpf(a.numerator) / a.denominator - b) < mpmath.mpf(10) ** -40
    assert abs(float(p.pairing) - 1) < 1e-10
    assert abs(p.lambda1.value - 1.7220838057) < 1e-9
    mpmath.mp.dps = 15


def test_jordan_block_rejected_even_with_fallback():
    with pytest.raises(SpectralError) as exc:
        perron_pair(action_from([[1, 0], [1, 1]], 1), cesaro_fallback=True)
    assert exc.value.code == "NONSIMPLE_DOMINANT"


def test_orthogonal_pair():
    # lambda = 1 twice; the default seeds H and h project to classes pairing to 0
    M = [[1, 0, 0], [0, -1, 0], [0, 0, 1]]
    with pytest.raises(SpectralError) as exc:
        perron_pair(action_from(M, 2), cesaro_fallback=True, v0=make_blowup_space(2).E(2))
    assert exc.value.code == "ORTHOGONAL_PAIR"


def test_cesaro_scalar():
    M = [[3, 0], [0, 3]]
    r = cesaro_means(M, [1, 2], 3, 20)
    assert all(T == [1, 2] for T in r.means) and all(x == 0 for x in r.residuals)


def test_cesaro_diag():
    r = cesaro_means([[2, 0], [0, 1]], [1, 1], 2, 200)
    assert r.exact
    assert all(res <= Fraction(2, n) for n, res in enumerate(r.residuals, 1))
    assert r.means[-1][0] == 1


def test_cesaro_cremona():
    r = cesaro_means(ACT.M11, X.H(), 1, 300, keep_means=False)
    assert all(res <= Fraction(2, n) for n, res in enumerate(r.residuals, 1))
    # even N average the involution exactly; odd N decrease
    assert all(res == 0 for res in r.residuals[1::2])
    odd = r.residuals[0::2]
    assert all(b < a for a, b in zip(odd, odd[1:]))
    full = cesaro_means(ACT.M11, X.H(), 1, 400)
    proj = perron_pair(ACT, cesaro_fallback=True).theta_plus
    T = full.means[-1]
    # T_N -> (+1)-eigenprojection of H, a multiple of theta+
    ratio = T.coeffs[0] / proj.coeffs[0]
    assert max(abs(float(t - ratio * q)) for t, q in zip(T.coeffs, proj.coeffs)) < 2 / 400


def test_cesaro_float_path():
    r = cesaro_means([[2.0, 1.0], [0.0, 0.5]], [1.0, 1.0], 2.0, 100)
    assert not r.exact and r.residuals[-1] < 0.05
    assert r.fitted_constant() < 5


def test_cesaro_errors():
    with pytest.raises(ValueError):
        cesaro_means([[1]], [0], 1, 3)
    with pytest.raises(ValueError):
        cesaro_means([[1]], [1], 1, 0)


def test_pseudo_identities_cremona():
    rep = check_pseudo_identities(ACT)
    assert rep["pass"] and rep["pairs_checked"] == 25
    assert rep["push_pull_identity"] == "pass" and rep["pairing_invariance"] == "pass"


def test_pseudo_identities_identity_action():
    I = identity(5)
    assert check_pseudo_identities(CohAction(X, I, I))["pass"]


def test_pseudo_identities_mutation():
    M22 = [list(r) for r in ACT.M22]
    M22[0][1] = -M22[0][1]
    rep = check_pseudo_identities(CohAction(X, ACT.M11, tuple(map(tuple, M22))))
    assert not rep["pass"]
    assert {"pair": ["H", "e_1"], "lhs": "-12", "rhs": "0"} in rep["pairing_violations"]


@given(class_coeffs(5), class_coeffs(5))
def test_argument_level_invariance(a, c):
    A, C = Class11(X, a), Class22(X, c)
    lhs = pair(Class11(X, matvec(ACT.M11, a)), Class22(X, matvec(ACT.M22, c)))
    assert lhs == pair(A, C)


def test_random_invertible_dual_invariance():
    M = [[2, 1, 0], [0, 1, 3], [1, 0, 1]]
    act = action_from(M, 2)
    assert check_pseudo_identities(CohAction(act.space, act.M11, act.M22))["pairing_invariance"] == "pass"


def test_holomorphic_like():
    rep = holomorphic_like_check(ACT, X.E(1) - X.E(2))
    assert not rep["holomorphic_like_i"]
    assert rep["self_intersection"] == (-X.e(1) - X.e(2)).to_json()
    assert len(rep["exceptional_pairings"]) == 4
    zero = Class11(X, [0] * 5)
    assert holomorphic_like_check(ACT, zero)["holomorphic_like_i"]
    assert holomorphic_like_check(ACT, zero)["theta_is_zero"]


def test_self_intersection_solutions_oracle():
    sols = self_intersection_zero_solutions(X)
    assert sols == [Class11(X, [0] * 5)]
    # brute force: no small nonzero integer class squares to zero
    for c in product(range(-2, 3), repeat=5):
        if any(c):
            assert not cup11(Class11(X, c), Class11(X, c)).is_zero()
    assert holomorphic_like_check(ACT, sols[0])["holomorphic_like_i"]
