import json

import numpy as np
import pytest
from scipy.integrate import quad

from pseudodyn.maps import cremona_catalog_entry, identity_map, squaring_map
from pseudodyn.wedge import (
    Bump,
    FubiniStudyPotential,
    LogAbsPotential,
    WedgeError,
    WedgeExperiment,
    _trace_density,
    chart_jacobian,
    chart_map,
    eta_matrix,
    experiment_from_json,
    pair_left,
    pair_right,
    positivity_scan,
    push_measure,
    pushed_eta,
    run_experiment,
)

J = cremona_catalog_entry()
I = identity_map()
CENTER = (1 + 0.2j, 0.8 - 0.3j, 1.1 + 0.1j)
G1 = LogAbsPotential.linear([-CENTER[0], 1, 0, 0])
# vanishes at CENTER and involves every coordinate, so H_u is a full complex rank-one matrix
G3 = LogAbsPotential.linear([-(CENTER[0] + (2 - 1j) * CENTER[1] + 0.5j * CENTER[2]), 1, 2 - 1j, 0.5j])


def cremona_exp(eta="fubini_study", n=40_000, seed=0, pot=G1, eps=(1e-1, 1e-2)):
    return WedgeExperiment(J, pot, eta, Bump(CENTER, 0.3), eps, n, seed)


def random_chart_points(n, seed):
    rng = np.random.default_rng(seed)
    return 1.0 + 0.3 * (rng.standard_normal((n, 3)) + 1j * rng.standard_normal((n, 3)))


def test_density_matches_closed_form_hessian():
    # u_eps = 1/2 log(|a.z + a0|^2 + eps^2) has complex Hessian eps^2/2 a conj(a)^T / (|g|^2+eps^2)^2
    a0, a = 0.3 - 0.1j, np.array([1.0, -0.5 + 0.2j, 0.25j])
    pot = LogAbsPotential.linear([a0, *a])
    z = random_chart_points(200, 1)
    eps = 0.2
    g = a0 + z @ a
    c = eps ** 2 / 2 / (np.abs(g) ** 2 + eps ** 2) ** 2
    for kind in ("euclidean", "fubini_study"):
        A = eta_matrix(kind, z)
        H = c[:, None, None] * a[None, :, None] * a.conj()[None, None, :]
        exact = (2 / np.pi) * np.einsum("mjk,mjk->m", H, A).real
        fd = _trace_density(pot.regularized(eps), z, A, 1e-4)
        # rounding floor of a second difference: ~1e-16 |u| / h^2 = 1e-8
        np.testing.assert_allclose(fd, exact, rtol=1e-5, atol=1e-7)


def test_fubini_study_eta_is_cofactor_contraction():
    # <H, A> = d/dt det(G + t H) at t = 0 (Jacobi's formula), the omega_FS^2 density
    rng = np.random.default_rng(9)
    z = random_chart_points(20, 8)
    A = eta_matrix("fubini_study", z)
    for m in range(len(z)):
        r2 = 1 + np.sum(np.abs(z[m]) ** 2)
        G = (np.eye(3) * r2 - np.outer(z[m].conj(), z[m])) / r2 ** 2
        B = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        H = B @ B.conj().T
        t = 1e-6
        ddet = (np.linalg.det(G + t * H) - np.linalg.det(G - t * H)) / (2 * t)
        assert abs(np.sum(H * A[m]) - ddet) < 1e-6 * max(1, abs(ddet))


def test_fubini_study_eta_positive():
    z = random_chart_points(100, 2)
    A = eta_matrix("fubini_study", z)
    np.testing.assert_allclose(A, A.conj().transpose(0, 2, 1), atol=1e-14)
    assert np.all(np.linalg.eigvalsh(A) > 0)
    np.testing.assert_allclose(eta_matrix("fubini_study", np.zeros((1, 3), complex))[0], np.eye(3), atol=1e-15)


def test_chart_jacobian_against_differences():
    z = random_chart_points(20, 3)
    Jz = chart_jacobian(J, z)
    h = 1e-6
    for j in range(3):
        dz = np.zeros(3, complex)
        dz[j] = h
        wp, _ = chart_map(J, z + dz)
        wm, _ = chart_map(J, z - dz)
        np.testing.assert_allclose(Jz[:, :, j], (wp - wm) / (2 * h), rtol=1e-6, atol=1e-8)
    # J is z -> 1/z coordinatewise in this chart
    np.testing.assert_allclose(Jz, np.stack([np.diag(-1 / v ** 2) for v in z]), rtol=1e-12, atol=1e-14)


def test_pushed_eta_is_involutive_for_cremona():
    z = random_chart_points(10, 4)
    A, w, det2, good, _ = pushed_eta(cremona_exp("euclidean"), z)
    assert good.all()
    np.testing.assert_allclose(w, 1 / z, rtol=1e-12)
    np.testing.assert_allclose(det2, np.prod(np.abs(z), axis=1) ** -4, rtol=1e-12)


def test_identity_bit_exact():
    exp = WedgeExperiment(I, G1, "fubini_study", Bump(CENTER, 0.3), (1e-2,), 20_000, 5)
    assert pair_left(exp, 1e-2).value == pair_right(exp, 1e-2).value


@pytest.mark.parametrize("pot", [G1, G3], ids=["z1", "mixed"])
def test_cremona_agreement(pot):
    exp = cremona_exp(n=60_000, pot=pot)
    for eps in exp.eps_schedule:
        L, R = pair_left(exp, eps), pair_right(exp, eps)
        comb = np.hypot(L.stderr, R.stderr)
        assert abs(L.value - R.value) <= max(0.1 * abs(L.value), 3 * comb)
        assert L.guarded == 0 and L.min_guard_ratio > 1e-2


def test_zero_bump():
    exp = WedgeExperiment(J, G1, "euclidean", Bump(CENTER, 0.3, zero=True), (1e-1,), 5000, 0,
                          Bump(CENTER, 0.3).box)
    assert pair_left(exp, 0.1).value == 0.0


def slice_oracle(w):
    I1 = w * quad(lambda t: np.exp(-1 / (1 - t * t)), -1, 1)[0]
    return np.exp(-2) * I1 ** 4


def test_hyperplane_slice_oracle_and_cauchy():
    w = 0.5
    exp = WedgeExperiment(I, LogAbsPotential.linear([0, 1, 0, 0]), "euclidean",
                          Bump((0j, 1 + 0j, 1 + 0j), w), (0.2, 0.1, 0.05, 0.025), 400_000, 0)
    vals = [pair_left(exp, e) for e in exp.eps_schedule]
    oracle = slice_oracle(w)
    assert abs(vals[-1].value - oracle) <= 3 * vals[-1].stderr
    diffs = [abs(b.value - a.value) for a, b in zip(vals, vals[1:])]
    assert all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:]))


def test_large_eps_seed_stability():
    a, b = (WedgeExperiment(I, LogAbsPotential.linear([0, 1, 0, 0]), "euclidean",
                            Bump((0j, 1 + 0j, 1 + 0j), 0.5), (1.0,), 50_000, s) for s in (1, 2))
    La, Lb = pair_left(a, 1.0), pair_left(b, 1.0)
    assert abs(La.value - Lb.value) <= 3 * np.hypot(La.stderr, Lb.stderr)


def test_positivity_psh():
    for eta in ("euclidean", "fubini_study"):
        exp = cremona_exp(eta, n=10_000, eps=(1e-1, 1e-2, 1e-3))
        for eps in exp.eps_schedule:
            assert positivity_scan(exp, eps).fraction >= 0.99
    fs = WedgeExperiment(J, FubiniStudyPotential(), "fubini_study", Bump(CENTER, 0.3), (1e-2,), 5000, 0)
    assert positivity_scan(fs, 1e-2).fraction >= 0.99


def test_positivity_detects_negative():
    exp = cremona_exp("euclidean", n=10_000, pot=LogAbsPotential.linear([-CENTER[0], 1, 0, 0], -1))
    assert positivity_scan(exp, 1e-2).fraction < 0.05


def test_positivity_zero_eta():
    exp = cremona_exp("zero", n=2000)
    assert positivity_scan(exp, 1e-2).fraction == 1.0


def test_guard_abort():
    exp = WedgeExperiment(J, G1, "euclidean", Bump((0.001 + 0j, 1 + 0j, 1 + 0j), 0.005), (1e-2,), 1000, 0)
    for fn in (pair_left, pair_right):
        with pytest.raises(WedgeError) as exc:
            fn(exp, 1e-2)
        assert exc.value.code == "GUARD_ABORT"


def test_no_inverse():
    exp = WedgeExperiment(squaring_map(), G1, "euclidean", Bump(CENTER, 0.3), (1e-2,), 100, 0)
    with pytest.raises(WedgeError) as exc:
        pair_left(exp, 1e-2)
    assert exc.value.code == "NO_INVERSE"


def test_eps_schedule_validated():
    with pytest.raises(ValueError):
        cremona_exp(eps=(1e-2, 1e-1))
    with pytest.raises(ValueError):
        cremona_exp(eps=(1e-1, 0.0))


def test_push_measure_identity():
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((50, 4)) + 1j * rng.standard_normal((50, 4))
    w = rng.random(50)
    out = push_measure(I, pts, w)
    ref = pts / np.take_along_axis(pts, np.argmax(np.abs(pts), 1)[:, None], 1)
    np.testing.assert_allclose(out.points, ref, atol=1e-15)
    assert out.lost_mass == 0.0 and np.array_equal(out.weights, w)


def test_push_measure_torus():
    rng = np.random.default_rng(1)
    pts = np.exp(2j * np.pi * rng.random((200, 4)))
    out = push_measure(J, pts, np.full(200, 1 / 200))
    np.testing.assert_allclose(np.abs(out.points), 1.0, atol=1e-12)
    assert abs(out.weights.sum() + out.lost_mass - out.total_in) < 1e-15


def test_push_measure_all_lost():
    pts = np.tile([1.0, 0, 0, 0], (5, 1))
    out = push_measure(J, pts, [0.5, 0.25, 0.125, 0.0625, 0.0625])
    assert out.lost_mass == out.total_in == 1.0 and len(out.weights) == 0


def test_push_measure_accounting():
    rng = np.random.default_rng(2)
    pts = rng.standard_normal((40, 4)).astype(complex)
    pts[::4] = [0, 1, 0, 0]
    w = rng.random(40)
    out = push_measure(J, pts, w)
    assert out.lost_mass == pytest.approx(w[::4].sum(), abs=0)
    assert out.weights.sum() + out.lost_mass == pytest.approx(w.sum(), rel=1e-15)


def test_experiment_json_and_determinism():
    data = {"map": "cremona_j",
            "potential": {"kind": "log_abs", "linear": [[-1.0, -0.2], 1, 0, 0]},
            "eta": "fubini_study",
            "test_fn": {"center": [[1.0, 0.2], [0.8, -0.3], [1.1, 0.1]], "half_width": 0.3},
            "eps_schedule": [0.1, 0.01], "n_samples": 5000, "seed": 3}
    a = json.dumps(run_experiment(experiment_from_json(data)), sort_keys=True)
    b = json.dumps(run_experiment(experiment_from_json(data)), sort_keys=True)
    assert a == b
    res = json.loads(a)
    assert all(r["agree"] for r in res["results"])
    assert res["experiment"]["n_samples"] == 5000
    with pytest.raises(ValueError):
        experiment_from_json({**data, "eta": "bogus"})
    with pytest.raises(ValueError):
        experiment_from_json({**data, "potential": {"kind": "bogus"}})
