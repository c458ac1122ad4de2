import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from s5reset.scan import (CountingOperator, ScanElement, op_reset, op_s5, parallel_scan,
                          resettable_state_scan, sequential_scan)
from s5reset.ssm import apply_sequential, discretize_zoh, init_hippo_diag
from s5reset.verify import associativity_by_case, op_reset_sign_fault, random_elements


def el(a, b, c=0):
    return ScanElement(np.atleast_2d(np.asarray(a, complex)), np.atleast_2d(np.asarray(b, complex)),
                       np.array([bool(c)]))


def same(x, y, tol=0.0):
    assert np.abs(x.a - y.a).max() <= tol and np.abs(x.b - y.b).max() <= tol
    if x.c is not None or y.c is not None:
        np.testing.assert_array_equal(x.c, y.c)


def test_op_s5_identity_transition_is_running_sum():
    out = op_s5(el([1, 1], [2, 3]), el([1, 1], [5, -1]))
    same(out, ScanElement(np.ones((1, 2), complex), np.array([[7, 2]], complex)))


def test_op_s5_two_steps_give_second_state(rng):
    a = np.array([0.5 + 0.2j, -0.3j])
    bu1, bu2 = rng.normal(size=2), rng.normal(size=2)
    out = op_s5(el(a, bu1), el(a, bu2))
    np.testing.assert_allclose(out.a[0], a * a)
    np.testing.assert_allclose(out.b[0], a * bu1 + bu2)


def test_op_s5_associative(rng):
    x, y, z = (random_elements(rng, 50, 3) for _ in range(3))
    l, r = op_s5(op_s5(x, y), z), op_s5(x, op_s5(y, z))
    assert np.abs(l.a - r.a).max() <= 1e-12 and np.abs(l.b - r.b).max() <= 1e-12


def test_op_reset_returns_y_when_flagged(rng):
    x = random_elements(rng, 20, 4)
    y = random_elements(rng, 20, 4, flags=True)
    same(op_reset(x, y), y)


@pytest.mark.parametrize("c", [0, 1])
def test_op_reset_left_identity(rng, c):
    e = el(rng.normal(size=3) + 1j, rng.normal(size=3), c)
    same(op_reset(el(np.ones(3), np.zeros(3), 0), e), e)


def test_op_reset_prefix_after_done(rng):
    a = np.array([0.9 + 0.1j, 0.5])
    bu = rng.normal(size=(4, 2))
    flags = np.array([0, 0, 1, 0], bool)
    seq = [el(a, bu[i], flags[i]) for i in range(4)]
    pre = parallel_scan(seq, op_reset)
    np.testing.assert_allclose(pre[2].a[0], a)
    np.testing.assert_allclose(pre[2].b[0], bu[2])
    assert pre[2].c[0]
    np.testing.assert_allclose(pre[3].a[0], a * a)
    np.testing.assert_allclose(pre[3].b[0], a * bu[2] + bu[3])
    assert pre[3].c[0]


def test_op_reset_associative_in_every_flag_case():
    by_case, violations = associativity_by_case(n=4000)
    assert violations == 0
    assert all(err <= 1e-12 for err in by_case.values()), by_case


def test_sign_fault_breaks_only_case_three():
    by_case, _ = associativity_by_case(op_reset_sign_fault, n=4000)
    assert by_case[1] <= 1e-12 and by_case[2] <= 1e-12
    assert by_case[3] > 1e-3


def test_operator_dimension_mismatch():
    with pytest.raises(ValueError):
        op_reset(el([1, 1], [0, 0]), el([1, 1, 1], [0, 0, 0]))


def test_parallel_scan_prefix_sums():
    np.testing.assert_array_equal(parallel_scan(np.arange(1, 9.0), np.add),
                                  [1, 3, 6, 10, 15, 21, 28, 36])


def test_parallel_scan_single_element():
    x = random_elements(np.random.default_rng(0), 1, 3)
    same(parallel_scan(x, op_reset), x)


def test_parallel_scan_empty():
    with pytest.raises(ValueError):
        parallel_scan([], op_reset)


@pytest.mark.parametrize("L", [1, 2, 3, 5, 7, 8, 13, 64, 100])
def test_parallel_matches_sequential_fold(rng, L):
    x = random_elements(rng, L, 3)
    same(parallel_scan(x, op_reset), sequential_scan(x, op_reset), tol=1e-12)


def test_worker_count_does_not_change_result(rng):
    x = random_elements(rng, 333, 4)
    ref = parallel_scan(x, op_reset)
    for w in (2, 3, 4):
        out = parallel_scan(x, op_reset, workers=w)
        np.testing.assert_array_equal(out.a, ref.a)
        np.testing.assert_array_equal(out.b, ref.b)


@pytest.mark.parametrize("L", [2**k for k in range(1, 13)] + [3, 100, 1023])
def test_work_bound(L):
    op = CountingOperator(np.add)
    parallel_scan(np.ones(L), op)
    assert op.calls <= 2 * (L - 1)


@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-5, 5), st.booleans()),
                min_size=1, max_size=40))
@settings(max_examples=60, deadline=None)
def test_scan_equals_fold_property(items):
    a = np.array([[complex(re, im) / 2] for re, im, _, _ in items])
    b = np.array([[complex(v, -v)] for _, _, v, _ in items])
    c = np.array([f for *_, f in items])
    x = ScanElement(a, b, c)
    p, s = parallel_scan(x, op_reset), sequential_scan(x, op_reset)
    scale = 1 + np.abs(s.b).max()
    assert np.abs(p.b - s.b).max() <= 1e-12 * scale
    np.testing.assert_array_equal(p.c, s.c)


def _dssm(P=6, H=3, seed=0):
    return discretize_zoh(init_hippo_diag(P, H, seed))


def test_state_scan_no_dones_matches_sequential(rng):
    d = _dssm()
    u = rng.normal(size=(77, 3))
    xs_ref, _ = apply_sequential(d, u)
    assert np.abs(resettable_state_scan(d, u) - xs_ref).max() <= 1e-10


def test_state_scan_restarts_at_done(rng):
    d = _dssm()
    u = rng.normal(size=(40, 3))
    x0 = rng.normal(size=6) + 1j * rng.normal(size=6)
    k = 17
    dones = np.zeros(40, bool)
    dones[k] = True
    xs = resettable_state_scan(d, u, x0, dones)
    fresh, _ = apply_sequential(d, u[k:])
    assert np.abs(xs[k:] - fresh).max() <= 1e-10


def test_state_scan_reset_on_first_step_ignores_x0(rng):
    d = _dssm()
    u = rng.normal(size=(5, 3))
    dones = np.array([1, 0, 0, 0, 0], bool)
    xs = resettable_state_scan(d, u, 1e6 * np.ones(6), dones)
    np.testing.assert_allclose(xs[0], d.b_bar @ u[0], atol=1e-12)


def test_state_scan_batched_rows_are_independent(rng):
    d = _dssm()
    u = rng.normal(size=(3, 20, 3))
    x0 = rng.normal(size=(3, 6)) + 0j
    dones = rng.random((3, 20)) < 0.2
    xs = resettable_state_scan(d, u, x0, dones)
    for i in range(3):
        ref, _ = apply_sequential(d, u[i], x0[i], dones[i])
        assert np.abs(xs[i] - ref).max() <= 1e-10


def test_state_scan_bad_shapes():
    d = _dssm()
    with pytest.raises(ValueError):
        resettable_state_scan(d, np.zeros((4, 3)), None, np.zeros(5, bool))
    with pytest.raises(ValueError):
        resettable_state_scan(d, np.zeros((4, 3)), np.zeros(5))
