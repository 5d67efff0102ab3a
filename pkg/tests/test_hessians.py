"""Hessian models: exact operator, shift wrapper, compact L-BFGS store."""
import numpy as np
import pytest

from minresls.core import DegenerateMiddleMatrix, Objective, OracleCounter
from minresls.hessians import LbfgsStore, exact_hvp_operator, regularized
from minresls.minres import NPC, minres_npc
from minresls.reference import dense_bfgs_matrix


def pair_rng(seed):
    return np.random.default_rng(seed)


class TestExactOperator:
    def test_identity_hessian(self):
        obj = Objective(3, lambda x: 0.5 * float(x @ x), lambda x: x.copy(),
                        lambda x, v: v.copy())
        op = exact_hvp_operator(obj, np.zeros(3))
        v = np.array([1.0, -2.0, 0.5])
        assert np.array_equal(op(v), v)
        assert op.dim == 3

    def test_charges_oracle(self):
        c = OracleCounter()
        obj = Objective(2, lambda x: 0.0, lambda x: np.zeros(2),
                        lambda x, v: 2.0 * v, counter=c)
        op = exact_hvp_operator(obj, np.zeros(2))
        op(np.ones(2)); op(np.ones(2))
        assert c.count == 4.0          # two products at cost 2 each

    def test_dense_is_symmetric_on_toy_sine(self):
        from minresls.problems import build_problem
        obj = build_problem("toy_sine", self_test=False, n=4).make_objective()
        x = np.linspace(0.1, 0.9, 8)
        H = exact_hvp_operator(obj, x).to_dense()
        assert np.max(np.abs(H - H.T)) <= 1e-12


class TestRegularized:
    def test_cancels_negative_eigenvalue(self):
        base = exact_operator_from_dense(np.diag([1.0, -1.0]))
        shifted = regularized(base, 1.0)
        assert np.array_equal(shifted(np.array([0.0, 1.0])), [0.0, 0.0])

    def test_rayleigh_quotients_shift(self):
        rng = pair_rng(2)
        M = rng.standard_normal((5, 5))
        A = 0.5 * (M + M.T)
        base = exact_operator_from_dense(A)
        shifted = regularized(base, 0.7)
        for _ in range(10):
            v = rng.standard_normal(5)
            lhs = v @ shifted(v)
            rhs = v @ (A @ v) + 0.7 * (v @ v)
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))

    def test_negative_shift_rejected(self):
        base = exact_operator_from_dense(np.eye(2))
        with pytest.raises(ValueError):
            regularized(base, -0.1)


def exact_operator_from_dense(A):
    from minresls.core import ensure_operator
    return ensure_operator(A)


class TestLbfgsStore:
    def test_empty_store_is_identity(self):
        st = LbfgsStore(2)
        assert st.gamma == 1.0 and st.n_pairs == 0
        assert np.array_equal(st.apply(np.array([3.0, 4.0])), [3.0, 4.0])

    def test_scale_from_latest_pair(self):
        st = LbfgsStore(3)
        s = np.array([1.0, 0.0, 1.0])
        assert st.update(s, 2.0 * s)
        assert abs(st.gamma - 2.0) <= 1e-15

    def test_single_pair_matches_dense(self):
        st = LbfgsStore(4)
        rng = pair_rng(7)
        s = rng.standard_normal(4)
        y = 2.0 * s
        st.update(s, y)
        B = dense_bfgs_matrix(st.gamma, [(s, y)])
        for _ in range(5):
            v = rng.standard_normal(4)
            assert np.max(np.abs(st.apply(v) - B @ v)) <= 1e-12 * np.linalg.norm(v)

    def test_multi_pair_matches_dense(self):
        rng = pair_rng(13)
        st = LbfgsStore(6, memory=10)
        pairs = []
        for _ in range(6):
            s = rng.standard_normal(6)
            y = s + 0.3 * rng.standard_normal(6)
            if st.update(s, y):
                pairs.append((s, y))
        assert len(pairs) == 6
        B = dense_bfgs_matrix(st.gamma, pairs)
        for _ in range(10):
            v = rng.standard_normal(6)
            ref = B @ v
            assert np.max(np.abs(st.apply(v) - ref)) <= 1e-9 * (1 + np.linalg.norm(ref))

    def test_eviction_keeps_last_m(self):
        rng = pair_rng(29)
        st = LbfgsStore(5, memory=10)
        history = []
        for _ in range(11):
            s = rng.standard_normal(5)
            y = s + 0.2 * rng.standard_normal(5)
            assert st.update(s, y)
            history.append((s, y))
        assert st.n_pairs == 10
        B = dense_bfgs_matrix(st.gamma, history[-10:])
        v = rng.standard_normal(5)
        assert np.max(np.abs(st.apply(v) - B @ v)) <= 1e-8 * (1 + np.linalg.norm(B @ v))

    def test_cautious_rejection_leaves_state(self):
        st = LbfgsStore(3)
        st.update(np.array([1.0, 0.0, 0.0]), np.array([2.0, 0.0, 0.0]))
        before = (st.gamma, st.n_pairs)
        e1 = np.array([1.0, 0.0, 0.0])
        e2 = np.array([0.0, 1.0, 0.0])
        assert not st.update(e1, e2)                    # y's = 0
        assert not st.update(e1, e2 + 0.5e-18 * e1)     # below the floor
        assert not st.update(np.zeros(3), e2)           # zero step
        assert (st.gamma, st.n_pairs) == before

    def test_accepts_just_above_floor_then_degenerates(self):
        # the pair passes the cautious screen but the compact middle matrix
        # is numerically singular, which only surfaces on apply
        st = LbfgsStore(3)
        e1 = np.array([1.0, 0.0, 0.0])
        e2 = np.array([0.0, 1.0, 0.0])
        assert st.update(e1, e2 + 2e-18 * e1)
        with pytest.raises(DegenerateMiddleMatrix):
            st.apply(np.ones(3))

    def test_negative_curvature_pair_kept_verbatim(self):
        st = LbfgsStore(2)
        e1 = np.array([1.0, 0.0])
        assert st.update(e1, -e1)
        assert st.gamma == -1.0
        out = minres_npc(st.operator(), np.array([1.0, 1.0]), 1e-8, 20)
        assert out.flag == NPC

    def test_operator_is_symmetric(self):
        rng = pair_rng(31)
        st = LbfgsStore(5)
        for _ in range(4):
            s = rng.standard_normal(5)
            st.update(s, s + 0.1 * rng.standard_normal(5))
        B = st.operator().to_dense()
        assert np.max(np.abs(B - B.T)) <= 1e-10

    def test_dimension_mismatch(self):
        st = LbfgsStore(3)
        with pytest.raises(ValueError):
            st.update(np.ones(2), np.ones(2))
        with pytest.raises(ValueError):
            LbfgsStore(3, memory=0)
