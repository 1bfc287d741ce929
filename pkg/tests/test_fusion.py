"""Fusion forward semantics and analytic-vs-numeric gradient agreement."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evolvex.fusion import (
    FusionParams,
    ModalityTriple,
    fuse,
    fuse_attention,
    fuse_attention_backward,
    fuse_concat,
    fuse_concat_backward,
    fuse_crossmodal,
    fuse_crossmodal_backward,
    init_fusion_params,
    initial_fused_state,
    project,
    project_backward,
    softmax,
    softmax_vjp,
)
from evolvex.train import max_relative_error

D = 5


def random_triple(rng, d=D, batch=None):
    shape = (d,) if batch is None else (batch, d)
    return ModalityTriple(e_d=rng.normal(size=shape), e_p=rng.normal(size=shape),
                          e_e=rng.normal(size=shape))


def random_params(rng, d=D, strategy="attention"):
    return FusionParams(
        strategy=strategy,
        w_d=rng.normal(size=d), w_p=rng.normal(size=d), w_e=rng.normal(size=d),
        w_q=rng.normal(size=(d, d)),
        p_d=rng.normal(size=(d, d)), p_p=rng.normal(size=(d, d)),
        p_e=rng.normal(size=(d, d + 2)),
    )


class TestSoftmax:
    @given(st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=2, max_size=8))
    @settings(max_examples=100, deadline=None)
    def test_simplex_output(self, logits):
        arr = np.array(logits)
        out = softmax(arr)
        assert np.all(np.isfinite(out))
        assert np.all(out >= 0)
        assert abs(out.sum() - 1.0) < 1e-9
        if arr.max() - arr.min() < 700:  # beyond this exp underflows to exact 0
            assert np.all(out > 0)

    def test_vjp_matches_jacobian(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=4)
        alpha = softmax(x)
        jac = np.diag(alpha) - np.outer(alpha, alpha)
        d_alpha = rng.normal(size=4)
        np.testing.assert_allclose(softmax_vjp(alpha, d_alpha), jac @ d_alpha,
                                   atol=1e-12)


class TestConcat:
    def test_verbatim_layout(self):
        triple = ModalityTriple(e_d=np.array([1.0, 2.0]), e_p=np.array([3.0, 4.0]),
                                e_e=np.array([5.0, 6.0]))
        fused = fuse_concat(triple)
        assert fused.f.tolist() == [1, 2, 3, 4, 5, 6]
        assert fused.alphas is None

    def test_zeros(self):
        z = np.zeros(4)
        fused = fuse_concat(ModalityTriple(z, z, z))
        assert fused.f.shape == (12,)
        assert np.all(fused.f == 0)

    def test_first_slice_is_demographic(self):
        rng = np.random.default_rng(1)
        triple = random_triple(rng)
        fused = fuse_concat(triple)
        np.testing.assert_array_equal(fused.f[:D], triple.e_d)

    def test_backward_splits(self):
        df = np.arange(9.0)
        de_d, de_p, de_e = fuse_concat_backward(df, 3)
        assert de_d.tolist() == [0, 1, 2]
        assert de_e.tolist() == [6, 7, 8]


class TestAttention:
    def test_equal_scores_uniform_mix(self):
        rng = np.random.default_rng(2)
        triple = random_triple(rng)
        params = random_params(rng)
        params.w_d = params.w_p = params.w_e = np.zeros(D)
        fused = fuse_attention(triple, params)
        np.testing.assert_allclose(fused.alphas, [1 / 3] * 3, atol=1e-12)
        np.testing.assert_allclose(
            fused.f, (triple.e_d + triple.e_p + triple.e_e) / 3, atol=1e-12)

    def test_log2_score_gives_half_weight(self):
        e = np.zeros(D)
        triple = ModalityTriple(e_d=np.eye(D)[0] * np.log(2.0), e_p=e.copy(),
                                e_e=e.copy())
        params = random_params(np.random.default_rng(3))
        params.w_d = np.eye(D)[0]
        params.w_p = np.zeros(D)
        params.w_e = np.zeros(D)
        fused = fuse_attention(triple, params)
        np.testing.assert_allclose(fused.alphas, [0.5, 0.25, 0.25], atol=1e-12)

    def test_weights_form_simplex(self):
        rng = np.random.default_rng(4)
        fused = fuse_attention(random_triple(rng, batch=7), random_params(rng))
        assert np.all(fused.alphas >= 0)
        np.testing.assert_allclose(fused.alphas.sum(axis=-1), 1.0, atol=1e-9)

    def test_permutation_equivariance(self):
        """Swapping (modality, score vector) pairs permutes nothing observable."""
        rng = np.random.default_rng(5)
        triple = random_triple(rng)
        params = random_params(rng)
        fused = fuse_attention(triple, params)
        swapped_triple = ModalityTriple(e_d=triple.e_p, e_p=triple.e_d,
                                        e_e=triple.e_e)
        swapped = random_params(rng)
        swapped.w_d, swapped.w_p, swapped.w_e = params.w_p, params.w_d, params.w_e
        fused_swapped = fuse_attention(swapped_triple, swapped)
        np.testing.assert_allclose(fused_swapped.f, fused.f, atol=1e-12)
        np.testing.assert_allclose(fused_swapped.alphas,
                                   fused.alphas[[1, 0, 2]], atol=1e-12)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(6)
        h = 1e-5
        for _ in range(20):
            triple = random_triple(rng)
            params = random_params(rng)
            df = rng.normal(size=D)

            def objective():
                return float(df @ fuse_attention(triple, params).f)

            fused = fuse_attention(triple, params)
            (de_d, de_p, de_e), pg = fuse_attention_backward(df, triple, params, fused)
            analytic = {"e_d": de_d, "e_p": de_p, "e_e": de_e, **pg}
            for name, holder, attr in (("e_d", triple, "e_d"), ("e_p", triple, "e_p"),
                                       ("e_e", triple, "e_e"), ("w_d", params, "w_d"),
                                       ("w_p", params, "w_p"), ("w_e", params, "w_e")):
                arr = getattr(holder, attr)
                numeric = np.zeros_like(arr)
                for idx in range(arr.size):
                    orig = arr.flat[idx]
                    arr.flat[idx] = orig + h
                    up = objective()
                    arr.flat[idx] = orig - h
                    down = objective()
                    arr.flat[idx] = orig
                    numeric.flat[idx] = (up - down) / (2 * h)
                assert max_relative_error(analytic[name], numeric) < 1e-4, name


class TestCrossModal:
    def test_orthogonal_query_uniform_mix(self):
        triple = ModalityTriple(e_d=np.eye(D)[0], e_p=np.eye(D)[1], e_e=np.eye(D)[2])
        params = random_params(np.random.default_rng(7), strategy="crossmodal")
        params.w_q = np.zeros((D, D))
        fused = fuse_crossmodal(triple, np.ones(D), params)
        np.testing.assert_allclose(fused.alphas, [1 / 3] * 3, atol=1e-12)
        np.testing.assert_allclose(
            fused.f, (triple.e_d + triple.e_p + triple.e_e) / 3, atol=1e-12)

    def test_saturated_logits_select_one_modality(self):
        """A 20-unit logit gap drives the winning weight above 1 - 1e-8."""
        gap = 20.0 * np.sqrt(D)
        triple = ModalityTriple(e_d=np.eye(D)[0] * gap, e_p=np.zeros(D),
                                e_e=np.zeros(D))
        params = random_params(np.random.default_rng(8), strategy="crossmodal")
        params.w_q = np.eye(D)
        fused = fuse_crossmodal(triple, np.eye(D)[0], params)
        assert fused.alphas[0] > 1 - 1e-8
        np.testing.assert_allclose(fused.f, triple.e_d * fused.alphas[0], atol=1e-7)

    def test_output_in_convex_hull(self):
        rng = np.random.default_rng(9)
        triple = random_triple(rng, batch=6)
        params = random_params(rng, strategy="crossmodal")
        fused = fuse_crossmodal(triple, rng.normal(size=(6, D)), params)
        stacked = triple.stack()
        assert np.all(fused.f <= stacked.max(axis=-2) + 1e-12)
        assert np.all(fused.f >= stacked.min(axis=-2) - 1e-12)
        np.testing.assert_allclose(fused.alphas.sum(axis=-1), 1.0, atol=1e-9)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(10)
        h = 1e-5
        for _ in range(20):
            triple = random_triple(rng)
            params = random_params(rng, strategy="crossmodal")
            f_prev = rng.normal(size=D)
            df = rng.normal(size=D)

            def objective():
                return float(df @ fuse_crossmodal(triple, f_prev, params).f)

            fused = fuse_crossmodal(triple, f_prev, params)
            (de_d, de_p, de_e), df_prev, pg = fuse_crossmodal_backward(
                df, triple, f_prev, params, fused)
            analytic = {"e_d": de_d, "e_p": de_p, "e_e": de_e,
                        "f_prev": df_prev, "w_q": pg["w_q"]}
            arrays = {"e_d": triple.e_d, "e_p": triple.e_p, "e_e": triple.e_e,
                      "f_prev": f_prev, "w_q": params.w_q}
            for name, arr in arrays.items():
                numeric = np.zeros_like(arr)
                for idx in range(arr.size):
                    orig = arr.flat[idx]
                    arr.flat[idx] = orig + h
                    up = objective()
                    arr.flat[idx] = orig - h
                    down = objective()
                    arr.flat[idx] = orig
                    numeric.flat[idx] = (up - down) / (2 * h)
                assert max_relative_error(analytic[name], numeric) < 1e-4, name


class TestDispatch:
    def test_concat_dispatch(self):
        rng = np.random.default_rng(11)
        triple = random_triple(rng)
        params = random_params(rng, strategy="concat")
        np.testing.assert_array_equal(fuse(triple, None, params).f,
                                      fuse_concat(triple).f)

    def test_attention_ignores_previous_state(self):
        rng = np.random.default_rng(12)
        triple = random_triple(rng)
        params = random_params(rng, strategy="attention")
        a = fuse(triple, None, params)
        b = fuse(triple, rng.normal(size=D), params)
        np.testing.assert_array_equal(a.f, b.f)

    def test_crossmodal_distinguishes_previous_states(self):
        triple = ModalityTriple(e_d=np.eye(D)[0] * 3, e_p=np.eye(D)[1] * 3,
                                e_e=np.eye(D)[2] * 3)
        params = random_params(np.random.default_rng(13), strategy="crossmodal")
        params.w_q = np.eye(D) * 4.0
        a = fuse(triple, np.eye(D)[0], params)
        b = fuse(triple, np.eye(D)[1], params)
        assert not np.allclose(a.f, b.f)

    def test_crossmodal_requires_previous_state(self):
        rng = np.random.default_rng(14)
        with pytest.raises(ValueError, match="previous fused"):
            fuse(random_triple(rng), None, random_params(rng, strategy="crossmodal"))

    def test_unknown_strategy_rejected(self):
        with pytest.raises(ValueError, match="strategy"):
            random_params(np.random.default_rng(0), strategy="bogus")


class TestProjection:
    def test_shapes_and_backward(self):
        rng = np.random.default_rng(15)
        params = random_params(rng)
        raw_d = rng.normal(size=(4, D))
        raw_p = rng.normal(size=(4, D))
        raw_e = rng.normal(size=(4, D + 2))
        triple = project(raw_d, raw_p, raw_e, params)
        assert triple.e_d.shape == (4, D)
        h = 1e-5
        df = rng.normal(size=(4, D))

        def objective():
            return float(np.sum(df * project(raw_d, raw_p, raw_e, params).e_d))

        grads = project_backward((df, np.zeros((4, D)), np.zeros((4, D))),
                                 raw_d, raw_p, raw_e)
        numeric = np.zeros_like(params.p_d)
        for idx in range(params.p_d.size):
            orig = params.p_d.flat[idx]
            params.p_d.flat[idx] = orig + h
            up = objective()
            params.p_d.flat[idx] = orig - h
            down = objective()
            params.p_d.flat[idx] = orig
            numeric.flat[idx] = (up - down) / (2 * h)
        assert max_relative_error(grads["p_d"], numeric) < 1e-4

    def test_initial_state_is_modality_mean(self):
        rng = np.random.default_rng(16)
        triple = random_triple(rng)
        np.testing.assert_allclose(
            initial_fused_state(triple),
            (triple.e_d + triple.e_p + triple.e_e) / 3, atol=1e-12)


def test_init_respects_strategy_validation():
    params = init_fusion_params(0, d=6, raw_d_dim=6, raw_p_dim=6, raw_e_dim=30,
                                strategy="attention")
    assert params.fused_dim == 6
    concat = init_fusion_params(0, d=6, raw_d_dim=6, raw_p_dim=6, raw_e_dim=30,
                                strategy="concat")
    assert concat.fused_dim == 18
