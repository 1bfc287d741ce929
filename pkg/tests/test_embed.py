"""Encoder contracts: preprocessing, graph embedding, hashing, engagement."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from evolvex.embed import (
    DimensionMismatchError,
    ExternalEncoderConfig,
    GnnLayer,
    GnnParams,
    NonFiniteEmbeddingError,
    PreprocessingStats,
    TransportError,
    embed_demographics,
    embed_engagement,
    embed_posts,
    engagement_features,
    external_encode,
    fit_preprocessing,
    hashed_text_vector,
    init_gnn_params,
    make_text_embedder,
    preprocess_demographics,
    scale_engagement_counts,
    summarize_engagement,
)
from evolvex.graphgen import (
    DemographicProfile,
    EngagementRecord,
    GeneratorConfig,
    Post,
    generate,
    split_dataset,
)

VOCABS = {"gender": ("female", "male"), "occupation": ("a", "b", "c"),
          "location": ("u", "v", "w", "x", "y")}
CATS = ("Politics", "Education", "Sports", "Travel",
        "Entertainment", "Health", "Technology", "Lifestyle")


def profile(age=30, gender=0, occupation=0, location=0):
    return DemographicProfile(age=age, gender=gender, occupation=occupation,
                              location=location)


def stats_for(ages, k=8):
    arr = np.array(ages, dtype=np.float64)
    return PreprocessingStats(age_mean=float(arr.mean()), age_std=float(arr.std()),
                              engagement_min=np.zeros((k, 3)),
                              engagement_max=np.full((k, 3), 10.0))


class TestPreprocessDemographics:
    def test_mean_age_maps_to_zero(self):
        st = stats_for([20, 30, 40])
        feats = preprocess_demographics([profile(age=30)], st, VOCABS)
        assert feats[0, 0] == 0.0

    def test_one_hot_location(self):
        st = stats_for([30])
        feats = preprocess_demographics([profile(location=2)], st, VOCABS)
        loc_block = feats[0, 1 + 2 + 3:]
        assert loc_block.tolist() == [0, 0, 1, 0, 0]

    def test_zero_std_age_maps_to_zero(self):
        st = stats_for([25, 25])
        feats = preprocess_demographics([profile(age=25), profile(age=60)], st, VOCABS)
        assert np.all(feats[:, 0] == 0.0)

    def test_width_is_one_plus_vocab_sizes(self):
        st = stats_for([30])
        feats = preprocess_demographics([profile()], st, VOCABS)
        assert feats.shape[1] == 1 + 2 + 3 + 5


class TestGraphEmbedding:
    def test_identical_nodes_identical_embeddings(self):
        adj = np.array([[0, 1], [1, 0]], dtype=np.uint8)
        feats = np.ones((2, 3))
        params = init_gnn_params(0, in_dim=3, out_dim=4)
        out = embed_demographics(adj, feats, params)
        np.testing.assert_allclose(out[0], out[1])

    def test_isolated_node_uses_zero_neighbor_mean(self):
        adj = np.zeros((2, 2), dtype=np.uint8)
        feats = np.array([[1.0, 2.0], [0.5, -1.0]])
        layer = GnnLayer(w_self=np.array([[1.0, 0.0], [0.0, 1.0]]),
                         w_nbr=np.array([[5.0, 5.0], [5.0, 5.0]]),
                         bias=np.array([0.1, -0.2]))
        params = GnnParams(layers=[layer])
        out = embed_demographics(adj, feats, params)
        np.testing.assert_allclose(out, np.tanh(feats + np.array([0.1, -0.2])))

    def test_path_graph_matches_hand_computation(self):
        """One layer on a 3-node path, evaluated by hand."""
        adj = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.uint8)
        feats = np.array([[1.0], [2.0], [4.0]])
        layer = GnnLayer(w_self=np.array([[2.0]]), w_nbr=np.array([[3.0]]),
                         bias=np.array([0.5]))
        params = GnnParams(layers=[layer])
        out = embed_demographics(adj, feats, params)
        # node 0: tanh(2*1 + 3*mean(2) + 0.5) = tanh(8.5)
        # node 1: tanh(2*2 + 3*mean(1,4) + 0.5) = tanh(12.0)
        # node 2: tanh(2*4 + 3*mean(2) + 0.5) = tanh(14.5)
        np.testing.assert_allclose(out.ravel(), np.tanh([8.5, 12.0, 14.5]))

    def test_relabeling_permutes_embeddings(self):
        rng = np.random.default_rng(0)
        adj = (rng.random((6, 6)) < 0.4).astype(np.uint8)
        adj = np.triu(adj, 1)
        adj = adj | adj.T
        feats = rng.normal(size=(6, 3))
        params = init_gnn_params(1, in_dim=3, out_dim=4)
        perm = rng.permutation(6)
        out = embed_demographics(adj, feats, params)
        out_p = embed_demographics(adj[np.ix_(perm, perm)], feats[perm], params)
        np.testing.assert_allclose(out_p, out[perm], atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        params = init_gnn_params(0, in_dim=3, out_dim=4)
        with pytest.raises(ValueError):
            embed_demographics(np.zeros((2, 2)), np.zeros((2, 5)), params)
        with pytest.raises(ValueError):
            embed_demographics(np.zeros((3, 3)), np.zeros((2, 3)), params)


class TestPostEmbedding:
    def test_empty_posts_zero_vector(self):
        assert np.all(embed_posts([], dim=16) == 0.0)

    def test_bag_property_order_invariant(self):
        a = [Post(0, "alpha beta", 0), Post(1, "gamma", 0)]
        b = [Post(1, "gamma", 0), Post(0, "beta alpha", 0)]
        np.testing.assert_array_equal(embed_posts(a, 16), embed_posts(b, 16))

    def test_unit_norm(self):
        posts = [Post(0, "some words about sports and travel", 0)]
        assert abs(np.linalg.norm(embed_posts(posts, 32)) - 1.0) < 1e-9

    def test_deterministic_across_calls(self):
        v1 = hashed_text_vector("politics education sports", 32)
        v2 = hashed_text_vector("politics education sports", 32)
        np.testing.assert_array_equal(v1, v2)

    def test_stopword_removal_optional(self):
        with_stop = hashed_text_vector("the sports", 16)
        without = hashed_text_vector("the sports", 16, remove_stopwords=True)
        only = hashed_text_vector("sports", 16)
        np.testing.assert_array_equal(without, only)
        assert not np.array_equal(with_stop, only)


class TestEngagement:
    def test_summary_matches_expected_format(self):
        rec = EngagementRecord.zeros(8)
        rec.reactions[0], rec.comments[0], rec.shares[0] = 100, 50, 20
        assert summarize_engagement(rec, CATS) == \
            "Politics: 100 reactions, 50 comments, 20 shares"

    def test_summary_all_zero(self):
        assert summarize_engagement(EngagementRecord.zeros(8), CATS) == "no engagement"

    def test_summary_vocabulary_order(self):
        rec = EngagementRecord.zeros(8)
        rec.reactions[5] = 1
        rec.reactions[1] = 2
        text = summarize_engagement(rec, CATS)
        assert text.index("Education") < text.index("Health")

    def test_scaled_block_at_bounds(self):
        st = stats_for([30])
        rec = EngagementRecord(np.full(8, 10), np.full(8, 10), np.full(8, 10))
        np.testing.assert_array_equal(scale_engagement_counts(rec, st), np.ones(24))
        np.testing.assert_array_equal(
            scale_engagement_counts(EngagementRecord.zeros(8), st), np.zeros(24))

    def test_constant_feature_scales_to_zero(self):
        st = PreprocessingStats(30.0, 1.0, np.full((8, 3), 4.0), np.full((8, 3), 4.0))
        rec = EngagementRecord(np.full(8, 4), np.full(8, 4), np.full(8, 4))
        np.testing.assert_array_equal(scale_engagement_counts(rec, st), np.zeros(24))

    def test_feature_layout_counts_then_summary(self):
        st = stats_for([30])
        rec = EngagementRecord.zeros(8)
        rec.reactions[0] = 5
        feats = engagement_features(rec, st, CATS, dim=16)
        assert feats.shape == (24 + 16,)
        assert feats[0] == 0.5

    def test_projected_embedding_deterministic(self):
        st = stats_for([30])
        rec = EngagementRecord(np.arange(8), np.arange(8), np.arange(8))
        proj = np.random.default_rng(0).normal(size=(12, 24 + 12))
        a = embed_engagement(rec, st, CATS, proj)
        b = embed_engagement(rec, st, CATS, proj)
        assert a.shape == (12,)
        np.testing.assert_array_equal(a, b)


class TestNoTargetLeakage:
    def test_stats_change_when_target_appended(self):
        ds = generate(GeneratorConfig(n_users=8, n_steps=6, drift=0.8), seed=0)
        cond, _ = split_dataset(ds, 2)
        on_cond = fit_preprocessing(cond)
        on_full = fit_preprocessing(ds)
        assert not np.array_equal(on_cond.engagement_max, on_full.engagement_max)


class _EncoderHandler(BaseHTTPRequestHandler):
    mode = "zeros"
    dim = 8

    def do_POST(self):
        n = int(self.headers.get("Content-Length", 0))
        texts = json.loads(self.rfile.read(n))["texts"]
        if self.mode == "zeros":
            vectors = [[0.0] * self.dim for _ in texts]
        elif self.mode == "wrong_dim":
            vectors = [[0.0] * (self.dim + 1) for _ in texts]
        else:
            vectors = [[float("nan")] * self.dim for _ in texts]
        body = json.dumps({"vectors": vectors}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def encoder_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _EncoderHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()


class TestExternalEncoder:
    def test_zero_vector_stub_endpoint(self, encoder_server):
        _EncoderHandler.mode = "zeros"
        url = f"http://127.0.0.1:{encoder_server.server_address[1]}/"
        out = external_encode(["a", "b"], ExternalEncoderConfig(url=url, dim=8))
        assert out.shape == (2, 8)
        assert np.all(out == 0.0)

    def test_wrong_dimension_raises(self, encoder_server):
        _EncoderHandler.mode = "wrong_dim"
        url = f"http://127.0.0.1:{encoder_server.server_address[1]}/"
        with pytest.raises(DimensionMismatchError):
            external_encode(["a"], ExternalEncoderConfig(url=url, dim=8))

    def test_non_finite_raises(self, encoder_server):
        _EncoderHandler.mode = "nan"
        url = f"http://127.0.0.1:{encoder_server.server_address[1]}/"
        with pytest.raises(NonFiniteEmbeddingError):
            external_encode(["a"], ExternalEncoderConfig(url=url, dim=8))

    def test_unreachable_endpoint_transport_error(self):
        cfg = ExternalEncoderConfig(url="http://127.0.0.1:9/", dim=8, timeout_ms=300)
        with pytest.raises(TransportError):
            external_encode(["a"], cfg)

    def test_batch_count_mismatch_is_dimension_error(self):
        transport = lambda url, payload, timeout: {"vectors": [[0.0] * 8]}
        with pytest.raises(DimensionMismatchError):
            external_encode(["a", "b"], ExternalEncoderConfig(url="x", dim=8),
                            transport=transport)


def test_builtin_embedder_matches_embed_posts():
    posts = [Post(0, "alpha beta gamma", 0), Post(1, "delta", 0)]
    joined = " ".join(p.text for p in posts)
    embed = make_text_embedder(16)
    np.testing.assert_array_equal(embed([joined])[0], embed_posts(posts, 16))
