import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest
from hypothesis import given, strategies as st

from evadebench.classify import (
    ClassifierHandle, Label, LinearModel, RemoteError, cached, label,
    lexicon_classifier, query_counter, remote_classifier, train_linear,
)
from evadebench.text_core import Document
from conftest import constant_classifier, make_store


class TestLabel:
    def test_boundary_is_offensive(self):
        assert label(constant_classifier(0.5), "x") is Label.OFFENSIVE

    def test_below_threshold(self):
        assert label(constant_classifier(0.49), "x") is Label.NOT_OFFENSIVE

    def test_default_threshold_is_half(self):
        assert constant_classifier(0.7).threshold == 0.5

    def test_out_of_range_score_rejected(self):
        bad = ClassifierHandle("bad", lambda t: 1.7)
        with pytest.raises(ValueError):
            bad.score("x")

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_threshold(self, score, t1, t2):
        lo, hi = sorted([t1, t2])
        low = ClassifierHandle("c", lambda t: score, threshold=lo)
        high = ClassifierHandle("c", lambda t: score, threshold=hi)
        if label(low, "x") is Label.NOT_OFFENSIVE:
            assert label(high, "x") is Label.NOT_OFFENSIVE


class TestLexiconClassifier:
    def test_known_word_scores_one(self):
        handle = lexicon_classifier({"moron"})
        assert handle.score("you're a moron get fucked") == 1.0

    def test_empty_text(self):
        assert lexicon_classifier({"moron"}).score("") == 0.0

    def test_no_match(self):
        assert lexicon_classifier({"moron"}).score("nice weather") == 0.0

    def test_case_insensitive(self):
        assert lexicon_classifier({"moron"}).score("MORON!") == 1.0

    def test_invariant_to_order_and_duplication(self):
        handle = lexicon_classifier({"moron", "idiot"})
        assert handle.score("a moron and an idiot") == \
            handle.score("idiot idiot moron a an and")

    def test_binary_output_only(self):
        handle = lexicon_classifier({"a", "b"})
        for text in ["a b a b", "c", "a", ""]:
            assert handle.score(text) in (0.0, 1.0)


def _docs(pairs):
    return [Document.from_text(str(i), text, lab)
            for i, (text, lab) in enumerate(pairs)]


class TestLinearModel:
    STORE = make_store({"bad": [1.0, 0.0], "vile": [0.9, 0.1],
                        "good": [-1.0, 0.0], "nice": [-0.9, 0.1]})

    def test_zero_weights_score_half(self):
        model = LinearModel(np.zeros(3), self.STORE)
        assert model.score("anything bad") == 0.5
        assert model.score("") == 0.5

    def test_oov_doc_uses_zero_features(self):
        model = LinearModel(np.array([5.0, 5.0, 0.0]), self.STORE)
        assert model.score("unknown words only") == 0.5

    def test_separable_fixture_reaches_full_accuracy(self):
        docs = _docs([("bad vile", Label.OFFENSIVE), ("good nice", Label.NOT_OFFENSIVE)])
        model = train_linear(docs, self.STORE, epochs=200, lr=0.5, seed=0)
        handle = model.handle()
        assert label(handle, "bad vile") is Label.OFFENSIVE
        assert label(handle, "good nice") is Label.NOT_OFFENSIVE

    def test_loss_decreases(self):
        docs = _docs([("bad vile", Label.OFFENSIVE), ("bad", Label.OFFENSIVE),
                      ("good nice", Label.NOT_OFFENSIVE), ("nice", Label.NOT_OFFENSIVE)])

        def nll(model):
            total = 0.0
            for d in docs:
                p = model.score(d.raw)
                y = 1.0 if d.label is Label.OFFENSIVE else 0.0
                total -= y * np.log(p) + (1 - y) * np.log(1 - p)
            return total

        early = train_linear(docs, self.STORE, epochs=1, lr=0.1, seed=0)
        late = train_linear(docs, self.STORE, epochs=100, lr=0.1, seed=0)
        assert nll(late) < nll(early)

    def test_requires_both_classes(self):
        docs = _docs([("bad", Label.OFFENSIVE)])
        with pytest.raises(ValueError):
            train_linear(docs, self.STORE)


class _ScriptedServer:
    """Tiny score-protocol server with a per-instance behavior script."""

    def __init__(self, behaviors):
        self.behaviors = list(behaviors)  # one entry per request
        self.requests = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(
                    int(self.headers["Content-Length"])))
                outer.requests.append((self.path, body,
                                       self.headers.get("Authorization")))
                behavior = (outer.behaviors.pop(0) if outer.behaviors
                            else {"scores": [0.0] * len(body["texts"])})
                if behavior.get("status", 200) != 200:
                    self.send_response(behavior["status"])
                    self.end_headers()
                    return
                payload = json.dumps(behavior).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.server = HTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever,
                                       daemon=True)
        self.thread.start()

    @property
    def endpoint(self):
        return f"http://127.0.0.1:{self.server.server_port}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


class TestRemoteClassifier:
    def test_echo_score(self):
        server = _ScriptedServer([{"scores": [0.9]}])
        try:
            handle = remote_classifier(server.endpoint)
            assert handle.score("text") == 0.9
            assert server.requests[0][0] == "/score"
            assert server.requests[0][1] == {"texts": ["text"]}
        finally:
            server.close()

    def test_out_of_range_is_protocol_error(self):
        server = _ScriptedServer([{"scores": [1.7]}])
        try:
            with pytest.raises(RemoteError, match="outside"):
                remote_classifier(server.endpoint, retries=0).score("x")
        finally:
            server.close()

    def test_length_mismatch_is_protocol_error(self):
        server = _ScriptedServer([{"scores": [0.1, 0.2]}])
        try:
            with pytest.raises(RemoteError, match="scores"):
                remote_classifier(server.endpoint, retries=0).score("x")
        finally:
            server.close()

    def test_retries_then_success(self):
        server = _ScriptedServer([{"status": 500}, {"status": 500},
                                  {"scores": [0.3]}])
        try:
            handle = remote_classifier(server.endpoint, retries=2)
            assert handle.score("x") == 0.3
            assert len(server.requests) == 3
        finally:
            server.close()

    def test_exhausted_retries(self):
        server = _ScriptedServer([{"status": 500}] * 2)
        try:
            with pytest.raises(RemoteError, match="2 attempts"):
                remote_classifier(server.endpoint, retries=1).score("x")
        finally:
            server.close()

    def test_batching_caps_at_64(self):
        server = _ScriptedServer([{"scores": [0.1] * 64}, {"scores": [0.2] * 6}])
        try:
            handle = remote_classifier(server.endpoint)
            scores = handle.score_batch(["t"] * 70)
            assert scores == [0.1] * 64 + [0.2] * 6
            assert [len(r[1]["texts"]) for r in server.requests] == [64, 6]
        finally:
            server.close()

    def test_bearer_token_header(self):
        server = _ScriptedServer([{"scores": [0.0]}])
        try:
            remote_classifier(server.endpoint, bearer_token="sekrit").score("x")
            assert server.requests[0][2] == "Bearer sekrit"
        finally:
            server.close()

    def test_no_cross_text_caching(self):
        server = _ScriptedServer([])
        try:
            handle = remote_classifier(server.endpoint)
            handle.score("a")
            handle.score("b")
            assert len(server.requests) == 2
        finally:
            server.close()

    def test_env_var_endpoint(self, monkeypatch):
        monkeypatch.delenv("EVADE_BENCH_ENDPOINT", raising=False)
        with pytest.raises(ValueError):
            remote_classifier()


class TestQueryCounter:
    def test_starts_at_zero(self):
        assert query_counter(constant_classifier(0.4)).count == 0

    def test_counts_calls(self):
        counter = query_counter(constant_classifier(0.4))
        for _ in range(5):
            counter.score("x")
        assert counter.count == 5

    def test_scores_pass_through(self):
        counter = query_counter(constant_classifier(0.7))
        assert counter.score("x") == 0.7
        assert counter.threshold == 0.5

    def test_thread_safety(self):
        counter = query_counter(constant_classifier(0.1))
        threads = [threading.Thread(
            target=lambda: [counter.score("x") for _ in range(200)])
            for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert counter.count == 1600


def test_cached_memoizes_exact_text():
    counter = query_counter(constant_classifier(0.2))
    memo = cached(counter)
    memo.score("a")
    memo.score("a")
    memo.score("b")
    assert counter.count == 2
