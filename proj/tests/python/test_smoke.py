"""Smoke tests for the daclr python module: every main operation is callable
and a miniature end-to-end train/retrieve/eval round works."""

import math

import pytest

import daclr


def test_event_summary_operations():
    assert daclr.mask_structure("Alice met Bob in Paris", ["Alice", "Bob"], ["Paris"]) == \
        "[Mask] met [Mask] in [Mask]"

    s = daclr.fallback_extract("Alice visited Paris in 2020")
    assert s.participants == ["Alice", "Paris"]
    assert s.attributes == ["2020"]
    assert s.structure == "[Mask] visited [Mask] in [Mask]"
    assert daclr.validate_summary(s) == []

    assert daclr.view(s, "full") == "Alice visited Paris in 2020"
    assert daclr.view(s, "sent") == "Alice Paris 2020"
    assert daclr.view(s, "struct") == s.structure

    parsed = daclr.parse_response('```json {"summary":"A met B","participants":["A","B"],'
                                  '"attributes":[]} ```')
    assert parsed.structure == "[Mask] met [Mask]"

    with pytest.raises(daclr.DaclrError):
        daclr.fallback_extract("")


def test_prompt_rendering():
    text = daclr.render_prompt("Summarize: {input_text} ({modality})", "A met B", "text")
    assert text == "Summarize: A met B (text)"
    with pytest.raises(daclr.DaclrError):
        daclr.render_prompt("no placeholders", "x", "text")


def test_sparse_index_and_fusion():
    assert daclr.tokenize("Alice met Bob!") == ["alice", "met", "bob"]

    index = daclr.SparseIndex.build([("d1", "a b a"), ("d2", "a c"), ("d3", "b c c")])
    assert index.doc_count == 3
    assert index.avg_doc_length == pytest.approx(8 / 3)
    assert index.bm25_score(["a"], "d1") == pytest.approx(0.6243067075264110, rel=1e-12)
    assert index.tfidf_score(["a", "b"], "d1") == pytest.approx(0.9684388219443362, rel=1e-12)

    ranked = index.rank_bm25("q", ["a"], 0)
    assert [doc for doc, _ in ranked] == ["d1", "d2"]

    fused = daclr.fuse_rankings("q", [[("A", 2.0), ("B", 1.0)], [("B", 2.0), ("A", 1.0)]], 2)
    assert [doc for doc, _ in fused] == ["A", "B"]


def test_loss_and_scheduler_operations():
    assert daclr.info_nce(0.5, [0.5], 1.0) == pytest.approx(math.log(2), rel=1e-15)
    assert daclr.loss_unit(2.0, 4.0, 0.25) == pytest.approx(3.5)
    assert daclr.total_loss(1.0, 2.0) == 3.0
    assert daclr.update_ema(0.2, 0.4) == pytest.approx(0.22)
    assert daclr.compute_mid(0.5, 0.0, 1.0) == pytest.approx(0.5)

    p_dyn, beta = daclr.schedule(0.4, 0.4, 0.1)
    assert p_dyn == pytest.approx(0.5)
    assert p_dyn + beta == 1.0


def test_encoder_operations():
    model = daclr.EncoderModel.init(1024, 16, 7)
    emb = daclr.encode(model, "alice met bob")
    assert len(emb) == 16
    assert sum(v * v for v in emb) == pytest.approx(1.0, abs=1e-9)
    assert daclr.cosine(emb, emb) == pytest.approx(1.0)
    assert isinstance(daclr.cross_score(model, "a b", "c d"), float)
    assert daclr.encode(model, "alice met bob") == emb


def test_end_to_end_training_and_retrieval(tmp_path):
    ds = daclr.synth_dataset(seed=3, n_claims=30, n_evidence=120, n_clusters=3)
    assert ds.n_claims == 30 and ds.n_evidence == 120

    daclr.save_dataset(ds, str(tmp_path / "data"))
    back = daclr.load_corpus(str(tmp_path / "data"))
    assert back.n_claims == 30

    model, curve = daclr.train(ds, hash_dim=4096, embed_dim=32, epochs=6, seed=3)
    assert len(curve) == 6  # 21 train claims, batch 32 -> one step per epoch
    assert all(c.n_rand + c.n_tb + c.n_model == 16 for c in curve)
    assert all(c.p_dyn + c.beta == 1.0 for c in curve)

    index = daclr.build_dense_index(model, ds)
    assert index.size == 120
    assert index.model_fingerprint == model.fingerprint()

    claim_id = ds.test_ids[0]
    gold = ds.relevant(claim_id)
    ranking = daclr.recall(index, model, ds, claim_id, 120)
    assert len(ranking) == 120
    assert daclr.recall_at_k(ranking, gold, 120) == 1.0

    top = daclr.retrieve(model, index, ds, claim_id, p=50, q=5)
    assert len(top) == 5
    recalled_ids = {doc for doc, _ in daclr.recall(index, model, ds, claim_id, 50)}
    assert all(doc in recalled_ids for doc, _ in top)

    assert 0.0 <= daclr.mrr_at_k(ranking, gold, 10) <= 1.0
    assert 0.0 <= daclr.ndcg_at_k(ranking, gold, 10) <= 1.0

    # determinism: same seed, same model
    model2, _ = daclr.train(ds, hash_dim=4096, embed_dim=32, epochs=6, seed=3)
    assert model2.fingerprint() == model.fingerprint()


def test_checkpoint_roundtrip(tmp_path):
    model = daclr.EncoderModel.init(256, 8, 5)
    path = str(tmp_path / "model.ckpt")
    model.save(path)
    loaded = daclr.EncoderModel.load(path)
    assert loaded.fingerprint() == model.fingerprint()
    assert daclr.encode(loaded, "x y") == daclr.encode(model, "x y")
