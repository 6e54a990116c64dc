#include <doctest.h>

#include <algorithm>

#include "daclr/errors.hpp"
#include "daclr/pipeline.hpp"

#include "helpers.hpp"

using namespace daclr;

namespace {

Dataset pipeline_dataset() { return synth_dataset(23, 20, 80, 2); }

} // namespace

TEST_CASE("build_dense_index embeds every document in corpus order") {
    Dataset ds = pipeline_dataset();
    EncoderModel model = EncoderModel::init(512, 8, 1);

    Dataset one;
    one.claims = {ds.claims[0]};
    one.corpus = {ds.corpus[0]};
    one.qrels.relevant[ds.claims[0].id] = {ds.corpus[0].id};
    one.splits.train = {ds.claims[0].id};
    one.rebuild_lookup();
    DenseIndex single = build_dense_index(model, one);
    CHECK(single.ids.size() == 1);
    CHECK(single.rows[0].size() == model.embed_dim);

    DenseIndex a = build_dense_index(model, ds);
    DenseIndex b = build_dense_index(model, ds);
    CHECK(a.ids == b.ids);
    CHECK(a.rows == b.rows);
    CHECK(a.model_fingerprint == model.fingerprint());

    // rows equal the individually computed embeddings
    for (size_t i = 0; i < 5; ++i) {
        CHECK(a.rows[i] == encode(model, view(*ds.corpus[i].summary, ViewKind::Full)));
    }

    Dataset missing = ds;
    missing.corpus[3].summary.reset();
    missing.rebuild_lookup();
    try {
        build_dense_index(model, missing);
        FAIL("expected MissingSummary");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingSummary);
        CHECK(std::string(e.what()).find(ds.corpus[3].id) != std::string::npos);
    }
}

TEST_CASE("recall is the exact brute-force top-p by cosine") {
    Dataset ds = pipeline_dataset();
    EncoderModel model = EncoderModel::init(512, 8, 2);
    DenseIndex index = build_dense_index(model, ds);
    const Claim& claim = ds.claim(ds.claims[4].id);

    RankedList full = recall(index, model, claim, ds.corpus.size());
    CHECK(full.items.size() == ds.corpus.size());

    // independent oracle: sort all pairwise cosines with the same tiebreak
    Embedding claim_emb = encode(model, view(*claim.summary, ViewKind::Full));
    std::vector<ScoredDoc> oracle;
    for (const auto& doc : ds.corpus)
        oracle.push_back({doc.id, cosine(claim_emb, encode(model, view(*doc.summary, ViewKind::Full)))});
    std::sort(oracle.begin(), oracle.end(), [](const ScoredDoc& x, const ScoredDoc& y) {
        if (x.score != y.score) return x.score > y.score;
        return x.id < y.id;
    });
    for (size_t p : {size_t(1), size_t(7), ds.corpus.size()}) {
        RankedList got = recall(index, model, claim, p);
        REQUIRE(got.items.size() == p);
        for (size_t i = 0; i < p; ++i) {
            CHECK(got.items[i].id == oracle[i].id);
            CHECK(got.items[i].score == oracle[i].score);
        }
    }

    CHECK_THROWS_AS(recall(index, model, claim, 0), Error);
    try {
        recall(index, model, claim, ds.corpus.size() + 1);
        FAIL("expected InvalidP");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidP);
    }
}

TEST_CASE("a claim identical to an evidence summary recalls it first") {
    Dataset ds = pipeline_dataset();
    EncoderModel model = EncoderModel::init(512, 8, 5);
    DenseIndex index = build_dense_index(model, ds);

    Claim clone;
    clone.id = "clone";
    clone.raw_text = ds.corpus[10].raw_text;
    clone.summary = ds.corpus[10].summary;
    RankedList top = recall(index, model, clone, 3);
    CHECK(top.items[0].id == ds.corpus[10].id);
    CHECK(top.items[0].score == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("recall rejects an index built by a different model") {
    Dataset ds = pipeline_dataset();
    EncoderModel model = EncoderModel::init(512, 8, 3);
    EncoderModel other = EncoderModel::init(512, 8, 4);
    DenseIndex index = build_dense_index(model, ds);
    try {
        recall(index, other, ds.claim(ds.claims[0].id), 5);
        FAIL("expected ModelMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ModelMismatch);
    }
}

TEST_CASE("rerank scores candidates with the cross scorer") {
    Dataset ds = pipeline_dataset();
    EncoderModel model = EncoderModel::init(512, 8, 7);
    DenseIndex index = build_dense_index(model, ds);
    const Claim& claim = ds.claim(ds.claims[2].id);
    RankedList candidates = recall(index, model, claim, 12);

    // q = |candidates| returns a permutation of the candidate set
    RankedList permuted = rerank(model, ds, claim, candidates, 12);
    auto sorted_ids = candidates.ids();
    std::sort(sorted_ids.begin(), sorted_ids.end());
    auto permuted_ids = permuted.ids();
    std::sort(permuted_ids.begin(), permuted_ids.end());
    CHECK(permuted_ids == sorted_ids);

    // exhaustive oracle over cross_score
    RankedList reranked = rerank(model, ds, claim, candidates, 5);
    std::vector<ScoredDoc> oracle;
    const std::string claim_text = view(*claim.summary, ViewKind::Full);
    for (const auto& item : candidates.items) {
        oracle.push_back({item.id, cross_score(model, claim_text,
                                               view(ds.evidence_summary(item.id), ViewKind::Full))});
    }
    std::sort(oracle.begin(), oracle.end(), [](const ScoredDoc& x, const ScoredDoc& y) {
        if (x.score != y.score) return x.score > y.score;
        return x.id < y.id;
    });
    REQUIRE(reranked.items.size() == 5);
    for (size_t i = 0; i < 5; ++i) CHECK(reranked.items[i].id == oracle[i].id);

    // zero head weights: constant scores, pure ascending-id order
    EncoderModel zero = model;
    std::fill(zero.head_weights.begin(), zero.head_weights.end(), 0.0);
    zero.head_bias = 0.0;
    RankedList ties = rerank(zero, ds, claim, candidates, 12);
    auto tie_ids = ties.ids();
    auto expected = candidates.ids();
    std::sort(expected.begin(), expected.end());
    CHECK(tie_ids == expected);

    try {
        rerank(model, ds, claim, candidates, 13);
        FAIL("expected InvalidQ");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidQ);
    }
}

TEST_CASE("retrieve composes the stages and enforces q < p <= n") {
    Dataset ds = pipeline_dataset();
    EncoderModel model = EncoderModel::init(512, 8, 9);
    DenseIndex index = build_dense_index(model, ds);
    const Claim& claim = ds.claim(ds.claims[6].id);

    RankedList recalled = recall(index, model, claim, 15);
    RankedList out = retrieve(model, index, ds, claim, 15, 6);
    CHECK(out.items.size() == 6);
    auto recalled_ids = recalled.ids();
    for (const auto& item : out.items) {
        CHECK(std::find(recalled_ids.begin(), recalled_ids.end(), item.id) != recalled_ids.end());
    }
    // composition equals rerank(recall(...))
    RankedList manual = rerank(model, ds, claim, recalled, 6);
    CHECK(out.ids() == manual.ids());

    // p = n, q = 1 degenerates to the global cross-scorer argmax
    RankedList global_best = retrieve(model, index, ds, claim, ds.corpus.size(), 1);
    RankedList everything = recall(index, model, claim, ds.corpus.size());
    RankedList all_scored = rerank(model, ds, claim, everything, everything.items.size());
    REQUIRE(global_best.items.size() == 1);
    CHECK(global_best.items[0].id == all_scored.items[0].id);

    for (auto [p, q] : std::vector<std::pair<size_t, size_t>>{
             {10, 10}, {10, 11}, {ds.corpus.size() + 1, 5}}) {
        try {
            retrieve(model, index, ds, claim, p, q);
            FAIL("expected InvalidStagePlan");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvalidStagePlan);
        }
    }
}

TEST_CASE("dense index round trips through disk") {
    testutil::TempDir dir;
    Dataset ds = pipeline_dataset();
    EncoderModel model = EncoderModel::init(512, 8, 11);
    DenseIndex index = build_dense_index(model, ds);
    index.save(dir.file("dense.idx"));
    DenseIndex loaded = DenseIndex::load(dir.file("dense.idx"));
    CHECK(loaded.ids == index.ids);
    CHECK(loaded.rows == index.rows);
    CHECK(loaded.model_fingerprint == index.model_fingerprint);

    testutil::write_file(dir.file("junk.idx"), "garbage");
    CHECK_THROWS_AS(DenseIndex::load(dir.file("junk.idx")), Error);
}

TEST_CASE("run lines carry rank, score, and stage") {
    RankedList list{"c1", {{"e2", 0.9}, {"e1", 0.5}}};
    auto lines = to_run_lines(list, "recall");
    REQUIRE(lines.size() == 2);
    CHECK(lines[0].claim_id == "c1");
    CHECK(lines[0].evidence_id == "e2");
    CHECK(lines[0].rank == 1);
    CHECK(lines[1].rank == 2);
    CHECK(lines[0].stage == "recall");
}
