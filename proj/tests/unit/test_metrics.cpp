#include <doctest.h>

#include <cmath>

#include "daclr/errors.hpp"
#include "daclr/metrics.hpp"
#include "daclr/rng.hpp"

#include "helpers.hpp"

using namespace daclr;

namespace {

RankedList ranking_of(const std::vector<std::string>& ids) {
    RankedList list;
    list.query_id = "q";
    double score = static_cast<double>(ids.size());
    for (const auto& id : ids) list.items.push_back({id, score--});
    return list;
}

} // namespace

TEST_CASE("recall@k counts the covered fraction of the relevant set") {
    auto r = ranking_of({"a", "b", "c", "d"});
    CHECK(recall_at_k(r, {"a", "b"}, 2) == 1.0);
    CHECK(recall_at_k(r, {"x", "y"}, 4) == 0.0);
    CHECK(recall_at_k(r, {"a", "c", "x", "y"}, 20) == 0.5);
}

TEST_CASE("mrr@k is the reciprocal rank of the first hit") {
    auto r = ranking_of({"a", "b", "c", "d", "e"});
    CHECK(mrr_at_k(r, {"a"}, 10) == 1.0);
    CHECK(mrr_at_k(r, {"d"}, 10) == 0.25);
    CHECK(mrr_at_k(r, {"d"}, 3) == 0.0);
    CHECK(mrr_at_k(r, {"zz"}, 10) == 0.0);
}

TEST_CASE("ndcg@k uses binary gains with a log2 discount") {
    auto r = ranking_of({"a", "b", "c"});
    CHECK(ndcg_at_k(r, {"a"}, 10) == 1.0);
    // single relevant at rank 3: (1/log2(4)) / 1 = 0.5
    CHECK(ndcg_at_k(r, {"c"}, 10) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(ndcg_at_k(r, {"zz"}, 10) == 0.0);
    // ideal ranking scores 1 for any relevant-set size
    CHECK(ndcg_at_k(r, {"a", "b"}, 10) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("metrics are monotone in k and invariant to irrelevant relabeling") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> ids;
        for (int i = 0; i < 20; ++i) ids.push_back("d" + std::to_string(i));
        rng.shuffle(ids);
        auto r = ranking_of(ids);
        std::set<std::string> relevant{"d3", "d7", "d11"};
        double prev_recall = -1, prev_mrr = -1;
        for (size_t k : {1, 2, 5, 10, 20}) {
            double rec = recall_at_k(r, relevant, k);
            double mrr = mrr_at_k(r, relevant, k);
            CHECK(rec >= prev_recall);
            CHECK(mrr >= prev_mrr);
            CHECK(ndcg_at_k(r, relevant, k) >= 0.0);
            CHECK(ndcg_at_k(r, relevant, k) <= 1.0);
            prev_recall = rec;
            prev_mrr = mrr;
        }

        // renaming irrelevant documents changes nothing
        auto renamed_ids = ids;
        for (auto& id : renamed_ids) {
            if (!relevant.count(id)) id = "other_" + id;
        }
        auto renamed = ranking_of(renamed_ids);
        for (size_t k : {1, 5, 20}) {
            CHECK(recall_at_k(renamed, relevant, k) == recall_at_k(r, relevant, k));
            CHECK(mrr_at_k(renamed, relevant, k) == mrr_at_k(r, relevant, k));
            CHECK(ndcg_at_k(renamed, relevant, k) == ndcg_at_k(r, relevant, k));
        }
    }
}

TEST_CASE("evaluate_run macro-averages over all qrels claims") {
    Qrels qrels;
    qrels.relevant["c1"] = {"e1"};
    qrels.relevant["c2"] = {"e9"};

    std::vector<RunLine> run{
        {"c1", "e1", 1, 0.9, "rerank"},
        {"c1", "e2", 2, 0.8, "rerank"},
        // c2 is missing from the run and scores 0 everywhere
    };
    auto report = evaluate_run(run, qrels, {1, 10});
    CHECK(report.at("recall", 1) == doctest::Approx(0.5));
    CHECK(report.at("mrr", 10) == doctest::Approx(0.5));
    CHECK(report.at("ndcg", 1) == doctest::Approx(0.5));

    // an ideal run scores 1.0 across the board
    std::vector<RunLine> ideal{
        {"c1", "e1", 1, 1.0, "rerank"},
        {"c2", "e9", 1, 1.0, "rerank"},
    };
    auto perfect = evaluate_run(ideal, qrels, {1, 10});
    CHECK(perfect.at("recall", 10) == 1.0);
    CHECK(perfect.at("mrr", 10) == 1.0);
    CHECK(perfect.at("ndcg", 10) == 1.0);

    // no overlap between run and qrels claims is an error
    std::vector<RunLine> stray{{"cx", "e1", 1, 1.0, "rerank"}};
    CHECK_THROWS_AS(evaluate_run(stray, qrels, {10}), Error);
}

TEST_CASE("evaluate_run matches a brute-force reference on random permutations") {
    Rng rng(71);
    Qrels qrels;
    std::vector<std::string> docs;
    for (int i = 0; i < 30; ++i) docs.push_back("e" + std::to_string(i));

    std::vector<RunLine> run;
    std::map<std::string, std::vector<std::string>> orders;
    for (int c = 0; c < 40; ++c) {
        std::string claim_id = "c" + std::to_string(c);
        auto order = docs;
        rng.shuffle(order);
        size_t n_rel = 1 + rng.next_below(4);
        for (size_t r = 0; r < n_rel; ++r)
            qrels.relevant[claim_id].insert(docs[rng.next_below(docs.size())]);
        for (size_t r = 0; r < order.size(); ++r)
            run.push_back({claim_id, order[r], static_cast<int>(r + 1), 1.0 / (r + 1.0), "rerank"});
        orders[claim_id] = order;
    }

    std::vector<size_t> ks{1, 5, 10, 30};
    auto report = evaluate_run(run, qrels, ks);
    for (size_t k : ks) {
        double recall_sum = 0, mrr_sum = 0, ndcg_sum = 0;
        for (const auto& [claim_id, relevant] : qrels.relevant) {
            const auto& order = orders.at(claim_id);
            size_t hits = 0;
            double mrr = 0, dcg = 0;
            for (size_t r = 0; r < std::min(k, order.size()); ++r) {
                if (relevant.count(order[r])) {
                    ++hits;
                    if (mrr == 0) mrr = 1.0 / (r + 1.0);
                    dcg += 1.0 / std::log2(r + 2.0);
                }
            }
            double idcg = 0;
            for (size_t r = 0; r < std::min(k, relevant.size()); ++r)
                idcg += 1.0 / std::log2(r + 2.0);
            recall_sum += static_cast<double>(hits) / relevant.size();
            mrr_sum += mrr;
            ndcg_sum += idcg == 0 ? 0.0 : dcg / idcg;
        }
        double n = static_cast<double>(qrels.relevant.size());
        CHECK(report.at("recall", k) == recall_sum / n);
        CHECK(report.at("mrr", k) == mrr_sum / n);
        CHECK(report.at("ndcg", k) == ndcg_sum / n);
    }
}

TEST_CASE("run files round trip and reject malformed lines") {
    testutil::TempDir dir;
    std::vector<RunLine> lines{
        {"c1", "e1", 1, 0.75, "recall"},
        {"c1", "e2", 2, 0.5, "rerank"},
    };
    write_run_file(dir.file("run.txt"), lines);
    auto loaded = read_run_file(dir.file("run.txt"));
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].claim_id == "c1");
    CHECK(loaded[0].score == 0.75);
    CHECK(loaded[1].stage == "rerank");

    testutil::write_file(dir.file("bad.txt"), "c1 e1 1 0.5 rerank\nc2 e2\n");
    try {
        read_run_file(dir.file("bad.txt"));
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ParseError);
        CHECK(std::string(e.what()).find(":2") != std::string::npos); // line number
    }
}

TEST_CASE("evaluate_run_file filters by stage") {
    testutil::TempDir dir;
    Qrels qrels;
    qrels.relevant["c1"] = {"e1"};
    std::vector<RunLine> lines{
        {"c1", "e9", 1, 0.9, "recall"},
        {"c1", "e1", 2, 0.8, "recall"},
        {"c1", "e1", 1, 0.7, "rerank"},
    };
    write_run_file(dir.file("run.txt"), lines);
    auto recall_report = evaluate_run_file(dir.file("run.txt"), qrels, {10}, "recall");
    CHECK(recall_report.at("mrr", 10) == doctest::Approx(0.5));
    auto rerank_report = evaluate_run_file(dir.file("run.txt"), qrels, {10}, "rerank");
    CHECK(rerank_report.at("mrr", 10) == 1.0);
    CHECK_THROWS_AS(evaluate_run_file(dir.file("run.txt"), qrels, {10}, "nonsense"), Error);
}

TEST_CASE("report renders CSV with a header and round trips") {
    Qrels qrels;
    qrels.relevant["c1"] = {"e1"};
    qrels.relevant["c2"] = {"e7"};
    std::vector<RunLine> run{{"c1", "e1", 1, 1.0, "rerank"}, {"c2", "e3", 1, 0.5, "rerank"}};
    auto report = evaluate_run(run, qrels, {1, 10});
    std::string csv = report.to_csv();
    CHECK(csv.rfind("metric,k,value\n", 0) == 0);
    CHECK(report.to_table().find("recall") != std::string::npos);

    MetricReport back = MetricReport::from_csv(csv);
    CHECK(back.values == report.values);
    CHECK(back.to_csv() == csv);
    CHECK_THROWS_AS(MetricReport::from_csv("nope\n"), Error);
}
