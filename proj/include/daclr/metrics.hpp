#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "daclr/dataset.hpp"
#include "daclr/sparse_index.hpp"

namespace daclr {

// binary-relevance ranking metrics over the top k

double recall_at_k(const RankedList& ranking, const std::set<std::string>& relevant, size_t k);
double mrr_at_k(const RankedList& ranking, const std::set<std::string>& relevant, size_t k);
double ndcg_at_k(const RankedList& ranking, const std::set<std::string>& relevant, size_t k);

struct MetricReport {
    // (metric name, k) -> macro-averaged value over qrels claims
    std::map<std::pair<std::string, size_t>, double> values;
    size_t claims_evaluated = 0;

    double at(const std::string& metric, size_t k) const;
    std::string to_csv() const;
    static MetricReport from_csv(const std::string& csv_text);
    std::string to_table() const;
};

// Macro-averages recall/mrr/ndcg over every qrels claim; claims missing from
// the run score 0 everywhere. Lines must all carry the same stage.
MetricReport evaluate_run(const std::vector<RunLine>& run, const Qrels& qrels,
                          const std::vector<size_t>& ks = {10, 20, 100});

// Convenience: read, filter by stage, evaluate. ParseError carries line numbers.
MetricReport evaluate_run_file(const std::string& path, const Qrels& qrels,
                               const std::vector<size_t>& ks = {10, 20, 100},
                               const std::string& stage = "rerank");

} // namespace daclr
