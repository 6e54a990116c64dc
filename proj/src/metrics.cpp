#include "daclr/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "daclr/errors.hpp"

namespace daclr {

double recall_at_k(const RankedList& ranking, const std::set<std::string>& relevant, size_t k) {
    if (relevant.empty()) return 0.0;
    size_t hits = 0;
    size_t limit = std::min(k, ranking.items.size());
    for (size_t i = 0; i < limit; ++i) {
        if (relevant.count(ranking.items[i].id)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double mrr_at_k(const RankedList& ranking, const std::set<std::string>& relevant, size_t k) {
    size_t limit = std::min(k, ranking.items.size());
    for (size_t i = 0; i < limit; ++i) {
        if (relevant.count(ranking.items[i].id)) return 1.0 / static_cast<double>(i + 1);
    }
    return 0.0;
}

double ndcg_at_k(const RankedList& ranking, const std::set<std::string>& relevant, size_t k) {
    if (relevant.empty()) return 0.0;
    size_t limit = std::min(k, ranking.items.size());
    double dcg = 0.0;
    for (size_t i = 0; i < limit; ++i) {
        if (relevant.count(ranking.items[i].id)) dcg += 1.0 / std::log2(static_cast<double>(i + 2));
    }
    double ideal = 0.0;
    size_t ideal_hits = std::min(k, relevant.size());
    for (size_t i = 0; i < ideal_hits; ++i) ideal += 1.0 / std::log2(static_cast<double>(i + 2));
    return ideal == 0.0 ? 0.0 : dcg / ideal;
}

double MetricReport::at(const std::string& metric, size_t k) const {
    auto it = values.find({metric, k});
    if (it == values.end()) raise(ErrorCode::ConfigError, "no value for " + metric + "@" + std::to_string(k));
    return it->second;
}

std::string MetricReport::to_csv() const {
    std::string out = "metric,k,value\n";
    char buf[64];
    for (const auto& [key, value] : values) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
        out += key.first + "," + std::to_string(key.second) + "," + std::string(buf, end) + "\n";
    }
    return out;
}

MetricReport MetricReport::from_csv(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line) || line != "metric,k,value")
        raise(ErrorCode::ParseError, "report CSV missing the metric,k,value header");
    MetricReport report;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            raise(ErrorCode::ParseError, "report CSV line " + std::to_string(line_no) + " malformed");
        try {
            report.values[{line.substr(0, c1),
                           static_cast<size_t>(std::stoull(line.substr(c1 + 1, c2 - c1 - 1)))}] =
                std::stod(line.substr(c2 + 1));
        } catch (const std::exception&) {
            raise(ErrorCode::ParseError, "report CSV line " + std::to_string(line_no) + " malformed");
        }
    }
    return report;
}

std::string MetricReport::to_table() const {
    std::set<size_t> ks;
    for (const auto& [key, ignored] : values) ks.insert(key.second);
    std::ostringstream out;
    out << "metric";
    for (size_t k : ks) out << "\t@" << k;
    out << "\n";
    for (const std::string metric : {"recall", "mrr", "ndcg"}) {
        out << metric;
        for (size_t k : ks) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.4f", values.at({metric, k}));
            out << "\t" << buf;
        }
        out << "\n";
    }
    return out.str();
}

MetricReport evaluate_run(const std::vector<RunLine>& run, const Qrels& qrels,
                          const std::vector<size_t>& ks) {
    if (qrels.relevant.empty()) raise(ErrorCode::ConfigError, "qrels are empty");
    for (size_t k : ks) {
        if (k < 1) raise(ErrorCode::ConfigError, "metric cutoff k must be >= 1");
    }

    // group run lines into per-claim rankings, ordered by rank
    std::map<std::string, std::vector<RunLine>> by_claim;
    for (const auto& line : run) by_claim[line.claim_id].push_back(line);

    std::map<std::string, RankedList> rankings;
    for (auto& [claim_id, lines] : by_claim) {
        std::sort(lines.begin(), lines.end(),
                  [](const RunLine& a, const RunLine& b) { return a.rank < b.rank; });
        RankedList list;
        list.query_id = claim_id;
        for (const auto& line : lines) list.items.push_back({line.evidence_id, line.score});
        rankings[claim_id] = std::move(list);
    }

    size_t covered = 0;
    for (const auto& [claim_id, ignored] : qrels.relevant) {
        if (rankings.count(claim_id)) ++covered;
    }
    if (covered == 0)
        raise(ErrorCode::ConfigError, "run shares no claims with the qrels");

    MetricReport report;
    report.claims_evaluated = qrels.relevant.size();
    static const RankedList kEmptyRanking;
    for (size_t k : ks) {
        double recall_sum = 0.0, mrr_sum = 0.0, ndcg_sum = 0.0;
        for (const auto& [claim_id, relevant] : qrels.relevant) {
            auto it = rankings.find(claim_id);
            const RankedList& ranking = it == rankings.end() ? kEmptyRanking : it->second;
            recall_sum += recall_at_k(ranking, relevant, k);
            mrr_sum += mrr_at_k(ranking, relevant, k);
            ndcg_sum += ndcg_at_k(ranking, relevant, k);
        }
        double n = static_cast<double>(qrels.relevant.size());
        report.values[{"recall", k}] = recall_sum / n;
        report.values[{"mrr", k}] = mrr_sum / n;
        report.values[{"ndcg", k}] = ndcg_sum / n;
    }
    return report;
}

MetricReport evaluate_run_file(const std::string& path, const Qrels& qrels,
                               const std::vector<size_t>& ks, const std::string& stage) {
    auto lines = read_run_file(path);
    std::vector<RunLine> filtered;
    for (auto& line : lines) {
        if (line.stage == stage) filtered.push_back(std::move(line));
    }
    if (filtered.empty())
        raise(ErrorCode::ConfigError, "run file has no lines for stage '" + stage + "': " + path);
    return evaluate_run(filtered, qrels, ks);
}

} // namespace daclr
