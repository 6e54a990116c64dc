#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "daclr/event.hpp"

namespace daclr {

struct Qrels {
    std::map<std::string, std::set<std::string>> relevant; // claim id -> evidence ids

    bool is_relevant(const std::string& claim_id, const std::string& evidence_id) const {
        auto it = relevant.find(claim_id);
        return it != relevant.end() && it->second.count(evidence_id) > 0;
    }
};

struct Splits {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
};

struct Dataset {
    std::vector<Claim> claims;
    std::vector<EvidenceDoc> corpus;
    Qrels qrels;
    Splits splits;
    // page id -> evidence ids, from the optional page_id field; single-unit
    // pages when absent
    std::map<std::string, std::vector<std::string>> page_map;
    bool summaries_missing = false;

    const Claim& claim(const std::string& id) const;
    const EvidenceDoc& evidence(const std::string& id) const;
    const EventSummary& claim_summary(const std::string& id) const;
    const EventSummary& evidence_summary(const std::string& id) const;

    void rebuild_lookup();
    void validate() const;

private:
    std::map<std::string, size_t> claim_lookup_;
    std::map<std::string, size_t> evidence_lookup_;
};

// Reads claims.jsonl, evidence.jsonl, qrels.tsv and, when present,
// summaries.jsonl and splits.json from a dataset directory.
Dataset load_corpus(const std::string& dir);

void save_dataset(const Dataset& dataset, const std::string& dir);

// Cluster-structured synthetic corpus: per-cluster disjoint vocabularies,
// one gold evidence per claim sharing verb/attribute/participants, and
// near-miss distractors sharing participants but not the event structure.
Dataset synth_dataset(uint64_t seed, size_t n_claims, size_t n_evidence, size_t n_clusters);

// TREC-style run files: claim_id evidence_id rank score stage
struct RunLine {
    std::string claim_id;
    std::string evidence_id;
    int rank = 0;
    double score = 0.0;
    std::string stage; // "recall" or "rerank"
};

void write_run_file(const std::string& path, const std::vector<RunLine>& lines);
std::vector<RunLine> read_run_file(const std::string& path);

} // namespace daclr
