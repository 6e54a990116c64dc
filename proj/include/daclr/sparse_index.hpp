#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "daclr/event.hpp"

namespace daclr {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

// lowercase, split on non-alphanumeric, drop empties ("[Mask]" becomes "mask")
std::vector<std::string> tokenize(const std::string& text);

struct ScoredDoc {
    std::string id;
    double score = 0.0;

    bool operator==(const ScoredDoc&) const = default;
};

// Carrier for every ranking in the system. Scores non-increasing, ids unique,
// ties broken by ascending doc id.
struct RankedList {
    std::string query_id;
    std::vector<ScoredDoc> items;

    std::vector<std::string> ids() const;
};

RankedList make_ranked_list(std::string query_id, std::vector<ScoredDoc> items);

struct Posting {
    uint32_t doc_index = 0;
    uint32_t term_frequency = 0;
};

struct TermCount {
    uint32_t term_id = 0;
    uint32_t term_frequency = 0;
};

// Which text of a document feeds the index.
enum class IndexField { Raw, Full, Sent, Struct };

const char* index_field_name(IndexField f);
IndexField index_field_from_name(const std::string& name);

class SparseIndex {
public:
    SparseIndex() = default;

    static SparseIndex build(const std::vector<EvidenceDoc>& corpus, IndexField field = IndexField::Raw,
                             Bm25Params params = {});
    // generic entry point used for page-level indexes and tests
    static SparseIndex build_from_texts(const std::vector<std::pair<std::string, std::string>>& docs,
                                        Bm25Params params = {});

    double bm25_score(const std::vector<std::string>& query, const std::string& doc_id) const;
    double tfidf_score(const std::vector<std::string>& query, const std::string& doc_id) const;

    // all docs matching at least one query token, ranked; cutoff 0 = no cutoff
    RankedList rank_bm25(const std::string& query_id, const std::vector<std::string>& query,
                         size_t cutoff = 0) const;
    RankedList rank_tfidf(const std::string& query_id, const std::vector<std::string>& query,
                          size_t cutoff = 0) const;

    size_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_length() const { return avg_doc_length_; }
    bool has_doc(const std::string& doc_id) const { return doc_lookup_.count(doc_id) > 0; }
    uint32_t doc_length(const std::string& doc_id) const;
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const Bm25Params& params() const { return params_; }

    // term frequency of token in doc; 0 when either is unknown
    uint32_t term_frequency(const std::string& token, const std::string& doc_id) const;
    // number of docs containing token
    uint32_t doc_frequency(const std::string& token) const;

    void save(const std::string& path) const;
    static SparseIndex load(const std::string& path);

private:
    uint32_t require_doc(const std::string& doc_id) const;
    void validate() const;

    void rebuild_doc_terms();

    std::vector<std::string> doc_ids_;                      // insertion order
    std::unordered_map<std::string, uint32_t> doc_lookup_;  // id -> index
    std::vector<uint32_t> doc_lengths_;
    std::map<std::string, uint32_t> vocabulary_;            // token -> term id
    std::vector<std::string> terms_;                        // term id -> token
    std::vector<std::vector<Posting>> postings_;            // term id -> postings, doc-ordered
    // per doc, (term id, tf) sorted by token text; derived, not persisted
    std::vector<std::vector<TermCount>> doc_terms_;
    double avg_doc_length_ = 0.0;
    Bm25Params params_;
};

// Borda-count fusion: fused score of a doc is the sum over lists of
// (cutoff - rank); docs absent from a list contribute 0 from it.
RankedList fuse_rankings(const std::vector<RankedList>& lists, size_t cutoff);

// Appendix-style candidate preselection: fuse TF-IDF and BM25 page rankings,
// then take each selected page's top evidence units by BM25.
std::vector<std::string> preselect(const SparseIndex& page_index, const SparseIndex& evidence_index,
                                   const std::map<std::string, std::vector<std::string>>& page_map,
                                   const Claim& claim, size_t pages = 150, size_t per_doc = 30);

} // namespace daclr
