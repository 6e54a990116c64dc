#include "daclr/sparse_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "daclr/errors.hpp"

namespace daclr {

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
        if (alnum) {
            current += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::vector<std::string> RankedList::ids() const {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(item.id);
    return out;
}

RankedList make_ranked_list(std::string query_id, std::vector<ScoredDoc> items) {
    std::sort(items.begin(), items.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    for (size_t i = 1; i < items.size(); ++i) {
        if (items[i].id == items[i - 1].id)
            raise(ErrorCode::QueryMismatch, "duplicate doc id '" + items[i].id + "' in ranked list");
    }
    return RankedList{std::move(query_id), std::move(items)};
}

const char* index_field_name(IndexField f) {
    switch (f) {
        case IndexField::Raw: return "raw";
        case IndexField::Full: return "full";
        case IndexField::Sent: return "sent";
        case IndexField::Struct: return "struct";
    }
    return "raw";
}

IndexField index_field_from_name(const std::string& name) {
    if (name == "raw") return IndexField::Raw;
    if (name == "full") return IndexField::Full;
    if (name == "sent") return IndexField::Sent;
    if (name == "struct") return IndexField::Struct;
    raise(ErrorCode::ConfigError, "unknown index field '" + name + "'");
}

namespace {

std::string index_text(const EvidenceDoc& doc, IndexField field) {
    if (field == IndexField::Raw) return doc.raw_text;
    if (!doc.summary) return "";
    if (field == IndexField::Sent &&
        doc.summary->participants.empty() && doc.summary->attributes.empty())
        return "";
    switch (field) {
        case IndexField::Full: return view(*doc.summary, ViewKind::Full);
        case IndexField::Sent: return view(*doc.summary, ViewKind::Sent);
        case IndexField::Struct: return view(*doc.summary, ViewKind::Struct);
        default: return doc.raw_text;
    }
}

} // namespace

SparseIndex SparseIndex::build(const std::vector<EvidenceDoc>& corpus, IndexField field,
                               Bm25Params params) {
    std::vector<std::pair<std::string, std::string>> docs;
    docs.reserve(corpus.size());
    bool any_nonempty = false;
    for (const auto& doc : corpus) {
        std::string text = index_text(doc, field);
        any_nonempty = any_nonempty || !text.empty();
        docs.emplace_back(doc.id, std::move(text));
    }
    if (docs.empty()) raise(ErrorCode::EmptyCorpus, "cannot index an empty corpus");
    if (!any_nonempty)
        raise(ErrorCode::EmptyCorpus,
              std::string("field '") + index_field_name(field) + "' is empty for every document");
    return build_from_texts(docs, params);
}

SparseIndex SparseIndex::build_from_texts(const std::vector<std::pair<std::string, std::string>>& docs,
                                          Bm25Params params) {
    if (docs.empty()) raise(ErrorCode::EmptyCorpus, "cannot index an empty corpus");
    SparseIndex index;
    index.params_ = params;
    uint64_t total_length = 0;
    for (const auto& [id, text] : docs) {
        if (index.doc_lookup_.count(id))
            raise(ErrorCode::IngestError, "duplicate doc id '" + id + "' in corpus");
        uint32_t doc_index = static_cast<uint32_t>(index.doc_ids_.size());
        index.doc_lookup_[id] = doc_index;
        index.doc_ids_.push_back(id);

        auto tokens = tokenize(text);
        total_length += tokens.size();
        index.doc_lengths_.push_back(static_cast<uint32_t>(tokens.size()));

        std::map<std::string, uint32_t> counts;
        for (const auto& token : tokens) counts[token]++;
        index.doc_terms_.emplace_back();
        for (const auto& [token, tf] : counts) {
            auto [it, inserted] =
                index.vocabulary_.try_emplace(token, static_cast<uint32_t>(index.postings_.size()));
            if (inserted) {
                index.postings_.emplace_back();
                index.terms_.push_back(token);
            }
            index.postings_[it->second].push_back({doc_index, tf});
            index.doc_terms_.back().push_back({it->second, tf});
        }
    }
    index.avg_doc_length_ =
        static_cast<double>(total_length) / static_cast<double>(index.doc_ids_.size());
    return index;
}

void SparseIndex::rebuild_doc_terms() {
    terms_.assign(postings_.size(), "");
    doc_terms_.assign(doc_ids_.size(), {});
    // vocabulary_ iterates in token order, matching the per-doc order that
    // build_from_texts produces
    for (const auto& [token, term_id] : vocabulary_) {
        terms_[term_id] = token;
        for (const auto& posting : postings_[term_id]) {
            doc_terms_[posting.doc_index].push_back({term_id, posting.term_frequency});
        }
    }
}

uint32_t SparseIndex::require_doc(const std::string& doc_id) const {
    auto it = doc_lookup_.find(doc_id);
    if (it == doc_lookup_.end()) raise(ErrorCode::UnknownDoc, "doc id '" + doc_id + "' not in index");
    return it->second;
}

uint32_t SparseIndex::doc_length(const std::string& doc_id) const {
    return doc_lengths_[require_doc(doc_id)];
}

namespace {

uint32_t tf_in_postings(const std::vector<Posting>& plist, uint32_t doc_index) {
    auto it = std::lower_bound(plist.begin(), plist.end(), doc_index,
                               [](const Posting& p, uint32_t idx) { return p.doc_index < idx; });
    return (it != plist.end() && it->doc_index == doc_index) ? it->term_frequency : 0;
}

} // namespace

uint32_t SparseIndex::term_frequency(const std::string& token, const std::string& doc_id) const {
    uint32_t doc_index = require_doc(doc_id);
    auto it = vocabulary_.find(token);
    if (it == vocabulary_.end()) return 0;
    return tf_in_postings(postings_[it->second], doc_index);
}

uint32_t SparseIndex::doc_frequency(const std::string& token) const {
    auto it = vocabulary_.find(token);
    return it == vocabulary_.end() ? 0 : static_cast<uint32_t>(postings_[it->second].size());
}

double SparseIndex::bm25_score(const std::vector<std::string>& query, const std::string& doc_id) const {
    uint32_t doc_index = require_doc(doc_id);
    const double n_docs = static_cast<double>(doc_ids_.size());
    const double dl = static_cast<double>(doc_lengths_[doc_index]);
    double score = 0.0;
    for (const auto& token : query) {
        auto it = vocabulary_.find(token);
        if (it == vocabulary_.end()) continue;
        const auto& plist = postings_[it->second];
        uint32_t tf = tf_in_postings(plist, doc_index);
        if (tf == 0) continue;
        const double df = static_cast<double>(plist.size());
        const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
        const double tfd = static_cast<double>(tf);
        score += idf * (tfd * (params_.k1 + 1.0)) /
                 (tfd + params_.k1 * (1.0 - params_.b + params_.b * dl / avg_doc_length_));
    }
    return score;
}

double SparseIndex::tfidf_score(const std::vector<std::string>& query, const std::string& doc_id) const {
    uint32_t doc_index = require_doc(doc_id);
    const double n_docs = static_cast<double>(doc_ids_.size());

    // ltc weights: (1 + ln tf) * ln(N / df), cosine-normalized
    std::map<std::string, uint32_t> query_counts;
    for (const auto& token : query) {
        if (vocabulary_.count(token)) query_counts[token]++;
    }

    std::map<uint32_t, double> doc_weights; // term id -> weight
    double doc_norm_sq = 0.0;
    for (const auto& [term_id, tf] : doc_terms_[doc_index]) {
        const double df = static_cast<double>(postings_[term_id].size());
        const double idf = std::log(n_docs / df);
        const double w = (1.0 + std::log(static_cast<double>(tf))) * idf;
        doc_weights[term_id] = w;
        doc_norm_sq += w * w;
    }

    double dot = 0.0;
    double query_norm_sq = 0.0;
    for (const auto& [token, qtf] : query_counts) {
        const uint32_t term_id = vocabulary_.at(token);
        const double df = static_cast<double>(postings_[term_id].size());
        const double idf = std::log(n_docs / df);
        const double w = (1.0 + std::log(static_cast<double>(qtf))) * idf;
        query_norm_sq += w * w;
        auto it = doc_weights.find(term_id);
        if (it != doc_weights.end()) dot += w * it->second;
    }

    if (query_norm_sq == 0.0 || doc_norm_sq == 0.0) return 0.0;
    return dot / (std::sqrt(query_norm_sq) * std::sqrt(doc_norm_sq));
}

namespace {

template <typename ScoreFn>
RankedList rank_by(const SparseIndex& index, const std::string& query_id, size_t cutoff, ScoreFn&& fn) {
    std::vector<ScoredDoc> scored;
    for (const auto& doc_id : index.doc_ids()) {
        double s = fn(doc_id);
        if (s > 0.0) scored.push_back({doc_id, s});
    }
    auto list = make_ranked_list(query_id, std::move(scored));
    if (cutoff > 0 && list.items.size() > cutoff) list.items.resize(cutoff);
    return list;
}

} // namespace

RankedList SparseIndex::rank_bm25(const std::string& query_id, const std::vector<std::string>& query,
                                  size_t cutoff) const {
    return rank_by(*this, query_id, cutoff, [&](const std::string& id) { return bm25_score(query, id); });
}

RankedList SparseIndex::rank_tfidf(const std::string& query_id, const std::vector<std::string>& query,
                                   size_t cutoff) const {
    return rank_by(*this, query_id, cutoff, [&](const std::string& id) { return tfidf_score(query, id); });
}

RankedList fuse_rankings(const std::vector<RankedList>& lists, size_t cutoff) {
    if (lists.empty()) raise(ErrorCode::QueryMismatch, "fuse_rankings needs at least one list");
    const std::string& query_id = lists.front().query_id;
    for (const auto& list : lists) {
        if (list.query_id != query_id)
            raise(ErrorCode::QueryMismatch,
                  "fused lists answer different queries ('" + query_id + "' vs '" + list.query_id + "')");
    }
    std::map<std::string, double> fused;
    for (const auto& list : lists) {
        for (size_t rank = 0; rank < list.items.size(); ++rank) {
            fused[list.items[rank].id] +=
                static_cast<double>(cutoff) - static_cast<double>(rank);
        }
    }
    std::vector<ScoredDoc> scored;
    scored.reserve(fused.size());
    for (const auto& [id, score] : fused) scored.push_back({id, score});
    auto out = make_ranked_list(query_id, std::move(scored));
    if (out.items.size() > cutoff) out.items.resize(cutoff);
    return out;
}

std::vector<std::string> preselect(const SparseIndex& page_index, const SparseIndex& evidence_index,
                                   const std::map<std::string, std::vector<std::string>>& page_map,
                                   const Claim& claim, size_t pages, size_t per_doc) {
    auto query = tokenize(claim.raw_text);
    if (query.empty()) return {};

    auto tfidf_pages = page_index.rank_tfidf(claim.id, query, pages);
    auto bm25_pages = page_index.rank_bm25(claim.id, query, pages);
    auto fused = fuse_rankings({tfidf_pages, bm25_pages}, pages);

    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& page : fused.items) {
        auto it = page_map.find(page.id);
        if (it == page_map.end()) continue;
        std::vector<ScoredDoc> units;
        units.reserve(it->second.size());
        for (const auto& evidence_id : it->second) {
            units.push_back({evidence_id, evidence_index.bm25_score(query, evidence_id)});
        }
        auto ranked_units = make_ranked_list(claim.id, std::move(units));
        size_t take = std::min(per_doc, ranked_units.items.size());
        for (size_t i = 0; i < take; ++i) {
            const auto& id = ranked_units.items[i].id;
            if (seen.insert(id).second) out.push_back(id);
        }
    }
    return out;
}

namespace {
constexpr int kIndexFormatVersion = 1;
}

void SparseIndex::save(const std::string& path) const {
    nlohmann::json j;
    j["format"] = "daclr-sparse-index";
    j["version"] = kIndexFormatVersion;
    j["k1"] = params_.k1;
    j["b"] = params_.b;
    j["doc_ids"] = doc_ids_;
    j["doc_lengths"] = doc_lengths_;
    nlohmann::json vocab = nlohmann::json::object();
    for (const auto& [token, term_id] : vocabulary_) vocab[token] = term_id;
    j["vocabulary"] = std::move(vocab);
    nlohmann::json postings = nlohmann::json::array();
    for (const auto& plist : postings_) {
        nlohmann::json entry = nlohmann::json::array();
        for (const auto& p : plist) entry.push_back({p.doc_index, p.term_frequency});
        postings.push_back(std::move(entry));
    }
    j["postings"] = std::move(postings);

    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot write index to " + path);
    out << j.dump();
}

SparseIndex SparseIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot read index from " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) raise(ErrorCode::ParseError, "index file is not valid JSON: " + path);
    if (j.value("format", "") != "daclr-sparse-index" || j.value("version", -1) != kIndexFormatVersion)
        raise(ErrorCode::ParseError, "unrecognized index format in " + path);

    SparseIndex index;
    try {
        index.params_.k1 = j.at("k1").get<double>();
        index.params_.b = j.at("b").get<double>();
        index.doc_ids_ = j.at("doc_ids").get<std::vector<std::string>>();
        index.doc_lengths_ = j.at("doc_lengths").get<std::vector<uint32_t>>();
        for (const auto& [token, term_id] : j.at("vocabulary").items())
            index.vocabulary_[token] = term_id.get<uint32_t>();
        for (const auto& entry : j.at("postings")) {
            std::vector<Posting> plist;
            for (const auto& p : entry) plist.push_back({p.at(0).get<uint32_t>(), p.at(1).get<uint32_t>()});
            index.postings_.push_back(std::move(plist));
        }
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::ParseError, std::string("bad index file: ") + e.what());
    }
    for (size_t i = 0; i < index.doc_ids_.size(); ++i)
        index.doc_lookup_[index.doc_ids_[i]] = static_cast<uint32_t>(i);
    uint64_t total = 0;
    for (uint32_t len : index.doc_lengths_) total += len;
    index.avg_doc_length_ =
        index.doc_ids_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(index.doc_ids_.size());
    index.validate();
    index.rebuild_doc_terms();
    return index;
}

void SparseIndex::validate() const {
    if (doc_ids_.empty()) raise(ErrorCode::ParseError, "index has no documents");
    if (doc_lengths_.size() != doc_ids_.size())
        raise(ErrorCode::ParseError, "index doc_lengths/doc_ids size mismatch");
    if (vocabulary_.size() != postings_.size())
        raise(ErrorCode::ParseError, "index vocabulary/postings size mismatch");
    for (const auto& [token, term_id] : vocabulary_) {
        if (term_id >= postings_.size())
            raise(ErrorCode::ParseError, "term id out of range for token '" + token + "'");
        for (const auto& posting : postings_[term_id]) {
            if (posting.doc_index >= doc_ids_.size())
                raise(ErrorCode::ParseError, "posting references unknown doc for token '" + token + "'");
            if (posting.term_frequency == 0)
                raise(ErrorCode::ParseError, "zero term frequency for token '" + token + "'");
        }
    }
}

} // namespace daclr
