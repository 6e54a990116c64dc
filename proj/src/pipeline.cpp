#include "daclr/pipeline.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "daclr/errors.hpp"

namespace daclr {

DenseIndex build_dense_index(const EncoderModel& model, const Dataset& dataset) {
    DenseIndex index;
    index.ids.reserve(dataset.corpus.size());
    index.rows.reserve(dataset.corpus.size());
    for (const auto& doc : dataset.corpus) {
        if (!doc.summary) raise(ErrorCode::MissingSummary, "evidence '" + doc.id + "' has no summary");
        index.ids.push_back(doc.id);
        index.rows.push_back(encode(model, view(*doc.summary, ViewKind::Full)));
    }
    index.model_fingerprint = model.fingerprint();
    return index;
}

RankedList recall(const DenseIndex& index, const EncoderModel& model, const Claim& claim, size_t p) {
    if (p < 1 || p > index.ids.size())
        raise(ErrorCode::InvalidP,
              "recall depth p=" + std::to_string(p) + " outside [1, " +
                  std::to_string(index.ids.size()) + "]");
    if (index.model_fingerprint != model.fingerprint())
        raise(ErrorCode::ModelMismatch, "dense index was built by a different model checkpoint");
    if (!claim.summary) raise(ErrorCode::MissingSummary, "claim '" + claim.id + "' has no summary");

    Embedding claim_emb = encode(model, view(*claim.summary, ViewKind::Full));
    std::vector<ScoredDoc> scored;
    scored.reserve(index.ids.size());
    for (size_t i = 0; i < index.ids.size(); ++i) {
        scored.push_back({index.ids[i], cosine(claim_emb, index.rows[i])});
    }
    auto list = make_ranked_list(claim.id, std::move(scored));
    if (list.items.size() > p) list.items.resize(p);
    return list;
}

RankedList rerank(const EncoderModel& model, const Dataset& dataset, const Claim& claim,
                  const RankedList& candidates, size_t q) {
    if (q > candidates.items.size())
        raise(ErrorCode::InvalidQ, "rerank depth q=" + std::to_string(q) + " exceeds candidate count " +
                                       std::to_string(candidates.items.size()));
    if (!claim.summary) raise(ErrorCode::MissingSummary, "claim '" + claim.id + "' has no summary");

    const std::string claim_text = view(*claim.summary, ViewKind::Full);
    std::vector<ScoredDoc> scored;
    scored.reserve(candidates.items.size());
    for (const auto& candidate : candidates.items) {
        const std::string evidence_text = view(dataset.evidence_summary(candidate.id), ViewKind::Full);
        scored.push_back({candidate.id, cross_score(model, claim_text, evidence_text)});
    }
    auto list = make_ranked_list(claim.id, std::move(scored));
    if (list.items.size() > q) list.items.resize(q);
    return list;
}

RankedList retrieve(const EncoderModel& model, const DenseIndex& index, const Dataset& dataset,
                    const Claim& claim, size_t p, size_t q) {
    if (!(q < p && p <= index.ids.size()))
        raise(ErrorCode::InvalidStagePlan,
              "need q < p <= corpus size, got q=" + std::to_string(q) + ", p=" + std::to_string(p) +
                  ", n=" + std::to_string(index.ids.size()));
    return rerank(model, dataset, claim, recall(index, model, claim, p), q);
}

std::vector<RunLine> to_run_lines(const RankedList& list, const std::string& stage) {
    std::vector<RunLine> lines;
    lines.reserve(list.items.size());
    for (size_t i = 0; i < list.items.size(); ++i) {
        lines.push_back({list.query_id, list.items[i].id, static_cast<int>(i + 1),
                         list.items[i].score, stage});
    }
    return lines;
}

namespace {
constexpr char kDenseMagic[8] = {'D', 'A', 'C', 'L', 'R', 'D', 'X', '1'};
}

void DenseIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot write dense index to " + path);
    out.write(kDenseMagic, 8);
    auto put_u64 = [&](uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    put_u64(ids.size());
    put_u64(rows.empty() ? 0 : rows.front().size());
    put_u64(model_fingerprint.size());
    out.write(model_fingerprint.data(), static_cast<std::streamsize>(model_fingerprint.size()));
    for (size_t i = 0; i < ids.size(); ++i) {
        put_u64(ids[i].size());
        out.write(ids[i].data(), static_cast<std::streamsize>(ids[i].size()));
        out.write(reinterpret_cast<const char*>(rows[i].data()),
                  static_cast<std::streamsize>(rows[i].size() * sizeof(double)));
    }
}

DenseIndex DenseIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot read dense index from " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kDenseMagic, 8) != 0)
        raise(ErrorCode::ParseError, "not a daclr dense index: " + path);
    auto get_u64 = [&]() {
        uint64_t v = 0;
        if (!in.read(reinterpret_cast<char*>(&v), 8))
            raise(ErrorCode::ParseError, "truncated dense index: " + path);
        return v;
    };
    DenseIndex index;
    uint64_t count = get_u64();
    uint64_t dim = get_u64();
    uint64_t fp_len = get_u64();
    index.model_fingerprint.resize(fp_len);
    if (!in.read(index.model_fingerprint.data(), static_cast<std::streamsize>(fp_len)))
        raise(ErrorCode::ParseError, "truncated dense index: " + path);
    index.ids.reserve(count);
    index.rows.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        uint64_t id_len = get_u64();
        std::string id(id_len, '\0');
        if (!in.read(id.data(), static_cast<std::streamsize>(id_len)))
            raise(ErrorCode::ParseError, "truncated dense index: " + path);
        Embedding row(dim);
        if (!in.read(reinterpret_cast<char*>(row.data()),
                     static_cast<std::streamsize>(dim * sizeof(double))))
            raise(ErrorCode::ParseError, "truncated dense index: " + path);
        index.ids.push_back(std::move(id));
        index.rows.push_back(std::move(row));
    }
    return index;
}

} // namespace daclr
