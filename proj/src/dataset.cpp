#include "daclr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "daclr/errors.hpp"
#include "daclr/rng.hpp"
#include "daclr/summarizer.hpp"

namespace daclr {

namespace fs = std::filesystem;

const Claim& Dataset::claim(const std::string& id) const {
    auto it = claim_lookup_.find(id);
    if (it == claim_lookup_.end()) raise(ErrorCode::UnknownDoc, "unknown claim id '" + id + "'");
    return claims[it->second];
}

const EvidenceDoc& Dataset::evidence(const std::string& id) const {
    auto it = evidence_lookup_.find(id);
    if (it == evidence_lookup_.end()) raise(ErrorCode::UnknownDoc, "unknown evidence id '" + id + "'");
    return corpus[it->second];
}

const EventSummary& Dataset::claim_summary(const std::string& id) const {
    const Claim& c = claim(id);
    if (!c.summary) raise(ErrorCode::MissingSummary, "claim '" + id + "' has no event summary");
    return *c.summary;
}

const EventSummary& Dataset::evidence_summary(const std::string& id) const {
    const EvidenceDoc& e = evidence(id);
    if (!e.summary) raise(ErrorCode::MissingSummary, "evidence '" + id + "' has no event summary");
    return *e.summary;
}

void Dataset::rebuild_lookup() {
    claim_lookup_.clear();
    evidence_lookup_.clear();
    for (size_t i = 0; i < claims.size(); ++i) claim_lookup_[claims[i].id] = i;
    for (size_t i = 0; i < corpus.size(); ++i) evidence_lookup_[corpus[i].id] = i;
    if (page_map.empty()) {
        for (const auto& doc : corpus) page_map[doc.id] = {doc.id};
    }
}

void Dataset::validate() const {
    if (claim_lookup_.size() != claims.size())
        raise(ErrorCode::IngestError, "duplicate claim ids in dataset");
    if (evidence_lookup_.size() != corpus.size())
        raise(ErrorCode::IngestError, "duplicate evidence ids in dataset");
    for (const auto& [claim_id, evidence_ids] : qrels.relevant) {
        if (!claim_lookup_.count(claim_id))
            raise(ErrorCode::IngestError, "qrels references unknown claim '" + claim_id + "'");
        if (evidence_ids.empty())
            raise(ErrorCode::IngestError, "qrels claim '" + claim_id + "' has no relevant evidence");
        for (const auto& evidence_id : evidence_ids) {
            if (!evidence_lookup_.count(evidence_id))
                raise(ErrorCode::IngestError, "qrels references unknown evidence '" + evidence_id + "'");
        }
    }
    std::set<std::string> in_split;
    for (const auto* split : {&splits.train, &splits.validation, &splits.test}) {
        for (const auto& id : *split) {
            if (!claim_lookup_.count(id))
                raise(ErrorCode::IngestError, "split references unknown claim '" + id + "'");
            if (!in_split.insert(id).second)
                raise(ErrorCode::IngestError, "claim '" + id + "' appears in more than one split");
        }
    }
    for (const auto& [claim_id, ignored] : qrels.relevant) {
        if (!in_split.count(claim_id))
            raise(ErrorCode::IngestError, "qrels claim '" + claim_id + "' is not in any split");
    }
    for (const auto& [page_id, evidence_ids] : page_map) {
        for (const auto& id : evidence_ids) {
            if (!evidence_lookup_.count(id))
                raise(ErrorCode::IngestError,
                      "page '" + page_id + "' references unknown evidence '" + id + "'");
        }
    }
}

namespace {

nlohmann::json parse_line(const std::string& line, const std::string& file, size_t line_no) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        raise(ErrorCode::IngestError, file + ":" + std::to_string(line_no) + ": not a JSON object");
    return j;
}

std::string require_string(const nlohmann::json& j, const char* key, const std::string& file,
                           size_t line_no) {
    if (!j.contains(key) || !j.at(key).is_string())
        raise(ErrorCode::IngestError,
              file + ":" + std::to_string(line_no) + ": missing string field '" + key + "'");
    return j.at(key).get<std::string>();
}

EventSummary summary_from_json(const nlohmann::json& j, const std::string& file, size_t line_no) {
    EventSummary s;
    try {
        s.summary = j.at("summary").get<std::string>();
        s.participants = j.at("participants").get<std::vector<std::string>>();
        s.attributes = j.at("attributes").get<std::vector<std::string>>();
        s.structure = j.at("structure").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::IngestError,
              file + ":" + std::to_string(line_no) + ": bad summary record: " + e.what());
    }
    auto validation = validate_summary(s);
    if (!validation.ok())
        raise(ErrorCode::IngestError, file + ":" + std::to_string(line_no) +
                                          ": invalid summary: " + validation.violations.front());
    return s;
}

} // namespace

Dataset load_corpus(const std::string& dir) {
    Dataset dataset;
    const fs::path root(dir);

    {
        const std::string file = (root / "claims.jsonl").string();
        std::ifstream in(file);
        if (!in) raise(ErrorCode::IoError, "cannot open " + file);
        std::string line;
        size_t line_no = 0;
        std::set<std::string> seen;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto j = parse_line(line, file, line_no);
            Claim c;
            c.id = require_string(j, "id", file, line_no);
            c.raw_text = require_string(j, "text", file, line_no);
            if (c.id.empty())
                raise(ErrorCode::IngestError, file + ":" + std::to_string(line_no) + ": empty claim id");
            if (!seen.insert(c.id).second)
                raise(ErrorCode::IngestError,
                      file + ":" + std::to_string(line_no) + ": duplicate claim id '" + c.id + "'");
            dataset.claims.push_back(std::move(c));
        }
    }

    {
        const std::string file = (root / "evidence.jsonl").string();
        std::ifstream in(file);
        if (!in) raise(ErrorCode::IoError, "cannot open " + file);
        std::string line;
        size_t line_no = 0;
        std::set<std::string> seen;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto j = parse_line(line, file, line_no);
            EvidenceDoc doc;
            doc.id = require_string(j, "id", file, line_no);
            if (doc.id.empty())
                raise(ErrorCode::IngestError, file + ":" + std::to_string(line_no) + ": empty evidence id");
            if (!seen.insert(doc.id).second)
                raise(ErrorCode::IngestError,
                      file + ":" + std::to_string(line_no) + ": duplicate evidence id '" + doc.id + "'");
            try {
                doc.modality = modality_from_name(j.value("modality", "text"));
            } catch (const Error&) {
                raise(ErrorCode::IngestError, file + ":" + std::to_string(line_no) +
                                                  ": unknown modality '" + j.value("modality", "") + "'");
            }
            doc.raw_text = j.value("text", "");
            if (j.contains("image_path")) doc.media_path = j.at("image_path").get<std::string>();
            if (doc.modality == Modality::Image && !doc.media_path)
                raise(ErrorCode::IngestError,
                      file + ":" + std::to_string(line_no) + ": image evidence needs image_path");
            if (doc.modality != Modality::Image && doc.raw_text.empty())
                raise(ErrorCode::IngestError,
                      file + ":" + std::to_string(line_no) + ": text/table evidence needs text");
            if (j.contains("page_id")) {
                dataset.page_map[j.at("page_id").get<std::string>()].push_back(doc.id);
            }
            dataset.corpus.push_back(std::move(doc));
        }
    }

    {
        const std::string file = (root / "qrels.tsv").string();
        std::ifstream in(file);
        if (!in) raise(ErrorCode::IoError, "cannot open " + file);
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            size_t tab = line.find('\t');
            if (tab == std::string::npos)
                raise(ErrorCode::IngestError, file + ":" + std::to_string(line_no) + ": expected TAB");
            dataset.qrels.relevant[line.substr(0, tab)].insert(line.substr(tab + 1));
        }
    }

    {
        const std::string file = (root / "summaries.jsonl").string();
        std::ifstream in(file);
        if (in) {
            std::map<std::string, EventSummary> summaries;
            std::string line;
            size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty()) continue;
                auto j = parse_line(line, file, line_no);
                std::string id = require_string(j, "id", file, line_no);
                summaries[id] = summary_from_json(j, file, line_no);
            }
            for (auto& c : dataset.claims) {
                auto it = summaries.find(c.id);
                if (it != summaries.end()) c.summary = it->second;
                else dataset.summaries_missing = true;
            }
            for (auto& doc : dataset.corpus) {
                auto it = summaries.find(doc.id);
                if (it != summaries.end()) doc.summary = it->second;
                else dataset.summaries_missing = true;
            }
        } else {
            dataset.summaries_missing = true;
        }
    }

    {
        const std::string file = (root / "splits.json").string();
        std::ifstream in(file);
        if (in) {
            nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
            if (j.is_discarded() || !j.is_object())
                raise(ErrorCode::IngestError, file + ": not a JSON object");
            try {
                dataset.splits.train = j.value("train", std::vector<std::string>{});
                dataset.splits.validation = j.value("validation", std::vector<std::string>{});
                dataset.splits.test = j.value("test", std::vector<std::string>{});
            } catch (const nlohmann::json::exception& e) {
                raise(ErrorCode::IngestError, file + ": bad splits: " + e.what());
            }
        } else {
            for (const auto& c : dataset.claims) dataset.splits.train.push_back(c.id);
        }
    }

    dataset.rebuild_lookup();
    dataset.validate();
    return dataset;
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
    const fs::path root(dir);
    fs::create_directories(root);

    {
        std::ofstream out(root / "claims.jsonl", std::ios::binary);
        for (const auto& c : dataset.claims) {
            nlohmann::json j{{"id", c.id}, {"text", c.raw_text}};
            out << j.dump() << "\n";
        }
    }
    {
        std::ofstream out(root / "evidence.jsonl", std::ios::binary);
        for (const auto& doc : dataset.corpus) {
            nlohmann::json j{{"id", doc.id}, {"modality", modality_name(doc.modality)},
                             {"text", doc.raw_text}};
            if (doc.media_path) j["image_path"] = *doc.media_path;
            out << j.dump() << "\n";
        }
    }
    {
        std::ofstream out(root / "qrels.tsv", std::ios::binary);
        for (const auto& [claim_id, evidence_ids] : dataset.qrels.relevant) {
            for (const auto& evidence_id : evidence_ids) out << claim_id << "\t" << evidence_id << "\n";
        }
    }
    {
        std::ofstream out(root / "summaries.jsonl", std::ios::binary);
        auto dump = [&out](const std::string& id, const EventSummary& s) {
            nlohmann::json j{{"id", id},
                             {"summary", s.summary},
                             {"participants", s.participants},
                             {"attributes", s.attributes},
                             {"structure", s.structure}};
            out << j.dump() << "\n";
        };
        for (const auto& c : dataset.claims)
            if (c.summary) dump(c.id, *c.summary);
        for (const auto& doc : dataset.corpus)
            if (doc.summary) dump(doc.id, *doc.summary);
    }
    {
        std::ofstream out(root / "splits.json", std::ios::binary);
        nlohmann::json j{{"train", dataset.splits.train},
                         {"validation", dataset.splits.validation},
                         {"test", dataset.splits.test}};
        out << j.dump(2) << "\n";
    }
}

namespace {

// short lowercase alphabetic tag: 0 -> "a", 25 -> "z", 26 -> "ba", ...
std::string alpha_tag(size_t n) {
    std::string tag;
    do {
        tag.insert(tag.begin(), static_cast<char>('a' + n % 26));
        n /= 26;
    } while (n > 0);
    return tag;
}

std::string padded(size_t n, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*zu", width, n);
    return buf;
}

} // namespace

Dataset synth_dataset(uint64_t seed, size_t n_claims, size_t n_evidence, size_t n_clusters) {
    if (n_clusters < 2) raise(ErrorCode::ConfigError, "synth_dataset needs n_clusters >= 2");
    if (n_claims == 0) raise(ErrorCode::ConfigError, "synth_dataset needs n_claims >= 1");
    if (n_evidence < n_claims)
        raise(ErrorCode::ConfigError, "synth_dataset needs n_evidence >= n_claims (one gold each)");

    constexpr size_t kNamesPerCluster = 12;
    constexpr size_t kVerbsPerCluster = 12;
    constexpr size_t kPlacesPerCluster = 12;
    constexpr size_t kYearsPerCluster = 12;
    constexpr size_t kFillersPerCluster = 12;

    struct ClusterVocab {
        std::vector<std::string> names, verbs, places, years, fillers;
    };
    std::vector<ClusterVocab> vocab(n_clusters);
    for (size_t c = 0; c < n_clusters; ++c) {
        std::string tag = alpha_tag(c);
        for (size_t k = 0; k < kNamesPerCluster; ++k)
            vocab[c].names.push_back("N" + tag + alpha_tag(k));
        for (size_t k = 0; k < kVerbsPerCluster; ++k) vocab[c].verbs.push_back("v" + tag + alpha_tag(k));
        for (size_t k = 0; k < kPlacesPerCluster; ++k) vocab[c].places.push_back("q" + tag + alpha_tag(k));
        for (size_t k = 0; k < kYearsPerCluster; ++k)
            vocab[c].years.push_back(std::to_string(1200 + c * kYearsPerCluster + k));
        for (size_t k = 0; k < kFillersPerCluster; ++k)
            vocab[c].fillers.push_back("w" + tag + alpha_tag(k));
    }

    size_t traps_total = n_evidence - n_claims;

    Dataset dataset;
    size_t evidence_seq = 0;
    for (size_t i = 0; i < n_claims; ++i) {
        size_t c = i % n_clusters;
        const auto& cv = vocab[c];
        Rng rng = Rng::for_stream(seed, "synth-claim", i);

        size_t p1 = rng.next_below(cv.names.size());
        size_t p2 = rng.next_below(cv.names.size() - 1);
        if (p2 >= p1) ++p2;
        const std::string& name1 = cv.names[p1];
        const std::string& name2 = cv.names[p2];
        size_t verb_idx = rng.next_below(cv.verbs.size());
        const std::string& verb = cv.verbs[verb_idx];
        const std::string& place = cv.places[rng.next_below(cv.places.size())];
        size_t y = rng.next_below(cv.years.size());
        const std::string& year = cv.years[y];

        Claim claim;
        claim.id = "c" + padded(i, 5);
        claim.raw_text = name1 + " " + verb + " " + name2 + " in " + place + " on " + year;
        claim.summary = fallback_extract(claim.raw_text);
        dataset.claims.push_back(std::move(claim));

        // gold: same event (verb, place, participants) told differently, with
        // trailing filler so the evidence wording never equals the claim's
        size_t y2 = rng.next_below(cv.years.size() - 1);
        if (y2 >= y) ++y2;
        size_t f1 = rng.next_below(cv.fillers.size());
        size_t f2 = rng.next_below(cv.fillers.size() - 1);
        if (f2 >= f1) ++f2;
        EvidenceDoc gold;
        gold.id = "e" + padded(evidence_seq++, 6);
        gold.modality = Modality::Text;
        gold.raw_text = name2 + " " + verb + " " + name1 + " in " + place + " on " + cv.years[y2] +
                        " " + cv.fillers[f1] + " " + cv.fillers[f2];
        gold.summary = fallback_extract(gold.raw_text);
        dataset.corpus.push_back(std::move(gold));
        dataset.qrels.relevant[dataset.claims.back().id].insert(dataset.corpus.back().id);

        // near-misses: same participants and wording shape, different event verb
        size_t trap_count = traps_total / n_claims + (i < traps_total % n_claims ? 1 : 0);
        // every tenth claim gets near-misses with an off year, which keeps the
        // sparse ranking honest without making them lexically easy
        bool off_year_traps = (i % 10) == 9;
        for (size_t t = 0; t < trap_count; ++t) {
            size_t w = rng.next_below(cv.verbs.size() - 1);
            if (w >= verb_idx) ++w;
            const std::string& trap_verb = cv.verbs[w];
            std::string trap_year = year;
            if (off_year_traps) {
                size_t y3 = rng.next_below(cv.years.size() - 1);
                if (y3 >= y) ++y3;
                trap_year = cv.years[y3];
            }
            EvidenceDoc trap;
            trap.id = "e" + padded(evidence_seq++, 6);
            trap.modality = Modality::Text;
            trap.raw_text =
                name1 + " " + trap_verb + " " + name2 + " in " + place + " on " + trap_year;
            trap.summary = fallback_extract(trap.raw_text);
            dataset.corpus.push_back(std::move(trap));
        }
    }

    // splits: 70/15/15 over a seeded shuffle
    std::vector<std::string> order;
    for (const auto& claim : dataset.claims) order.push_back(claim.id);
    Rng split_rng = Rng::for_stream(seed, "synth-splits");
    split_rng.shuffle(order);
    size_t n_val = n_claims * 15 / 100;
    size_t n_test = n_claims * 15 / 100;
    if (n_claims >= 3) {
        n_val = std::max<size_t>(n_val, 1);
        n_test = std::max<size_t>(n_test, 1);
    }
    size_t n_train = n_claims - n_val - n_test;
    dataset.splits.train.assign(order.begin(), order.begin() + n_train);
    dataset.splits.validation.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    dataset.splits.test.assign(order.begin() + n_train + n_val, order.end());
    std::sort(dataset.splits.train.begin(), dataset.splits.train.end());
    std::sort(dataset.splits.validation.begin(), dataset.splits.validation.end());
    std::sort(dataset.splits.test.begin(), dataset.splits.test.end());

    dataset.rebuild_lookup();
    dataset.validate();
    return dataset;
}

void write_run_file(const std::string& path, const std::vector<RunLine>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot write run file " + path);
    char buf[64];
    for (const auto& line : lines) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), line.score);
        out << line.claim_id << " " << line.evidence_id << " " << line.rank << " "
            << std::string_view(buf, end - buf) << " " << line.stage << "\n";
    }
}

std::vector<RunLine> read_run_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot read run file " + path);
    std::vector<RunLine> lines;
    std::string raw;
    size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (raw.empty()) continue;
        std::istringstream ss(raw);
        RunLine line;
        std::string rank_text, score_text;
        if (!(ss >> line.claim_id >> line.evidence_id >> rank_text >> score_text >> line.stage))
            raise(ErrorCode::ParseError,
                  path + ":" + std::to_string(line_no) + ": expected 5 whitespace-separated fields");
        try {
            line.rank = std::stoi(rank_text);
            line.score = std::stod(score_text);
        } catch (const std::exception&) {
            raise(ErrorCode::ParseError,
                  path + ":" + std::to_string(line_no) + ": bad rank or score");
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

} // namespace daclr
