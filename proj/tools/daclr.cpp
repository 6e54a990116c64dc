// daclr command-line interface: dataset ingestion, summarization, indexing,
// training, retrieval and evaluation wired into one binary.

#include <cstdio>
#include <filesystem>
#include <future>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "daclr/config.hpp"
#include "daclr/dataset.hpp"
#include "daclr/encoder.hpp"
#include "daclr/errors.hpp"
#include "daclr/metrics.hpp"
#include "daclr/pipeline.hpp"
#include "daclr/sparse_index.hpp"
#include "daclr/summarizer.hpp"
#include "daclr/trainer.hpp"

namespace fs = std::filesystem;
using namespace daclr;

namespace {

RunConfig load_or_default(const std::string& config_path) {
    if (config_path.empty()) return RunConfig{};
    return load_config(config_path);
}

Qrels load_qrels_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot open qrels file " + path);
    Qrels qrels;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos)
            raise(ErrorCode::IngestError, path + ":" + std::to_string(line_no) + ": expected TAB");
        qrels.relevant[line.substr(0, tab)].insert(line.substr(tab + 1));
    }
    if (qrels.relevant.empty()) raise(ErrorCode::IngestError, "qrels file is empty: " + path);
    return qrels;
}

int cmd_synth(const std::string& out_dir, uint64_t seed, size_t n_claims, size_t n_evidence,
              size_t n_clusters) {
    Dataset dataset = synth_dataset(seed, n_claims, n_evidence, n_clusters);
    save_dataset(dataset, out_dir);
    std::printf("wrote %zu claims, %zu evidence docs, %zu qrels entries to %s\n",
                dataset.claims.size(), dataset.corpus.size(), dataset.qrels.relevant.size(),
                out_dir.c_str());
    return 0;
}

int cmd_ingest(const std::string& data_dir) {
    Dataset dataset = load_corpus(data_dir);
    size_t with_summary = 0;
    for (const auto& c : dataset.claims)
        if (c.summary) ++with_summary;
    for (const auto& d : dataset.corpus)
        if (d.summary) ++with_summary;
    std::printf("claims: %zu\nevidence: %zu\nqrels claims: %zu\nsplits: %zu/%zu/%zu\n",
                dataset.claims.size(), dataset.corpus.size(), dataset.qrels.relevant.size(),
                dataset.splits.train.size(), dataset.splits.validation.size(),
                dataset.splits.test.size());
    std::printf("summaries: %zu attached%s\n", with_summary,
                dataset.summaries_missing ? " (some records are missing summaries)" : "");
    return 0;
}

int cmd_summarize(const RunConfig& config, const std::string& input, const std::string& out,
                  bool offline) {
    // idempotent: ids already present in the output file are skipped
    std::set<std::string> done;
    {
        std::ifstream existing(out);
        std::string line;
        while (std::getline(existing, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line, nullptr, false);
            if (!j.is_discarded() && j.contains("id")) done.insert(j["id"].get<std::string>());
        }
    }

    std::ifstream in(input);
    if (!in) raise(ErrorCode::IoError, "cannot open " + input);
    std::ofstream append(out, std::ios::app | std::ios::binary);
    if (!append) raise(ErrorCode::IoError, "cannot open " + out + " for append");

    std::optional<MllmClient> client;
    if (!offline) client.emplace(config.mllm, default_prompt_template());

    struct Pending {
        EvidenceDoc doc;
    };
    std::vector<Pending> pending;
    size_t skipped = 0;
    {
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("id") || !j.contains("text"))
                raise(ErrorCode::IngestError,
                      input + ":" + std::to_string(line_no) + ": need JSON with id and text");
            std::string id = j["id"].get<std::string>();
            if (done.count(id)) {
                ++skipped;
                continue;
            }
            Pending p;
            p.doc.id = id;
            p.doc.modality = modality_from_name(j.value("modality", "text"));
            p.doc.raw_text = j["text"].get<std::string>();
            if (j.contains("image_path")) p.doc.media_path = j["image_path"].get<std::string>();
            pending.push_back(std::move(p));
        }
    }

    auto summarize_one = [&](const EvidenceDoc& doc) -> std::optional<EventSummary> {
        if (offline) {
            if (doc.raw_text.empty()) return std::nullopt;
            return fallback_extract(doc.raw_text);
        }
        try {
            return client->request_summary(doc);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::SummaryQualityError && !doc.raw_text.empty()) {
                // quality failure routes to the offline extractor
                std::fprintf(stderr, "note: %s fell back to offline extraction (%s)\n",
                             doc.id.c_str(), e.what());
                return fallback_extract(doc.raw_text);
            }
            throw;
        }
    };

    // live requests run max_concurrency at a time; results land in input order
    size_t written = 0, failed = 0;
    const size_t window = offline ? 1 : static_cast<size_t>(config.mllm.max_concurrency);
    for (size_t begin = 0; begin < pending.size(); begin += window) {
        size_t end = std::min(begin + window, pending.size());
        std::vector<std::future<std::optional<EventSummary>>> futures;
        for (size_t i = begin; i < end; ++i) {
            if (window == 1) break;
            futures.push_back(std::async(std::launch::async,
                                         [&, i] { return summarize_one(pending[i].doc); }));
        }
        for (size_t i = begin; i < end; ++i) {
            std::optional<EventSummary> summary =
                window == 1 ? summarize_one(pending[i].doc) : futures[i - begin].get();
            if (!summary) {
                std::fprintf(stderr, "skipping %s: empty text cannot be summarized offline\n",
                             pending[i].doc.id.c_str());
                ++failed;
                continue;
            }
            nlohmann::json rec{{"id", pending[i].doc.id},
                               {"summary", summary->summary},
                               {"participants", summary->participants},
                               {"attributes", summary->attributes},
                               {"structure", summary->structure}};
            append << rec.dump() << "\n";
            ++written;
        }
    }
    std::printf("summaries written: %zu, skipped (existing): %zu, failed: %zu\n", written, skipped,
                failed);
    return failed == 0 ? 0 : 1;
}

int cmd_index(const RunConfig& config, const std::string& data_dir, const std::string& out,
              const std::string& field) {
    Dataset dataset = load_corpus(data_dir);
    SparseIndex index = SparseIndex::build(dataset.corpus, index_field_from_name(field), config.bm25);
    index.save(out);
    std::printf("indexed %zu docs (field=%s, avg length %.2f) -> %s\n", index.doc_count(),
                field.c_str(), index.avg_doc_length(), out.c_str());
    return 0;
}

int cmd_train(RunConfig config, const std::string& data_dir, const std::string& out_dir,
              bool resume) {
    Dataset dataset = load_corpus(data_dir);
    fs::create_directories(out_dir);
    NegativePools pools =
        build_negative_pools(dataset, config.train.negatives_per_claim, config.preselect_pages,
                             config.preselect_per_doc, config.bm25);
    TrainResult result;
    if (resume) {
        result = train_resume(out_dir, config.train, dataset, std::move(pools));
        // append the continuation to the existing curve rows
        std::vector<CurvePoint> curve;
        try {
            curve = read_curves(out_dir + "/curves.csv");
        } catch (const Error&) {
        }
        while (!curve.empty() && !result.curve.empty() &&
               curve.back().step >= result.curve.front().step)
            curve.pop_back();
        curve.insert(curve.end(), result.curve.begin(), result.curve.end());
        result.curve = std::move(curve);
    } else {
        EncoderModel model = EncoderModel::init(config.encoder_hash_dim, config.encoder_embed_dim,
                                                config.train.rng_seed);
        result = train(std::move(model), config.train, dataset, std::move(pools), out_dir);
    }
    write_curves(out_dir + "/curves.csv", result.curve);
    std::printf("trained %zu steps; final p_dyn %.4f, acc_val %.4f\n", result.curve.size(),
                result.scheduler.p_dyn, result.scheduler.acc_val);
    std::printf("checkpoint: %s/encoder.ckpt\ncurves: %s/curves.csv\n", out_dir.c_str(),
                out_dir.c_str());
    return 0;
}

int cmd_retrieve(const std::string& data_dir, const std::string& checkpoint,
                 const std::string& claim_id, const std::string& split, size_t p, size_t q,
                 const std::string& out, const std::string& stage) {
    Dataset dataset = load_corpus(data_dir);
    EncoderModel model = EncoderModel::load(checkpoint);
    DenseIndex index = build_dense_index(model, dataset);

    std::vector<std::string> claim_ids;
    if (!claim_id.empty()) {
        claim_ids.push_back(claim_id);
    } else if (split == "all") {
        for (const auto& c : dataset.claims) claim_ids.push_back(c.id);
    } else {
        const auto& ids = split == "train"        ? dataset.splits.train
                          : split == "validation" ? dataset.splits.validation
                                                  : dataset.splits.test;
        claim_ids = ids;
    }

    std::vector<RunLine> lines;
    for (const auto& id : claim_ids) {
        const Claim& claim = dataset.claim(id);
        RankedList recalled = recall(index, model, claim, p);
        if (stage == "recall" || stage == "both") {
            auto recall_lines = to_run_lines(recalled, "recall");
            lines.insert(lines.end(), recall_lines.begin(), recall_lines.end());
        }
        if (stage == "rerank" || stage == "both") {
            RankedList reranked = rerank(model, dataset, claim, recalled, q);
            auto rerank_lines = to_run_lines(reranked, "rerank");
            lines.insert(lines.end(), rerank_lines.begin(), rerank_lines.end());
        }
    }
    write_run_file(out, lines);
    std::printf("wrote %zu run lines for %zu claims to %s\n", lines.size(), claim_ids.size(),
                out.c_str());
    return 0;
}

int cmd_eval(const RunConfig& config, const std::string& run_path, const std::string& data_dir,
             const std::string& qrels_path, const std::string& stage, const std::string& report_out,
             std::vector<size_t> ks) {
    Qrels qrels;
    if (!qrels_path.empty()) {
        qrels = load_qrels_file(qrels_path);
    } else if (!data_dir.empty()) {
        qrels = load_corpus(data_dir).qrels;
    } else {
        raise(ErrorCode::ConfigError, "eval needs --qrels or --data-dir");
    }
    if (ks.empty()) ks = config.eval_ks;
    MetricReport report = evaluate_run_file(run_path, qrels, ks, stage);
    std::fputs(report.to_table().c_str(), stdout);
    if (!report_out.empty()) {
        std::ofstream out(report_out, std::ios::binary);
        if (!out) raise(ErrorCode::IoError, "cannot write report to " + report_out);
        out << report.to_csv();
        std::printf("report: %s\n", report_out.c_str());
    }
    return 0;
}

int cmd_curves(const std::string& curves_path, const std::string& out) {
    auto curve = read_curves(curves_path);
    if (curve.empty()) raise(ErrorCode::ParseError, "curves file has no rows: " + curves_path);

    size_t k = curve.front().n_rand + curve.front().n_tb + curve.front().n_model;
    for (const auto& point : curve) {
        if (point.n_rand + point.n_tb + point.n_model != k)
            raise(ErrorCode::ParseError,
                  "negative counts at step " + std::to_string(point.step) + " do not sum to K");
        for (double v : {point.delta_t, point.ema_delta, point.acc_val, point.delta_mid, point.p_dyn,
                         point.beta, point.loss_full, point.loss_sent, point.loss_struct,
                         point.loss_unit, point.loss_total}) {
            if (!std::isfinite(v))
                raise(ErrorCode::ParseError,
                      "non-finite value at step " + std::to_string(point.step));
        }
    }
    size_t decile = std::max<size_t>(1, curve.size() / 10);
    auto mean_over = [&](size_t begin, size_t end, auto&& get) {
        double sum = 0.0;
        for (size_t i = begin; i < end; ++i) sum += get(curve[i]);
        return sum / static_cast<double>(end - begin);
    };
    double p_first = mean_over(0, decile, [](const CurvePoint& c) { return c.p_dyn; });
    double p_last =
        mean_over(curve.size() - decile, curve.size(), [](const CurvePoint& c) { return c.p_dyn; });
    double model_first = mean_over(0, decile, [&](const CurvePoint& c) {
        return static_cast<double>(c.n_model) / static_cast<double>(k);
    });
    double model_last = mean_over(curve.size() - decile, curve.size(), [&](const CurvePoint& c) {
        return static_cast<double>(c.n_model) / static_cast<double>(k);
    });
    std::printf("steps: %zu, K: %zu\n", curve.size(), k);
    std::printf("p_dyn mean: first decile %.4f, last decile %.4f\n", p_first, p_last);
    std::printf("n_model share: first decile %.4f, last decile %.4f\n", model_first, model_last);
    std::printf("final: acc_val %.4f, ema_delta %.4f, beta %.4f\n", curve.back().acc_val,
                curve.back().ema_delta, curve.back().beta);
    if (!out.empty()) {
        write_curves(out, curve);
        std::printf("normalized copy: %s\n", out.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"daclr: event-aware evidence retrieval for fact checking"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "INI config file (defaults used when absent)")
        ->check(CLI::ExistingFile);

    auto* synth = app.add_subcommand("synth", "generate a synthetic cluster-structured dataset");
    uint64_t synth_seed = 1;
    size_t synth_claims = 200, synth_evidence = 1000, synth_clusters = 8;
    std::string synth_out;
    synth->add_option("--seed", synth_seed, "dataset seed");
    synth->add_option("--claims", synth_claims, "number of claims");
    synth->add_option("--evidence", synth_evidence, "number of evidence docs");
    synth->add_option("--clusters", synth_clusters, "number of vocabulary clusters");
    synth->add_option("--out-dir", synth_out, "output dataset directory")->required();

    auto* ingest = app.add_subcommand("ingest", "validate and summarize a dataset directory");
    std::string ingest_dir;
    ingest->add_option("--data-dir", ingest_dir, "dataset directory")->required();

    auto* summarize = app.add_subcommand("summarize", "produce event summaries for a corpus file");
    std::string summarize_in, summarize_out;
    bool summarize_offline = false;
    summarize->add_option("--input", summarize_in, "claims/evidence JSONL")->required();
    summarize->add_option("--out", summarize_out, "summaries JSONL (appended, idempotent)")->required();
    summarize->add_flag("--offline", summarize_offline, "use the deterministic offline extractor");

    auto* index_cmd = app.add_subcommand("index", "build and persist the sparse index");
    std::string index_dir, index_out, index_field = "raw";
    index_cmd->add_option("--data-dir", index_dir, "dataset directory")->required();
    index_cmd->add_option("--out", index_out, "index output path")->required();
    index_cmd->add_option("--field", index_field, "raw|full|sent|struct")
        ->check(CLI::IsMember({"raw", "full", "sent", "struct"}));

    auto* train_cmd = app.add_subcommand("train", "run the adaptive contrastive training loop");
    std::string train_dir, train_out;
    int train_epochs = -1;
    int64_t train_seed = -1;
    int64_t train_k = -1;
    bool train_freeze_beta = false, train_random_only = false;
    train_cmd->add_option("--data-dir", train_dir, "dataset directory")->required();
    train_cmd->add_option("--out-dir", train_out, "output directory for checkpoint/curves")->required();
    train_cmd->add_option("--epochs", train_epochs, "override train.epochs");
    train_cmd->add_option("--seed", train_seed, "override train.seed");
    train_cmd->add_option("--k", train_k, "override train.negatives");
    train_cmd->add_flag("--freeze-beta", train_freeze_beta, "ablation: beta pinned to 1, no struct loss");
    train_cmd->add_flag("--random-negatives", train_random_only, "ablation: random negatives only");
    bool train_resume_flag = false;
    train_cmd->add_flag("--resume", train_resume_flag, "continue from the snapshot in --out-dir");

    auto* retrieve_cmd = app.add_subcommand("retrieve", "two-stage retrieval to a run file");
    std::string retrieve_dir, retrieve_ckpt, retrieve_claim, retrieve_split = "test",
                retrieve_out, retrieve_stage = "rerank";
    int64_t retrieve_p = -1, retrieve_q = -1;
    retrieve_cmd->add_option("--data-dir", retrieve_dir, "dataset directory")->required();
    retrieve_cmd->add_option("--checkpoint", retrieve_ckpt, "encoder checkpoint")->required();
    retrieve_cmd->add_option("--claim-id", retrieve_claim, "retrieve for one claim");
    retrieve_cmd->add_option("--split", retrieve_split, "claims to retrieve for")
        ->check(CLI::IsMember({"train", "validation", "test", "all"}));
    retrieve_cmd->add_option("--p", retrieve_p, "recall depth (default pipeline.p)");
    retrieve_cmd->add_option("--q", retrieve_q, "rerank depth (default pipeline.q)");
    retrieve_cmd->add_option("--out", retrieve_out, "run file output")->required();
    retrieve_cmd->add_option("--stage", retrieve_stage, "which stage lines to write")
        ->check(CLI::IsMember({"recall", "rerank", "both"}));

    auto* eval_cmd = app.add_subcommand("eval", "score a run file against qrels");
    std::string eval_run, eval_dir, eval_qrels, eval_stage = "rerank", eval_out, eval_ks;
    eval_cmd->add_option("--run", eval_run, "run file")->required();
    eval_cmd->add_option("--data-dir", eval_dir, "dataset directory (for qrels)");
    eval_cmd->add_option("--qrels", eval_qrels, "qrels TSV (overrides --data-dir)");
    eval_cmd->add_option("--stage", eval_stage, "run stage to score")
        ->check(CLI::IsMember({"recall", "rerank"}));
    eval_cmd->add_option("--ks", eval_ks, "comma-separated cutoffs (default from config)");
    eval_cmd->add_option("--out", eval_out, "report CSV output path");

    auto* curves_cmd = app.add_subcommand("curves", "validate and summarize a training curves file");
    std::string curves_in, curves_out;
    curves_cmd->add_option("--curves", curves_in, "curves.csv from train")->required();
    curves_cmd->add_option("--out", curves_out, "write a normalized copy");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        std::fputs(app.help().c_str(), stderr);
        return 2;
    }

    try {
        RunConfig config = load_or_default(config_path);
        if (synth->parsed()) return cmd_synth(synth_out, synth_seed, synth_claims, synth_evidence,
                                              synth_clusters);
        if (ingest->parsed()) return cmd_ingest(ingest_dir);
        if (summarize->parsed())
            return cmd_summarize(config, summarize_in, summarize_out, summarize_offline);
        if (index_cmd->parsed()) return cmd_index(config, index_dir, index_out, index_field);
        if (train_cmd->parsed()) {
            if (train_epochs > 0) config.train.epochs = train_epochs;
            if (train_seed >= 0) config.train.rng_seed = static_cast<uint64_t>(train_seed);
            if (train_k >= 2) config.train.negatives_per_claim = static_cast<size_t>(train_k);
            config.train.freeze_beta_semantic = train_freeze_beta;
            config.train.random_negatives_only = train_random_only;
            return cmd_train(config, train_dir, train_out, train_resume_flag);
        }
        if (retrieve_cmd->parsed()) {
            size_t p = retrieve_p > 0 ? static_cast<size_t>(retrieve_p) : config.pipeline_p;
            size_t q = retrieve_q > 0 ? static_cast<size_t>(retrieve_q) : config.pipeline_q;
            return cmd_retrieve(retrieve_dir, retrieve_ckpt, retrieve_claim, retrieve_split,
                                p, q, retrieve_out, retrieve_stage);
        }
        if (eval_cmd->parsed()) {
            std::vector<size_t> ks;
            if (!eval_ks.empty()) {
                std::stringstream ss(eval_ks);
                std::string cell;
                while (std::getline(ss, cell, ',')) {
                    if (!cell.empty()) ks.push_back(static_cast<size_t>(std::stoull(cell)));
                }
            }
            return cmd_eval(config, eval_run, eval_dir, eval_qrels, eval_stage, eval_out, ks);
        }
        if (curves_cmd->parsed()) return cmd_curves(curves_in, curves_out);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
