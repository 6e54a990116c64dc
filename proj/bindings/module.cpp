#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "daclr/config.hpp"
#include "daclr/dataset.hpp"
#include "daclr/encoder.hpp"
#include "daclr/errors.hpp"
#include "daclr/metrics.hpp"
#include "daclr/pipeline.hpp"
#include "daclr/sparse_index.hpp"
#include "daclr/summarizer.hpp"
#include "daclr/trainer.hpp"

namespace py = pybind11;
using namespace daclr;

namespace {

ViewKind view_kind_arg(const std::string& name) { return view_kind_from_name(name); }

RankedList ranked_from_pairs(const std::string& query_id,
                             const std::vector<std::pair<std::string, double>>& items) {
    std::vector<ScoredDoc> scored;
    scored.reserve(items.size());
    for (const auto& [id, score] : items) scored.push_back({id, score});
    return make_ranked_list(query_id, std::move(scored));
}

std::vector<std::pair<std::string, double>> ranked_to_pairs(const RankedList& list) {
    std::vector<std::pair<std::string, double>> out;
    out.reserve(list.items.size());
    for (const auto& item : list.items) out.emplace_back(item.id, item.score);
    return out;
}

} // namespace

PYBIND11_MODULE(_daclr, m) {
    m.doc() = "daclr core operations: event summaries, sparse/dense retrieval, "
              "adaptive contrastive training";

    py::register_exception<Error>(m, "DaclrError");

    py::class_<EventSummary>(m, "EventSummary")
        .def(py::init<>())
        .def_readwrite("summary", &EventSummary::summary)
        .def_readwrite("participants", &EventSummary::participants)
        .def_readwrite("attributes", &EventSummary::attributes)
        .def_readwrite("structure", &EventSummary::structure)
        .def("__repr__", [](const EventSummary& s) {
            return "EventSummary(summary='" + s.summary + "')";
        });

    m.def("mask_structure", &mask_structure, py::arg("summary_text"), py::arg("participants"),
          py::arg("attributes"));
    m.def("view", [](const EventSummary& s, const std::string& kind) {
        return view(s, view_kind_arg(kind));
    }, py::arg("summary"), py::arg("kind"));
    m.def("validate_summary", [](const EventSummary& s) { return validate_summary(s).violations; },
          py::arg("summary"), "returns the list of violated invariants (empty = pass)");
    m.def("fallback_extract", &fallback_extract, py::arg("raw_text"));
    m.def("parse_response", &parse_response, py::arg("raw"));
    m.def("render_prompt", [](const std::string& template_text, const std::string& input_text,
                              const std::string& modality) {
        return render_prompt(PromptTemplate{template_text, "inline"}, input_text, modality);
    }, py::arg("template_text"), py::arg("input_text"), py::arg("modality"));

    m.def("tokenize", &tokenize, py::arg("text"));

    py::class_<SparseIndex>(m, "SparseIndex")
        .def_static("build", [](const std::vector<std::pair<std::string, std::string>>& docs,
                                double k1, double b) {
            return SparseIndex::build_from_texts(docs, Bm25Params{k1, b});
        }, py::arg("docs"), py::arg("k1") = 1.2, py::arg("b") = 0.75)
        .def("bm25_score", &SparseIndex::bm25_score, py::arg("query"), py::arg("doc_id"))
        .def("tfidf_score", &SparseIndex::tfidf_score, py::arg("query"), py::arg("doc_id"))
        .def("rank_bm25", [](const SparseIndex& index, const std::string& query_id,
                             const std::vector<std::string>& query, size_t cutoff) {
            return ranked_to_pairs(index.rank_bm25(query_id, query, cutoff));
        }, py::arg("query_id"), py::arg("query"), py::arg("cutoff") = 0)
        .def("rank_tfidf", [](const SparseIndex& index, const std::string& query_id,
                              const std::vector<std::string>& query, size_t cutoff) {
            return ranked_to_pairs(index.rank_tfidf(query_id, query, cutoff));
        }, py::arg("query_id"), py::arg("query"), py::arg("cutoff") = 0)
        .def_property_readonly("doc_count", &SparseIndex::doc_count)
        .def_property_readonly("avg_doc_length", &SparseIndex::avg_doc_length)
        .def("save", &SparseIndex::save, py::arg("path"))
        .def_static("load", &SparseIndex::load, py::arg("path"));

    m.def("fuse_rankings", [](const std::string& query_id,
                              const std::vector<std::vector<std::pair<std::string, double>>>& lists,
                              size_t cutoff) {
        std::vector<RankedList> ranked;
        ranked.reserve(lists.size());
        for (const auto& list : lists) ranked.push_back(ranked_from_pairs(query_id, list));
        return ranked_to_pairs(fuse_rankings(ranked, cutoff));
    }, py::arg("query_id"), py::arg("lists"), py::arg("cutoff"));

    py::class_<EncoderModel>(m, "EncoderModel")
        .def_static("init", &EncoderModel::init, py::arg("hash_dim"), py::arg("embed_dim"),
                    py::arg("seed"))
        .def_readonly("hash_dim", &EncoderModel::hash_dim)
        .def_readonly("embed_dim", &EncoderModel::embed_dim)
        .def("fingerprint", &EncoderModel::fingerprint)
        .def("save", &EncoderModel::save, py::arg("path"))
        .def_static("load", &EncoderModel::load, py::arg("path"));

    m.def("encode", &encode, py::arg("model"), py::arg("text"));
    m.def("cosine", &cosine, py::arg("u"), py::arg("v"));
    m.def("cross_score", &cross_score, py::arg("model"), py::arg("claim_text"),
          py::arg("evidence_text"));

    m.def("info_nce", &info_nce, py::arg("sim_pos"), py::arg("sims_neg"), py::arg("tau"));
    m.def("loss_unit", &loss_unit, py::arg("l_sent"), py::arg("l_struct"), py::arg("beta"));
    m.def("total_loss", &total_loss, py::arg("l_full"), py::arg("l_unit"));
    m.def("update_ema", &update_ema, py::arg("ema_prev"), py::arg("margin_t"));
    m.def("compute_mid", &compute_mid, py::arg("acc_val"), py::arg("delta_min"), py::arg("delta_max"));
    m.def("schedule", &schedule, py::arg("ema_margin"), py::arg("delta_mid"), py::arg("tau_s"));

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("n_claims", [](const Dataset& d) { return d.claims.size(); })
        .def_property_readonly("n_evidence", [](const Dataset& d) { return d.corpus.size(); })
        .def_property_readonly("train_ids", [](const Dataset& d) { return d.splits.train; })
        .def_property_readonly("validation_ids", [](const Dataset& d) { return d.splits.validation; })
        .def_property_readonly("test_ids", [](const Dataset& d) { return d.splits.test; })
        .def("relevant", [](const Dataset& d, const std::string& claim_id) {
            auto it = d.qrels.relevant.find(claim_id);
            return it == d.qrels.relevant.end() ? std::set<std::string>{} : it->second;
        }, py::arg("claim_id"));

    m.def("synth_dataset", &synth_dataset, py::arg("seed"), py::arg("n_claims"),
          py::arg("n_evidence"), py::arg("n_clusters"));
    m.def("load_corpus", &load_corpus, py::arg("dir"));
    m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("dir"));

    py::class_<CurvePoint>(m, "CurvePoint")
        .def_readonly("step", &CurvePoint::step)
        .def_readonly("delta_t", &CurvePoint::delta_t)
        .def_readonly("ema_delta", &CurvePoint::ema_delta)
        .def_readonly("acc_val", &CurvePoint::acc_val)
        .def_readonly("delta_mid", &CurvePoint::delta_mid)
        .def_readonly("p_dyn", &CurvePoint::p_dyn)
        .def_readonly("beta", &CurvePoint::beta)
        .def_readonly("n_rand", &CurvePoint::n_rand)
        .def_readonly("n_tb", &CurvePoint::n_tb)
        .def_readonly("n_model", &CurvePoint::n_model)
        .def_readonly("loss_full", &CurvePoint::loss_full)
        .def_readonly("loss_sent", &CurvePoint::loss_sent)
        .def_readonly("loss_struct", &CurvePoint::loss_struct)
        .def_readonly("loss_unit", &CurvePoint::loss_unit)
        .def_readonly("loss_total", &CurvePoint::loss_total);

    m.def("train", [](const Dataset& dataset, uint32_t hash_dim, uint32_t embed_dim, int epochs,
                      int batch_size, double learning_rate, double temperature, size_t negatives,
                      double tau_s, double delta_min, double delta_max, uint64_t eval_interval,
                      uint64_t hard_interval, size_t mined_per_claim, uint64_t seed,
                      bool freeze_beta_semantic, bool random_negatives_only) {
        TrainConfig config;
        config.epochs = epochs;
        config.batch_size = batch_size;
        config.learning_rate = learning_rate;
        config.temperature = temperature;
        config.negatives_per_claim = negatives;
        config.tau_s = tau_s;
        config.delta_min = delta_min;
        config.delta_max = delta_max;
        config.eval_interval = eval_interval;
        config.hard_interval = hard_interval;
        config.mined_per_claim = mined_per_claim;
        config.rng_seed = seed;
        config.freeze_beta_semantic = freeze_beta_semantic;
        config.random_negatives_only = random_negatives_only;
        RunConfig defaults;
        NegativePools pools = build_negative_pools(dataset, config.negatives_per_claim,
                                                   defaults.preselect_pages,
                                                   defaults.preselect_per_doc, defaults.bm25);
        EncoderModel model = EncoderModel::init(hash_dim, embed_dim, seed);
        TrainResult result = train(std::move(model), config, dataset, std::move(pools));
        return py::make_tuple(result.model, result.curve);
    }, py::arg("dataset"), py::arg("hash_dim") = 1u << 15, py::arg("embed_dim") = 64,
       py::arg("epochs") = 40, py::arg("batch_size") = 32, py::arg("learning_rate") = 150.0,
       py::arg("temperature") = 0.05, py::arg("negatives") = 16, py::arg("tau_s") = 0.05,
       py::arg("delta_min") = 0.42, py::arg("delta_max") = 0.62, py::arg("eval_interval") = 20,
       py::arg("hard_interval") = 20, py::arg("mined_per_claim") = 32, py::arg("seed") = 1,
       py::arg("freeze_beta_semantic") = false, py::arg("random_negatives_only") = false);

    py::class_<DenseIndex>(m, "DenseIndex")
        .def_property_readonly("size", [](const DenseIndex& d) { return d.ids.size(); })
        .def_readonly("model_fingerprint", &DenseIndex::model_fingerprint)
        .def("save", &DenseIndex::save, py::arg("path"))
        .def_static("load", &DenseIndex::load, py::arg("path"));

    m.def("build_dense_index", &build_dense_index, py::arg("model"), py::arg("dataset"));
    m.def("recall", [](const DenseIndex& index, const EncoderModel& model, const Dataset& dataset,
                       const std::string& claim_id, size_t p) {
        return ranked_to_pairs(recall(index, model, dataset.claim(claim_id), p));
    }, py::arg("index"), py::arg("model"), py::arg("dataset"), py::arg("claim_id"), py::arg("p"));
    m.def("retrieve", [](const EncoderModel& model, const DenseIndex& index, const Dataset& dataset,
                         const std::string& claim_id, size_t p, size_t q) {
        return ranked_to_pairs(retrieve(model, index, dataset, dataset.claim(claim_id), p, q));
    }, py::arg("model"), py::arg("index"), py::arg("dataset"), py::arg("claim_id"), py::arg("p"),
       py::arg("q"));

    m.def("recall_at_k", [](const std::vector<std::pair<std::string, double>>& ranking,
                            const std::set<std::string>& relevant, size_t k) {
        return recall_at_k(ranked_from_pairs("q", ranking), relevant, k);
    }, py::arg("ranking"), py::arg("relevant"), py::arg("k"));
    m.def("mrr_at_k", [](const std::vector<std::pair<std::string, double>>& ranking,
                         const std::set<std::string>& relevant, size_t k) {
        return mrr_at_k(ranked_from_pairs("q", ranking), relevant, k);
    }, py::arg("ranking"), py::arg("relevant"), py::arg("k"));
    m.def("ndcg_at_k", [](const std::vector<std::pair<std::string, double>>& ranking,
                          const std::set<std::string>& relevant, size_t k) {
        return ndcg_at_k(ranked_from_pairs("q", ranking), relevant, k);
    }, py::arg("ranking"), py::arg("relevant"), py::arg("k"));
}
