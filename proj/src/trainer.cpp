#include "daclr/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "daclr/errors.hpp"

namespace daclr {

double info_nce(double sim_pos, const std::vector<double>& sims_neg, double tau) {
    if (tau <= 0.0) raise(ErrorCode::ConfigError, "info_nce temperature must be > 0");
    if (sims_neg.empty()) return 0.0; // degenerate: positive against nothing

    double max_logit = sim_pos / tau;
    for (double s : sims_neg) max_logit = std::max(max_logit, s / tau);
    if (max_logit == sim_pos / tau) {
        // dominant positive: log1p keeps precision when the loss is tiny
        double rest = 0.0;
        for (double s : sims_neg) rest += std::exp(s / tau - max_logit);
        return rest > 1e-4 ? std::log(1.0 + rest) : std::log1p(rest);
    }
    double denom = std::exp(sim_pos / tau - max_logit);
    for (double s : sims_neg) denom += std::exp(s / tau - max_logit);
    return std::log(denom) - (sim_pos / tau - max_logit);
}

double loss_unit(double l_sent, double l_struct, double beta) {
    return beta * l_sent + (1.0 - beta) * l_struct;
}

double total_loss(double l_full, double l_unit) { return l_full + l_unit; }

double margin_from_sims(const std::vector<std::pair<double, std::vector<double>>>& batch_sims) {
    if (batch_sims.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [sim_pos, sims_neg] : batch_sims) {
        double neg_mean = 0.0;
        if (!sims_neg.empty()) {
            for (double s : sims_neg) neg_mean += s;
            neg_mean /= static_cast<double>(sims_neg.size());
        }
        sum += sim_pos - neg_mean;
    }
    return sum / static_cast<double>(batch_sims.size());
}

double update_ema(double ema_prev, double margin_t) { return 0.9 * ema_prev + 0.1 * margin_t; }

double compute_mid(double acc_val, double delta_min, double delta_max) {
    if (delta_min >= delta_max) raise(ErrorCode::ConfigError, "delta_min must be < delta_max");
    if (acc_val < 0.0 || acc_val > 1.0) {
        std::fprintf(stderr, "warning: acc_val %.6g outside [0,1], clamping\n", acc_val);
        acc_val = std::clamp(acc_val, 0.0, 1.0);
    }
    return delta_min + (delta_max - delta_min) * acc_val;
}

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

std::pair<double, double> schedule(double ema_margin, double delta_mid, double tau_s) {
    if (tau_s <= 0.0) raise(ErrorCode::ConfigError, "tau_s must be > 0");
    double p_dyn = stable_sigmoid((ema_margin - delta_mid) / tau_s);
    return {p_dyn, 1.0 - p_dyn};
}

void SchedulerState::refresh() {
    delta_mid = compute_mid(acc_val, delta_min, delta_max);
    auto [p, b] = schedule(ema_margin, delta_mid, tau_s);
    p_dyn = p;
    beta = b;
}

std::string SchedulerState::serialize() const {
    nlohmann::json j{{"ema_margin", ema_margin}, {"acc_val", acc_val},   {"delta_mid", delta_mid},
                     {"p_dyn", p_dyn},           {"beta", beta},         {"step", step},
                     {"tau_s", tau_s},           {"delta_min", delta_min}, {"delta_max", delta_max}};
    return j.dump(2);
}

SchedulerState SchedulerState::deserialize(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        raise(ErrorCode::ParseError, "scheduler snapshot is not valid JSON");
    SchedulerState st;
    try {
        st.ema_margin = j.at("ema_margin").get<double>();
        st.acc_val = j.at("acc_val").get<double>();
        st.delta_mid = j.at("delta_mid").get<double>();
        st.p_dyn = j.at("p_dyn").get<double>();
        st.beta = j.at("beta").get<double>();
        st.step = j.at("step").get<uint64_t>();
        st.tau_s = j.at("tau_s").get<double>();
        st.delta_min = j.at("delta_min").get<double>();
        st.delta_max = j.at("delta_max").get<double>();
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::ParseError, std::string("bad scheduler snapshot: ") + e.what());
    }
    return st;
}

std::vector<std::string> allocate_negatives(const NegativePools& pools, const std::string& claim_id,
                                            const std::set<std::string>& gold_ids, double p_dyn,
                                            Rng& rng, AllocationCounts* counts) {
    const size_t K = pools.total_per_claim;
    if (K < 2) raise(ErrorCode::ConfigError, "negatives per claim (K) must be >= 2");

    static const std::vector<std::string> kEmpty;
    auto pool_of = [&](const std::map<std::string, std::vector<std::string>>& m)
        -> const std::vector<std::string>& {
        auto it = m.find(claim_id);
        return it == m.end() ? kEmpty : it->second;
    };
    const auto& model_pool = pool_of(pools.d_model);
    const auto& tb_pool = pool_of(pools.d_tb);

    {
        std::set<std::string> available;
        auto add_eligible = [&](const std::vector<std::string>& pool) {
            for (const auto& id : pool)
                if (!gold_ids.count(id)) available.insert(id);
        };
        add_eligible(pools.d_rand);
        add_eligible(tb_pool);
        add_eligible(model_pool);
        if (available.size() < K)
            raise(ErrorCode::InsufficientNegatives,
                  "claim '" + claim_id + "': " + std::to_string(available.size()) +
                      " eligible negatives, need " + std::to_string(K));
    }

    size_t quota_model = static_cast<size_t>(static_cast<double>(K) * p_dyn);
    quota_model = std::min(quota_model, K);
    size_t quota_fixed = K - quota_model;
    size_t quota_rand = quota_fixed / 2;
    size_t quota_tb = quota_fixed - quota_rand; // odd remainder goes to d_tb

    std::vector<std::string> picked;
    std::set<std::string> seen;
    AllocationCounts actual;

    auto take = [&](const std::string& id) {
        picked.push_back(id);
        seen.insert(id);
    };
    auto take_head = [&](const std::vector<std::string>& pool, size_t want, size_t& count) {
        for (const auto& id : pool) {
            if (picked.size() >= K || count >= want) break;
            if (gold_ids.count(id) || seen.count(id)) continue;
            take(id);
            ++count;
        }
    };
    auto draw_rand = [&](size_t want) {
        if (pools.d_rand.empty()) return;
        size_t got = 0;
        size_t attempts = 0;
        const size_t max_attempts = pools.d_rand.size() * 16 + 64;
        while (got < want && attempts < max_attempts) {
            ++attempts;
            const auto& id = pools.d_rand[rng.next_below(pools.d_rand.size())];
            if (gold_ids.count(id) || seen.count(id)) continue;
            take(id);
            ++got;
            ++actual.n_rand;
        }
        if (got < want) {
            // crowded pool: deterministic sweep over a shuffled copy
            auto order = pools.d_rand;
            rng.shuffle(order);
            for (const auto& id : order) {
                if (got >= want) break;
                if (gold_ids.count(id) || seen.count(id)) continue;
                take(id);
                ++got;
                ++actual.n_rand;
            }
        }
    };

    take_head(model_pool, quota_model, actual.n_model);
    take_head(tb_pool, quota_tb, actual.n_tb);
    draw_rand(quota_rand);

    // shortfall in any pool is backfilled from d_rand, then whatever is left
    if (picked.size() < K) draw_rand(K - picked.size());
    if (picked.size() < K) take_head(tb_pool, K, actual.n_tb);
    if (picked.size() < K) take_head(model_pool, K, actual.n_model);
    if (picked.size() != K)
        raise(ErrorCode::InsufficientNegatives,
              "claim '" + claim_id + "': allocated " + std::to_string(picked.size()) + " of " +
                  std::to_string(K));

    if (counts) *counts = actual;
    return picked;
}

namespace {

std::vector<Embedding> corpus_embeddings(const EncoderModel& model, const Dataset& dataset) {
    std::vector<Embedding> embeddings;
    embeddings.reserve(dataset.corpus.size());
    for (const auto& doc : dataset.corpus) {
        embeddings.push_back(encode(model, view(dataset.evidence_summary(doc.id), ViewKind::Full)));
    }
    return embeddings;
}

} // namespace

std::map<std::string, std::vector<std::string>> mine_hard_negatives(
    const EncoderModel& model, const std::vector<std::string>& claim_ids, const Dataset& dataset,
    size_t m) {
    auto embeddings = corpus_embeddings(model, dataset);
    std::map<std::string, std::vector<std::string>> mined;
    for (const auto& claim_id : claim_ids) {
        Embedding claim_emb = encode(model, view(dataset.claim_summary(claim_id), ViewKind::Full));
        const auto* gold = dataset.qrels.relevant.count(claim_id)
                               ? &dataset.qrels.relevant.at(claim_id)
                               : nullptr;
        std::vector<ScoredDoc> scored;
        scored.reserve(dataset.corpus.size());
        for (size_t i = 0; i < dataset.corpus.size(); ++i) {
            const auto& id = dataset.corpus[i].id;
            if (gold && gold->count(id)) continue;
            scored.push_back({id, cosine(claim_emb, embeddings[i])});
        }
        auto ranked = make_ranked_list(claim_id, std::move(scored));
        std::vector<std::string> ids;
        ids.reserve(std::min(m, ranked.items.size()));
        for (size_t i = 0; i < ranked.items.size() && i < m; ++i) ids.push_back(ranked.items[i].id);
        mined[claim_id] = std::move(ids);
    }
    return mined;
}

double top1_retrieval_accuracy(const EncoderModel& model, const std::vector<std::string>& claim_ids,
                               const Dataset& dataset) {
    if (claim_ids.empty()) return 0.0;
    auto embeddings = corpus_embeddings(model, dataset);
    size_t hits = 0;
    for (const auto& claim_id : claim_ids) {
        Embedding claim_emb = encode(model, view(dataset.claim_summary(claim_id), ViewKind::Full));
        double best_sim = -2.0;
        const std::string* best_id = nullptr;
        for (size_t i = 0; i < dataset.corpus.size(); ++i) {
            double sim = cosine(claim_emb, embeddings[i]);
            if (sim > best_sim || (sim == best_sim && best_id && dataset.corpus[i].id < *best_id)) {
                best_sim = sim;
                best_id = &dataset.corpus[i].id;
            }
        }
        if (best_id && dataset.qrels.is_relevant(claim_id, *best_id)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(claim_ids.size());
}

namespace {

struct ViewTexts {
    std::string full;
    std::string sent;
    std::string strct;
    bool sent_ok = false;
};

ViewTexts views_of(const EventSummary& s) {
    ViewTexts v;
    v.full = s.summary;
    v.strct = s.structure;
    if (!s.participants.empty() || !s.attributes.empty()) {
        v.sent_ok = true;
        v.sent = view(s, ViewKind::Sent);
    }
    return v;
}

// trace cache + upstream-gradient accumulation keyed by text
struct EncodeWorkspace {
    explicit EncodeWorkspace(const EncoderModel& m) : model(m) {}

    const EncoderModel& model;
    std::unordered_map<std::string, EncodeTrace> traces;
    std::unordered_map<std::string, std::vector<double>> up_grads;
    bool want_grads = false;

    const EncodeTrace& trace(const std::string& text) {
        auto it = traces.find(text);
        if (it != traces.end()) return it->second;
        return traces.emplace(text, encode_trace(model, text)).first->second;
    }

    void add_grad(const std::string& text, const std::vector<double>& grad, double weight) {
        if (!want_grads) return;
        auto& slot = up_grads[text];
        if (slot.empty()) slot.assign(model.embed_dim, 0.0);
        for (size_t j = 0; j < grad.size(); ++j) slot[j] += weight * grad[j];
    }

    void flush(GradientBuffer& grads) {
        for (const auto& [text, up] : up_grads) {
            accumulate_embedding_grad(model, traces.at(text), up, grads);
        }
    }
};

// InfoNCE on one (claim, positive, negatives) triple of texts; optionally
// pushes d(loss)/d(embedding) * weight into the workspace
double nce_on_texts(EncodeWorkspace& ws, const std::string& claim_text,
                    const std::string& positive_text, const std::vector<const std::string*>& negatives,
                    double tau, double grad_weight) {
    const auto& claim_trace = ws.trace(claim_text);
    const auto& pos_trace = ws.trace(positive_text);
    double sim_pos = cosine(claim_trace.embedding, pos_trace.embedding);
    std::vector<double> sims(negatives.size());
    for (size_t n = 0; n < negatives.size(); ++n) {
        sims[n] = cosine(claim_trace.embedding, ws.trace(*negatives[n]).embedding);
    }
    double loss = info_nce(sim_pos, sims, tau);
    if (!ws.want_grads || grad_weight == 0.0 || negatives.empty()) return loss;

    // softmax over {pos} + negatives at temperature tau
    double max_logit = sim_pos / tau;
    for (double s : sims) max_logit = std::max(max_logit, s / tau);
    double z = std::exp(sim_pos / tau - max_logit);
    std::vector<double> expd(negatives.size());
    for (size_t n = 0; n < sims.size(); ++n) {
        expd[n] = std::exp(sims[n] / tau - max_logit);
        z += expd[n];
    }
    const auto& e_c = claim_trace.embedding;
    const uint32_t d = static_cast<uint32_t>(e_c.size());

    std::vector<double> claim_up(d, 0.0);
    double g_pos = (std::exp(sim_pos / tau - max_logit) / z - 1.0) / tau;
    const auto& e_p = pos_trace.embedding;
    std::vector<double> pos_up(d);
    for (uint32_t j = 0; j < d; ++j) {
        pos_up[j] = g_pos * e_c[j];
        claim_up[j] += g_pos * e_p[j];
    }
    ws.add_grad(positive_text, pos_up, grad_weight);
    for (size_t n = 0; n < negatives.size(); ++n) {
        double g_n = (expd[n] / z) / tau;
        const auto& e_n = ws.trace(*negatives[n]).embedding;
        std::vector<double> neg_up(d);
        for (uint32_t j = 0; j < d; ++j) {
            neg_up[j] = g_n * e_c[j];
            claim_up[j] += g_n * e_n[j];
        }
        ws.add_grad(*negatives[n], neg_up, grad_weight);
    }
    ws.add_grad(claim_text, claim_up, grad_weight);
    return loss;
}

} // namespace

double view_loss(const EncoderModel& model, const ContrastiveExample& example, ViewKind kind,
                 double tau, GradientBuffer* grads) {
    EncodeWorkspace ws{model};
    ws.want_grads = grads != nullptr;
    auto claim_views = views_of(*example.claim);
    auto pos_views = views_of(*example.positive);
    auto pick = [&](const ViewTexts& v) -> const std::string& {
        switch (kind) {
            case ViewKind::Full: return v.full;
            case ViewKind::Sent: return v.sent;
            case ViewKind::Struct: return v.strct;
        }
        return v.full;
    };
    if (kind == ViewKind::Sent && (!claim_views.sent_ok || !pos_views.sent_ok)) return 0.0;
    std::vector<ViewTexts> neg_views;
    neg_views.reserve(example.negatives.size());
    for (const auto* neg : example.negatives) neg_views.push_back(views_of(*neg));
    std::vector<const std::string*> negs;
    for (const auto& nv : neg_views) {
        if (kind == ViewKind::Sent && !nv.sent_ok) continue;
        negs.push_back(&pick(nv));
    }
    double loss = nce_on_texts(ws, pick(claim_views), pick(pos_views), negs, tau, 1.0);
    if (grads) ws.flush(*grads);
    return loss;
}

LossBreakdown batch_loss(const EncoderModel& model, const std::vector<ContrastiveExample>& batch,
                         double tau, double beta, GradientBuffer* grads) {
    LossBreakdown out;
    if (batch.empty()) return out;
    EncodeWorkspace ws{model};
    ws.want_grads = grads != nullptr;
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    for (const auto& example : batch) {
        auto claim_views = views_of(*example.claim);
        auto pos_views = views_of(*example.positive);
        std::vector<ViewTexts> neg_views;
        neg_views.reserve(example.negatives.size());
        for (const auto* neg : example.negatives) neg_views.push_back(views_of(*neg));

        {
            std::vector<const std::string*> negs;
            negs.reserve(neg_views.size());
            for (const auto& nv : neg_views) negs.push_back(&nv.full);
            out.full += inv_b *
                        nce_on_texts(ws, claim_views.full, pos_views.full, negs, tau, inv_b);
        }
        if (claim_views.sent_ok && pos_views.sent_ok) {
            std::vector<const std::string*> negs;
            for (const auto& nv : neg_views) {
                if (nv.sent_ok) negs.push_back(&nv.sent);
            }
            out.sent += inv_b *
                        nce_on_texts(ws, claim_views.sent, pos_views.sent, negs, tau, beta * inv_b);
        } else {
            ++out.sent_skipped;
        }
        if (beta < 1.0) {
            std::vector<const std::string*> negs;
            negs.reserve(neg_views.size());
            for (const auto& nv : neg_views) negs.push_back(&nv.strct);
            out.strct += inv_b * nce_on_texts(ws, claim_views.strct, pos_views.strct, negs, tau,
                                              (1.0 - beta) * inv_b);
        }
    }

    out.unit = loss_unit(out.sent, out.strct, beta);
    out.total = total_loss(out.full, out.unit);
    if (grads) ws.flush(*grads);
    return out;
}

double batch_margin(const EncoderModel& model, const std::vector<ContrastiveExample>& batch) {
    EncodeWorkspace ws{model};
    std::vector<std::pair<double, std::vector<double>>> sims;
    sims.reserve(batch.size());
    for (const auto& example : batch) {
        const auto& e_c = ws.trace(example.claim->summary).embedding;
        double sim_pos = cosine(e_c, ws.trace(example.positive->summary).embedding);
        std::vector<double> neg_sims;
        neg_sims.reserve(example.negatives.size());
        for (const auto* neg : example.negatives) {
            neg_sims.push_back(cosine(e_c, ws.trace(neg->summary).embedding));
        }
        sims.emplace_back(sim_pos, std::move(neg_sims));
    }
    return margin_from_sims(sims);
}

void TrainConfig::validate() const {
    if (epochs < 1) raise(ErrorCode::ConfigError, "epochs must be >= 1");
    if (batch_size < 1) raise(ErrorCode::ConfigError, "batch_size must be >= 1");
    if (learning_rate <= 0) raise(ErrorCode::ConfigError, "learning_rate must be > 0");
    if (temperature <= 0) raise(ErrorCode::ConfigError, "temperature must be > 0");
    if (negatives_per_claim < 2) raise(ErrorCode::ConfigError, "negatives_per_claim must be >= 2");
    if (tau_s <= 0) raise(ErrorCode::ConfigError, "tau_s must be > 0");
    if (delta_min >= delta_max) raise(ErrorCode::ConfigError, "delta_min must be < delta_max");
    if (eval_interval < 1) raise(ErrorCode::ConfigError, "eval_interval must be >= 1");
    if (hard_interval < 1) raise(ErrorCode::ConfigError, "hard_interval must be >= 1");
    if (mined_per_claim < 1) raise(ErrorCode::ConfigError, "mined_per_claim must be >= 1");
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

} // namespace

std::string curve_csv_header() {
    return "step,delta_t,ema_delta,acc_val,delta_mid,p_dyn,beta,n_rand,n_tb,n_model,"
           "loss_full,loss_sent,loss_struct,loss_unit,loss_total";
}

std::string curve_csv_row(const CurvePoint& p) {
    std::string row = std::to_string(p.step);
    for (double v : {p.delta_t, p.ema_delta, p.acc_val, p.delta_mid, p.p_dyn, p.beta}) {
        row += ',';
        row += fmt_double(v);
    }
    for (size_t v : {p.n_rand, p.n_tb, p.n_model}) {
        row += ',';
        row += std::to_string(v);
    }
    for (double v : {p.loss_full, p.loss_sent, p.loss_struct, p.loss_unit, p.loss_total}) {
        row += ',';
        row += fmt_double(v);
    }
    return row;
}

void write_curves(const std::string& path, const std::vector<CurvePoint>& curve) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot write curves to " + path);
    out << curve_csv_header() << "\n";
    for (const auto& point : curve) out << curve_csv_row(point) << "\n";
}

std::vector<CurvePoint> read_curves(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot read curves from " + path);
    std::string line;
    if (!std::getline(in, line) || line != curve_csv_header())
        raise(ErrorCode::ParseError, "curves file missing the expected header: " + path);
    std::vector<CurvePoint> curve;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 15)
            raise(ErrorCode::ParseError,
                  path + ":" + std::to_string(line_no) + ": expected 15 columns");
        CurvePoint p;
        try {
            p.step = std::stoull(cells[0]);
            p.delta_t = std::stod(cells[1]);
            p.ema_delta = std::stod(cells[2]);
            p.acc_val = std::stod(cells[3]);
            p.delta_mid = std::stod(cells[4]);
            p.p_dyn = std::stod(cells[5]);
            p.beta = std::stod(cells[6]);
            p.n_rand = std::stoull(cells[7]);
            p.n_tb = std::stoull(cells[8]);
            p.n_model = std::stoull(cells[9]);
            p.loss_full = std::stod(cells[10]);
            p.loss_sent = std::stod(cells[11]);
            p.loss_struct = std::stod(cells[12]);
            p.loss_unit = std::stod(cells[13]);
            p.loss_total = std::stod(cells[14]);
        } catch (const std::exception&) {
            raise(ErrorCode::ParseError, path + ":" + std::to_string(line_no) + ": bad cell");
        }
        curve.push_back(p);
    }
    return curve;
}

namespace {

void save_mined_pool(const std::string& path,
                     const std::map<std::string, std::vector<std::string>>& mined) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [claim_id, ids] : mined) j[claim_id] = ids;
    std::ofstream out(path, std::ios::binary);
    out << j.dump() << "\n";
}

std::map<std::string, std::vector<std::string>> load_mined_pool(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        raise(ErrorCode::ParseError, "mined-pool snapshot is not valid JSON: " + path);
    std::map<std::string, std::vector<std::string>> mined;
    for (const auto& [claim_id, ids] : j.items())
        mined[claim_id] = ids.get<std::vector<std::string>>();
    return mined;
}

TrainResult train_loop(EncoderModel model, const TrainConfig& config, const Dataset& dataset,
                       NegativePools pools, SchedulerState st, uint64_t start_step,
                       const std::optional<std::string>& checkpoint_dir) {
    config.validate();
    if (pools.total_per_claim != config.negatives_per_claim)
        pools.total_per_claim = config.negatives_per_claim;

    std::vector<std::string> train_ids;
    for (const auto& id : dataset.splits.train) {
        if (dataset.qrels.relevant.count(id)) train_ids.push_back(id);
    }
    if (train_ids.empty()) raise(ErrorCode::ConfigError, "no training claims with gold evidence");
    std::vector<std::string> val_ids;
    for (const auto& id : dataset.splits.validation) {
        if (dataset.qrels.relevant.count(id)) val_ids.push_back(id);
    }

    // fail on missing summaries before any work happens
    for (const auto& id : train_ids) dataset.claim_summary(id);
    for (const auto& id : val_ids) dataset.claim_summary(id);
    for (const auto& doc : dataset.corpus) dataset.evidence_summary(doc.id);

    if (config.random_negatives_only) {
        pools.d_tb.clear();
        pools.d_model.clear();
    }

    const size_t batch_size = static_cast<size_t>(config.batch_size);
    const uint64_t steps_per_epoch = (train_ids.size() + batch_size - 1) / batch_size;
    const uint64_t total_steps = static_cast<uint64_t>(config.epochs) * steps_per_epoch;

    std::vector<CurvePoint> curve;
    curve.reserve(total_steps - start_step);

    if (checkpoint_dir) std::filesystem::create_directories(*checkpoint_dir);

    auto save_snapshot = [&](const EncoderModel& m, const SchedulerState& state) {
        if (!checkpoint_dir) return;
        m.save(*checkpoint_dir + "/encoder.ckpt");
        std::ofstream snap(*checkpoint_dir + "/scheduler.json", std::ios::binary);
        snap << state.serialize() << "\n";
        save_mined_pool(*checkpoint_dir + "/mined.json", pools.d_model);
    };

    auto build_examples = [&](const std::vector<std::string>& ids,
                              const std::vector<std::vector<std::string>>& neg_ids) {
        std::vector<ContrastiveExample> batch(ids.size());
        for (size_t i = 0; i < ids.size(); ++i) {
            const auto& gold = dataset.qrels.relevant.at(ids[i]);
            batch[i].claim = &dataset.claim_summary(ids[i]);
            batch[i].positive = &dataset.evidence_summary(*gold.begin());
            batch[i].negatives.reserve(neg_ids[i].size());
            for (const auto& neg : neg_ids[i])
                batch[i].negatives.push_back(&dataset.evidence_summary(neg));
        }
        return batch;
    };

    // epoch orders are derived from (seed, epoch), so any step can be resumed
    std::vector<std::string> order;
    uint64_t order_epoch = std::numeric_limits<uint64_t>::max();
    for (uint64_t step = start_step + 1; step <= total_steps; ++step) {
        uint64_t epoch = (step - 1) / steps_per_epoch;
        if (epoch != order_epoch) {
            order = train_ids;
            Rng epoch_rng = Rng::for_stream(config.rng_seed, "epoch-order", epoch);
            epoch_rng.shuffle(order);
            order_epoch = epoch;
        }
        size_t start = static_cast<size_t>((step - 1) % steps_per_epoch) * batch_size;
        std::vector<std::string> ids(order.begin() + start,
                                     order.begin() + std::min(start + batch_size, order.size()));

        // margin probe with the pre-update ratio
        Rng probe_rng = Rng::for_stream(config.rng_seed, "probe-negatives", step);
        std::vector<std::vector<std::string>> probe_negs(ids.size());
        for (size_t i = 0; i < ids.size(); ++i) {
            probe_negs[i] = allocate_negatives(pools, ids[i], dataset.qrels.relevant.at(ids[i]),
                                               st.p_dyn, probe_rng);
        }
        double delta_t = batch_margin(model, build_examples(ids, probe_negs));

        st.ema_margin = update_ema(st.ema_margin, delta_t);
        if (step % config.eval_interval == 0)
            st.acc_val = top1_retrieval_accuracy(model, val_ids, dataset);
        st.refresh();
        st.step = step;
        const double beta = config.freeze_beta_semantic ? 1.0 : st.beta;

        Rng train_rng = Rng::for_stream(config.rng_seed, "train-negatives", step);
        std::vector<std::vector<std::string>> train_negs(ids.size());
        AllocationCounts counts;
        for (size_t i = 0; i < ids.size(); ++i) {
            AllocationCounts c;
            train_negs[i] = allocate_negatives(pools, ids[i], dataset.qrels.relevant.at(ids[i]),
                                               st.p_dyn, train_rng, &c);
            if (i == 0) counts = c;
        }
        auto batch = build_examples(ids, train_negs);

        GradientBuffer grads = GradientBuffer::zeros(model);
        LossBreakdown losses = batch_loss(model, batch, config.temperature, beta, &grads);
        if (!std::isfinite(losses.total))
            raise(ErrorCode::NumericalError, "non-finite loss at step " + std::to_string(step));
        sgd_step(model, grads, config.learning_rate);

        if (step % config.hard_interval == 0 && !config.random_negatives_only) {
            pools.d_model = mine_hard_negatives(model, train_ids, dataset, config.mined_per_claim);
        }

        if (step % config.eval_interval == 0) save_snapshot(model, st);

        CurvePoint point;
        point.step = step;
        point.delta_t = delta_t;
        point.ema_delta = st.ema_margin;
        point.acc_val = st.acc_val;
        point.delta_mid = st.delta_mid;
        point.p_dyn = st.p_dyn;
        point.beta = beta;
        point.n_rand = counts.n_rand;
        point.n_tb = counts.n_tb;
        point.n_model = counts.n_model;
        point.loss_full = losses.full;
        point.loss_sent = losses.sent;
        point.loss_struct = losses.strct;
        point.loss_unit = losses.unit;
        point.loss_total = losses.total;
        curve.push_back(point);
    }

    save_snapshot(model, st);
    return {std::move(model), std::move(curve), st};
}

} // namespace

TrainResult train(EncoderModel model, const TrainConfig& config, const Dataset& dataset,
                  NegativePools pools, const std::optional<std::string>& checkpoint_dir) {
    SchedulerState st;
    st.tau_s = config.tau_s;
    st.delta_min = config.delta_min;
    st.delta_max = config.delta_max;
    st.ema_margin = 0.0;
    st.acc_val = 0.0;
    st.refresh(); // initial p_dyn follows directly from ema = 0
    return train_loop(std::move(model), config, dataset, std::move(pools), st, 0, checkpoint_dir);
}

TrainResult train_resume(const std::string& checkpoint_dir, const TrainConfig& config,
                         const Dataset& dataset, NegativePools pools) {
    EncoderModel model = EncoderModel::load(checkpoint_dir + "/encoder.ckpt");
    std::ifstream snap(checkpoint_dir + "/scheduler.json", std::ios::binary);
    if (!snap) raise(ErrorCode::IoError, "no scheduler snapshot in " + checkpoint_dir);
    std::ostringstream buf;
    buf << snap.rdbuf();
    SchedulerState st = SchedulerState::deserialize(buf.str());
    if (st.tau_s != config.tau_s || st.delta_min != config.delta_min ||
        st.delta_max != config.delta_max)
        raise(ErrorCode::ConfigError, "scheduler snapshot disagrees with the config schedule");
    pools.d_model = load_mined_pool(checkpoint_dir + "/mined.json");
    return train_loop(std::move(model), config, dataset, std::move(pools), st, st.step,
                      checkpoint_dir);
}

NegativePools build_negative_pools(const Dataset& dataset, size_t k, size_t preselect_pages,
                                   size_t preselect_per_doc, const Bm25Params& bm25) {
    NegativePools pools;
    pools.total_per_claim = k;
    for (const auto& doc : dataset.corpus) pools.d_rand.push_back(doc.id);

    std::vector<std::pair<std::string, std::string>> page_docs;
    page_docs.reserve(dataset.page_map.size());
    for (const auto& [page_id, evidence_ids] : dataset.page_map) {
        std::string text;
        for (const auto& id : evidence_ids) {
            if (!text.empty()) text += ' ';
            text += dataset.evidence(id).raw_text;
        }
        page_docs.emplace_back(page_id, std::move(text));
    }
    SparseIndex page_index = SparseIndex::build_from_texts(page_docs, bm25);
    SparseIndex evidence_index = SparseIndex::build(dataset.corpus, IndexField::Raw, bm25);

    for (const auto& [claim_id, gold] : dataset.qrels.relevant) {
        auto candidates = preselect(page_index, evidence_index, dataset.page_map,
                                    dataset.claim(claim_id), preselect_pages, preselect_per_doc);
        std::vector<std::string> negatives;
        negatives.reserve(candidates.size());
        for (const auto& id : candidates) {
            if (!gold.count(id)) negatives.push_back(id);
        }
        pools.d_tb[claim_id] = std::move(negatives);
    }
    return pools;
}

} // namespace daclr
