#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "daclr/dataset.hpp"
#include "daclr/encoder.hpp"
#include "daclr/sparse_index.hpp"

namespace daclr {

// InfoNCE over a positive similarity and a set of negative similarities,
// stabilized by max subtraction. An empty negative set is degenerate and
// scores 0.
double info_nce(double sim_pos, const std::vector<double>& sims_neg, double tau);

double loss_unit(double l_sent, double l_struct, double beta);
double total_loss(double l_full, double l_unit);

// mean over claims of (positive similarity - mean negative similarity)
double margin_from_sims(const std::vector<std::pair<double, std::vector<double>>>& batch_sims);

// EMA with the fixed 0.9 / 0.1 smoothing
double update_ema(double ema_prev, double margin_t);

// affine calibration of the sigmoid midpoint from validation accuracy;
// acc_val outside [0, 1] is clamped with a warning on stderr
double compute_mid(double acc_val, double delta_min, double delta_max);

// p_dyn = sigmoid((ema - mid) / tau_s), beta = 1 - p_dyn
std::pair<double, double> schedule(double ema_margin, double delta_mid, double tau_s);

struct SchedulerState {
    double ema_margin = 0.0; // updated only through update_ema
    double acc_val = 0.0;
    double delta_mid = 0.0;
    double p_dyn = 0.5;
    double beta = 0.5;
    uint64_t step = 0;
    double tau_s = 0.05;
    double delta_min = 0.42;
    double delta_max = 0.62;

    void refresh(); // recompute delta_mid, p_dyn, beta from current fields

    std::string serialize() const;
    static SchedulerState deserialize(const std::string& json_text);
};

// The three negative-sample sources: a shared random pool, precomputed sparse
// (TF-IDF/BM25) near misses per claim, and model-mined hard negatives per claim.
struct NegativePools {
    std::vector<std::string> d_rand;
    std::map<std::string, std::vector<std::string>> d_tb;
    std::map<std::string, std::vector<std::string>> d_model; // similarity-descending
    size_t total_per_claim = 16;                             // K
};

struct AllocationCounts {
    size_t n_rand = 0;
    size_t n_tb = 0;
    size_t n_model = 0;
};

// floor(K * p_dyn) hard negatives from the head of d_model, the rest split
// evenly between d_rand (seeded draw) and d_tb (head), odd remainder to d_tb;
// gold ids and duplicates excluded, shortfalls backfilled from d_rand first.
std::vector<std::string> allocate_negatives(const NegativePools& pools, const std::string& claim_id,
                                            const std::set<std::string>& gold_ids, double p_dyn,
                                            Rng& rng, AllocationCounts* counts = nullptr);

// top-m non-gold evidence per claim by current Full-view cosine
std::map<std::string, std::vector<std::string>> mine_hard_negatives(
    const EncoderModel& model, const std::vector<std::string>& claim_ids, const Dataset& dataset,
    size_t m);

// fraction of claims whose best-cosine corpus document is gold
double top1_retrieval_accuracy(const EncoderModel& model, const std::vector<std::string>& claim_ids,
                               const Dataset& dataset);

struct ContrastiveExample {
    const EventSummary* claim = nullptr;
    const EventSummary* positive = nullptr;
    std::vector<const EventSummary*> negatives;
};

struct LossBreakdown {
    double full = 0.0;
    double sent = 0.0;
    double strct = 0.0;
    double unit = 0.0;
    double total = 0.0;
    size_t sent_skipped = 0; // items whose Sent view was empty and contributed 0
};

// per-view InfoNCE for one example (the loss_full / loss_sent / loss_struct
// operations); Sent views that are empty contribute 0. When grads is non-null
// the analytic gradient of the returned value is accumulated into it.
double view_loss(const EncoderModel& model, const ContrastiveExample& example, ViewKind kind,
                 double tau, GradientBuffer* grads = nullptr);

// batch mean of all three view losses combined with the current beta; when
// grads is non-null the exact analytic gradient of the returned total is
// accumulated into it
LossBreakdown batch_loss(const EncoderModel& model, const std::vector<ContrastiveExample>& batch,
                         double tau, double beta, GradientBuffer* grads = nullptr);

double batch_margin(const EncoderModel& model, const std::vector<ContrastiveExample>& batch);

struct TrainConfig {
    int epochs = 40;
    int batch_size = 32;
    double learning_rate = 150.0; // calibrated for this hashed tanh encoder;
                                  // transformer-backbone settings (1e-5) do not
                                  // transfer to its gradient scale
    double temperature = 0.05;    // tau of the InfoNCE losses
    size_t negatives_per_claim = 16; // K
    double tau_s = 0.05;             // sigmoid steepness of the schedule
    double delta_min = 0.42;         // sigmoid midpoint band; margins of this
    double delta_max = 0.62;         // encoder settle around 0.45-0.50
    uint64_t eval_interval = 20; // U_eval, steps between validation evals
    uint64_t hard_interval = 20; // U_hard, steps between hard-negative refreshes
    size_t mined_per_claim = 32; // m
    uint64_t rng_seed = 1;

    // ablation switches
    bool freeze_beta_semantic = false;  // beta pinned to 1, struct loss disabled
    bool random_negatives_only = false; // ignore d_tb/d_model, no mining

    void validate() const;
};

struct CurvePoint {
    uint64_t step = 0;
    double delta_t = 0.0;
    double ema_delta = 0.0;
    double acc_val = 0.0;
    double delta_mid = 0.0;
    double p_dyn = 0.0;
    double beta = 0.0;
    size_t n_rand = 0;
    size_t n_tb = 0;
    size_t n_model = 0;
    double loss_full = 0.0;
    double loss_sent = 0.0;
    double loss_struct = 0.0;
    double loss_unit = 0.0;
    double loss_total = 0.0;
};

std::string curve_csv_header();
std::string curve_csv_row(const CurvePoint& point);
void write_curves(const std::string& path, const std::vector<CurvePoint>& curve);
std::vector<CurvePoint> read_curves(const std::string& path);

struct TrainResult {
    EncoderModel model;
    std::vector<CurvePoint> curve;
    SchedulerState scheduler;
};

// Runs the adaptive training loop: per step, probe-sample negatives with the
// current ratio to measure the batch margin, smooth it, refresh acc_val every
// eval_interval steps, recompute (p_dyn, beta), sample the training negatives,
// take one SGD step, and refresh the mined pool every hard_interval steps.
// Fully deterministic for a given config. When checkpoint_dir is set the
// encoder and scheduler state are snapshotted every eval_interval steps.
TrainResult train(EncoderModel initial_model, const TrainConfig& config, const Dataset& dataset,
                  NegativePools pools, const std::optional<std::string>& checkpoint_dir = std::nullopt);

// Continues a run from the snapshot a previous train() left in checkpoint_dir
// (encoder, scheduler state, mined pool). The continuation is bit-identical to
// a run that never stopped, because per-step randomness derives from
// (seed, step) alone.
TrainResult train_resume(const std::string& checkpoint_dir, const TrainConfig& config,
                         const Dataset& dataset, NegativePools pools);

// d_tb via sparse preselection and d_rand as the whole corpus; d_model starts empty
NegativePools build_negative_pools(const Dataset& dataset, size_t k, size_t preselect_pages,
                                   size_t preselect_per_doc, const Bm25Params& bm25);

} // namespace daclr
