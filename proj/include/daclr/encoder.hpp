#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "daclr/rng.hpp"

namespace daclr {

using Embedding = std::vector<double>; // unit L2 norm after encode

// Hashed bag-of-words-and-bigrams encoder: L1-normalized feature counts,
// linear projection, tanh, L2 normalization. The cross-scorer shares the body
// and applies an affine head to the embedding of "claim [SEP] evidence".
struct EncoderModel {
    uint32_t hash_dim = 1u << 15; // H
    uint32_t embed_dim = 64;      // d
    uint64_t rng_seed = 0;
    std::vector<double> projection; // H x d, row-major
    std::vector<double> head_weights; // d
    double head_bias = 0.0;

    double& proj_at(uint32_t bucket, uint32_t j) { return projection[size_t(bucket) * embed_dim + j]; }
    double proj_at(uint32_t bucket, uint32_t j) const {
        return projection[size_t(bucket) * embed_dim + j];
    }

    static EncoderModel init(uint32_t hash_dim, uint32_t embed_dim, uint64_t seed);

    void save(const std::string& path) const;
    static EncoderModel load(const std::string& path);
    std::string serialize() const;
    static EncoderModel deserialize(const std::string& bytes);
    // FNV over the serialized bytes; ties dense indexes to the model that built them
    std::string fingerprint() const;
};

// token + adjacent-bigram counts hashed into H buckets (FNV-1a), sorted by bucket
std::vector<std::pair<uint32_t, double>> featurize(const std::string& text, uint32_t hash_dim);

Embedding encode(const EncoderModel& model, const std::string& text);

double cosine(const Embedding& u, const Embedding& v);

inline constexpr const char* kSepToken = " [SEP] ";

double cross_score(const EncoderModel& model, const std::string& claim_text,
                   const std::string& evidence_text);

// Everything the backward pass needs about one encoded text.
struct EncodeTrace {
    std::vector<std::pair<uint32_t, double>> features; // L1-normalized
    std::vector<double> pre_activation;                // z = W^T x
    std::vector<double> activation;                    // a = tanh(z)
    double activation_norm = 0.0;                      // ||a||
    Embedding embedding;                               // e = a / ||a|| (or e1 fallback)
    bool degenerate = false;                           // zero features or zero ||a||
};

EncodeTrace encode_trace(const EncoderModel& model, const std::string& text);

struct GradientBuffer {
    std::vector<double> projection; // same layout as model.projection
    std::vector<double> head_weights;
    double head_bias = 0.0;

    static GradientBuffer zeros(const EncoderModel& model);
    void scale(double factor);
    void add_scaled(const GradientBuffer& other, double factor);
    double max_abs() const;
};

// Accumulates d(loss)/d(projection) for one text given d(loss)/d(embedding).
// Degenerate traces contribute nothing (the fallback embedding is constant).
void accumulate_embedding_grad(const EncoderModel& model, const EncodeTrace& trace,
                               const std::vector<double>& embedding_grad, GradientBuffer& grads);

// Applies one plain SGD step: params -= learning_rate * grads.
// Throws NumericalError (naming the block) on non-finite gradients.
void sgd_step(EncoderModel& model, const GradientBuffer& grads, double learning_rate);

} // namespace daclr
