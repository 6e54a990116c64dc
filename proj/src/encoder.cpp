#include "daclr/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "daclr/errors.hpp"
#include "daclr/sparse_index.hpp"

namespace daclr {

namespace {

double gaussian(Rng& rng) {
    // Box-Muller; u1 kept away from 0
    double u1 = rng.next_unit();
    double u2 = rng.next_unit();
    u1 = std::max(u1, 1e-300);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

} // namespace

EncoderModel EncoderModel::init(uint32_t hash_dim, uint32_t embed_dim, uint64_t seed) {
    if (embed_dim < 2) raise(ErrorCode::ConfigError, "embed_dim must be >= 2");
    if (hash_dim < embed_dim) raise(ErrorCode::ConfigError, "hash_dim must be >= embed_dim");
    EncoderModel model;
    model.hash_dim = hash_dim;
    model.embed_dim = embed_dim;
    model.rng_seed = seed;
    model.projection.resize(size_t(hash_dim) * embed_dim);
    Rng proj_rng = Rng::for_stream(seed, "encoder-projection");
    for (auto& w : model.projection) w = gaussian(proj_rng);
    Rng head_rng = Rng::for_stream(seed, "encoder-head");
    model.head_weights.resize(embed_dim);
    double scale = 1.0 / std::sqrt(static_cast<double>(embed_dim));
    for (auto& w : model.head_weights) w = scale * gaussian(head_rng);
    model.head_bias = 0.0;
    return model;
}

std::vector<std::pair<uint32_t, double>> featurize(const std::string& text, uint32_t hash_dim) {
    std::map<uint32_t, double> buckets;
    auto tokens = tokenize(text);
    for (const auto& token : tokens) {
        buckets[static_cast<uint32_t>(fnv1a64(token) % hash_dim)] += 1.0;
    }
    for (size_t i = 0; i + 1 < tokens.size(); ++i) {
        std::string bigram = tokens[i] + "_" + tokens[i + 1];
        buckets[static_cast<uint32_t>(fnv1a64(bigram) % hash_dim)] += 1.0;
    }
    return {buckets.begin(), buckets.end()};
}

EncodeTrace encode_trace(const EncoderModel& model, const std::string& text) {
    EncodeTrace trace;
    trace.features = featurize(text, model.hash_dim);

    double total = 0.0;
    for (const auto& [bucket, count] : trace.features) total += count;
    if (total == 0.0) {
        trace.degenerate = true;
        trace.embedding.assign(model.embed_dim, 0.0);
        trace.embedding[0] = 1.0; // fixed basis vector for the all-zero feature
        return trace;
    }
    for (auto& [bucket, count] : trace.features) count /= total;

    const uint32_t d = model.embed_dim;
    trace.pre_activation.assign(d, 0.0);
    for (const auto& [bucket, value] : trace.features) {
        const double* row = &model.projection[size_t(bucket) * d];
        for (uint32_t j = 0; j < d; ++j) trace.pre_activation[j] += value * row[j];
    }
    trace.activation.resize(d);
    double norm_sq = 0.0;
    for (uint32_t j = 0; j < d; ++j) {
        trace.activation[j] = std::tanh(trace.pre_activation[j]);
        norm_sq += trace.activation[j] * trace.activation[j];
    }
    trace.activation_norm = std::sqrt(norm_sq);
    if (trace.activation_norm == 0.0) {
        trace.degenerate = true;
        trace.embedding.assign(d, 0.0);
        trace.embedding[0] = 1.0;
        return trace;
    }
    trace.embedding.resize(d);
    for (uint32_t j = 0; j < d; ++j) trace.embedding[j] = trace.activation[j] / trace.activation_norm;
    return trace;
}

Embedding encode(const EncoderModel& model, const std::string& text) {
    return encode_trace(model, text).embedding;
}

double cosine(const Embedding& u, const Embedding& v) {
    double dot = 0.0;
    for (size_t j = 0; j < u.size(); ++j) dot += u[j] * v[j];
    return dot;
}

double cross_score(const EncoderModel& model, const std::string& claim_text,
                   const std::string& evidence_text) {
    Embedding joint = encode(model, claim_text + kSepToken + evidence_text);
    double score = model.head_bias;
    for (uint32_t j = 0; j < model.embed_dim; ++j) score += model.head_weights[j] * joint[j];
    return score;
}

GradientBuffer GradientBuffer::zeros(const EncoderModel& model) {
    GradientBuffer grads;
    grads.projection.assign(model.projection.size(), 0.0);
    grads.head_weights.assign(model.embed_dim, 0.0);
    grads.head_bias = 0.0;
    return grads;
}

void GradientBuffer::scale(double factor) {
    for (auto& g : projection) g *= factor;
    for (auto& g : head_weights) g *= factor;
    head_bias *= factor;
}

void GradientBuffer::add_scaled(const GradientBuffer& other, double factor) {
    for (size_t i = 0; i < projection.size(); ++i) projection[i] += factor * other.projection[i];
    for (size_t i = 0; i < head_weights.size(); ++i) head_weights[i] += factor * other.head_weights[i];
    head_bias += factor * other.head_bias;
}

double GradientBuffer::max_abs() const {
    double m = std::abs(head_bias);
    for (double g : projection) m = std::max(m, std::abs(g));
    for (double g : head_weights) m = std::max(m, std::abs(g));
    return m;
}

void accumulate_embedding_grad(const EncoderModel& model, const EncodeTrace& trace,
                               const std::vector<double>& embedding_grad, GradientBuffer& grads) {
    if (trace.degenerate) return;
    const uint32_t d = model.embed_dim;

    // through e = a/||a||: g_a = (g_e - (g_e . e) e) / ||a||
    double dot = 0.0;
    for (uint32_t j = 0; j < d; ++j) dot += embedding_grad[j] * trace.embedding[j];
    std::vector<double> pre_grad(d);
    for (uint32_t j = 0; j < d; ++j) {
        double g_a = (embedding_grad[j] - dot * trace.embedding[j]) / trace.activation_norm;
        // through tanh: g_z = g_a * (1 - a^2)
        pre_grad[j] = g_a * (1.0 - trace.activation[j] * trace.activation[j]);
    }
    // through z = W^T x: dW[i][j] += x_i * g_z[j], x sparse
    for (const auto& [bucket, value] : trace.features) {
        double* row = &grads.projection[size_t(bucket) * d];
        for (uint32_t j = 0; j < d; ++j) row[j] += value * pre_grad[j];
    }
}

void sgd_step(EncoderModel& model, const GradientBuffer& grads, double learning_rate) {
    for (double g : grads.projection) {
        if (!std::isfinite(g))
            raise(ErrorCode::NumericalError, "non-finite gradient in projection block");
    }
    for (double g : grads.head_weights) {
        if (!std::isfinite(g))
            raise(ErrorCode::NumericalError, "non-finite gradient in score_head block");
    }
    if (!std::isfinite(grads.head_bias))
        raise(ErrorCode::NumericalError, "non-finite gradient in score_head block");

    for (size_t i = 0; i < model.projection.size(); ++i)
        model.projection[i] -= learning_rate * grads.projection[i];
    for (size_t i = 0; i < model.head_weights.size(); ++i)
        model.head_weights[i] -= learning_rate * grads.head_weights[i];
    model.head_bias -= learning_rate * grads.head_bias;
}

namespace {

constexpr char kCheckpointMagic[8] = {'D', 'A', 'C', 'L', 'R', 'C', 'K', '1'};

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t get_u64(const std::string& in, size_t& pos) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

void put_f64(std::string& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

double get_f64(const std::string& in, size_t& pos) {
    uint64_t bits = get_u64(in, pos);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace

std::string EncoderModel::serialize() const {
    std::string out;
    out.append(kCheckpointMagic, 8);
    put_u64(out, hash_dim);
    put_u64(out, embed_dim);
    put_u64(out, rng_seed);
    for (double w : projection) put_f64(out, w);
    for (double w : head_weights) put_f64(out, w);
    put_f64(out, head_bias);
    return out;
}

EncoderModel EncoderModel::deserialize(const std::string& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
        raise(ErrorCode::ParseError, "not a daclr encoder checkpoint");
    size_t pos = 8;
    EncoderModel model;
    model.hash_dim = static_cast<uint32_t>(get_u64(bytes, pos));
    model.embed_dim = static_cast<uint32_t>(get_u64(bytes, pos));
    model.rng_seed = get_u64(bytes, pos);
    size_t expected = pos + 8 * (size_t(model.hash_dim) * model.embed_dim + model.embed_dim + 1);
    if (bytes.size() != expected) raise(ErrorCode::ParseError, "truncated encoder checkpoint");
    model.projection.resize(size_t(model.hash_dim) * model.embed_dim);
    for (auto& w : model.projection) w = get_f64(bytes, pos);
    model.head_weights.resize(model.embed_dim);
    for (auto& w : model.head_weights) w = get_f64(bytes, pos);
    model.head_bias = get_f64(bytes, pos);
    return model;
}

void EncoderModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorCode::IoError, "cannot write checkpoint to " + path);
    std::string bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

EncoderModel EncoderModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::IoError, "cannot read checkpoint from " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize(buf.str());
}

std::string EncoderModel::fingerprint() const {
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(serialize())));
    return std::string(hex);
}

} // namespace daclr
