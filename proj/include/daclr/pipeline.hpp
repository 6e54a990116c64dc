#pragma once

#include <string>
#include <vector>

#include "daclr/dataset.hpp"
#include "daclr/encoder.hpp"
#include "daclr/sparse_index.hpp"

namespace daclr {

// Full-view embedding of every corpus document, tied to the model that
// produced it by fingerprint.
struct DenseIndex {
    std::vector<std::string> ids;     // corpus order
    std::vector<Embedding> rows;      // one unit vector per id
    std::string model_fingerprint;

    void save(const std::string& path) const;
    static DenseIndex load(const std::string& path);
};

DenseIndex build_dense_index(const EncoderModel& model, const Dataset& dataset);

// exact top-p by cosine over the whole index (exhaustive scan)
RankedList recall(const DenseIndex& index, const EncoderModel& model, const Claim& claim, size_t p);

// cross-scorer pass over the recalled candidates; output is a subset of them
RankedList rerank(const EncoderModel& model, const Dataset& dataset, const Claim& claim,
                  const RankedList& candidates, size_t q);

// recall to p then rerank to q, requiring q < p <= corpus size
RankedList retrieve(const EncoderModel& model, const DenseIndex& index, const Dataset& dataset,
                    const Claim& claim, size_t p, size_t q);

std::vector<RunLine> to_run_lines(const RankedList& list, const std::string& stage);

} // namespace daclr
