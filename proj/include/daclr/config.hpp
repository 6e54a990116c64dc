#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "daclr/sparse_index.hpp"
#include "daclr/summarizer.hpp"
#include "daclr/trainer.hpp"

namespace daclr {

// Every paper-unspecified constant lives here, with the defaults this
// implementation ships with. Loaded from an INI-style file; unknown keys are
// rejected so typos fail loudly.
struct RunConfig {
    uint32_t encoder_hash_dim = 1u << 15;
    uint32_t encoder_embed_dim = 64;

    Bm25Params bm25;
    size_t preselect_pages = 150;
    size_t preselect_per_doc = 30;

    TrainConfig train;

    size_t pipeline_p = 100;
    size_t pipeline_q = 10;

    std::vector<size_t> eval_ks = {10, 20, 100};

    MllmClientConfig mllm;

    void validate() const;
    std::string to_ini() const;
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& ini_text, const std::string& origin = "<memory>");

} // namespace daclr
