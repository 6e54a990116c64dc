#pragma once

#include <cstdint>
#include <string>

#include "daclr/event.hpp"

namespace daclr {

struct PromptTemplate {
    std::string template_text; // must contain {input_text} and {modality} exactly once each
    std::string version;
};

// Template shipped with the repo: asks the model for a single JSON object with
// the four event-summary fields.
PromptTemplate default_prompt_template();

struct MllmClientConfig {
    std::string base_url = "http://localhost:8080/v1";
    std::string model_name = "gpt-4o-mini";
    std::string api_key_source = "DACLR_API_KEY"; // env var holding the key
    double timeout_seconds = 30.0;
    int max_retries = 3;        // <= 10
    double retry_backoff = 0.5; // seconds, base of exponential backoff
    int max_concurrency = 4;

    void validate() const;
};

std::string render_prompt(const PromptTemplate& tmpl, const std::string& input_text,
                          const std::string& modality);

// Extracts the first JSON object in raw (prose and code fences around it are
// fine), maps keys case-insensitively, and validates. A missing `structure` is
// rebuilt with mask_structure when the other three fields are present.
EventSummary parse_response(const std::string& raw);

// Offline extractor so the full pipeline and tests run without a model
// endpoint. Participants are maximal runs of capitalized alphabetic tokens;
// attributes are numeric tokens plus the token following in/on/at/of/from/to.
EventSummary fallback_extract(const std::string& raw_text);

class MllmClient {
public:
    MllmClient(MllmClientConfig config, PromptTemplate tmpl);

    // One chat-completion round trip plus at most one repair re-prompt when the
    // model output is malformed. Image evidence is attached as a base64 part.
    EventSummary request_summary(const Claim& claim) const;
    EventSummary request_summary(const EvidenceDoc& doc) const;

    const MllmClientConfig& config() const { return config_; }

private:
    EventSummary request_for(const std::string& input_text, const std::string& modality,
                             const std::optional<std::string>& media_path) const;
    std::string post_chat(const std::string& prompt,
                          const std::optional<std::string>& media_path) const;

    MllmClientConfig config_;
    PromptTemplate template_;
};

std::string base64_encode(const std::string& bytes);

} // namespace daclr
