#include "daclr/summarizer.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "daclr/errors.hpp"

namespace daclr {

namespace {

size_t count_occurrences(const std::string& text, const std::string& needle) {
    size_t count = 0, pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

std::string replace_once(std::string text, const std::string& placeholder, const std::string& value) {
    size_t pos = text.find(placeholder);
    if (pos != std::string::npos) text.replace(pos, placeholder.size(), value);
    return text;
}

bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ascii_alnum(char c) { return is_ascii_alpha(c) || is_ascii_digit(c); }

struct RawToken {
    std::string text;
    size_t begin = 0;
    size_t end = 0; // one past last char
};

std::vector<RawToken> alnum_tokens(const std::string& text) {
    std::vector<RawToken> tokens;
    size_t i = 0;
    while (i < text.size()) {
        if (!is_ascii_alnum(text[i])) {
            ++i;
            continue;
        }
        size_t begin = i;
        while (i < text.size() && is_ascii_alnum(text[i])) ++i;
        tokens.push_back({text.substr(begin, i - begin), begin, i});
    }
    return tokens;
}

bool is_capitalized_alpha(const std::string& tok) {
    if (tok.empty() || !(tok[0] >= 'A' && tok[0] <= 'Z')) return false;
    return std::all_of(tok.begin(), tok.end(), [](char c) { return is_ascii_alpha(c); });
}

bool is_numeric(const std::string& tok) {
    return !tok.empty() && std::all_of(tok.begin(), tok.end(), [](char c) { return is_ascii_digit(c); });
}

bool is_preposition(const std::string& tok) {
    static const std::set<std::string> preps = {"in", "on", "at", "of", "from", "to"};
    std::string lowered = tok;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return preps.count(lowered) > 0;
}

std::string trim(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

// balanced-brace extraction of the first JSON object, string-literal aware
std::string first_json_object(const std::string& raw) {
    size_t start = raw.find('{');
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        for (size_t i = start; i < raw.size(); ++i) {
            char c = raw[i];
            if (in_string) {
                if (c == '\\')
                    ++i;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}') {
                if (--depth == 0) return raw.substr(start, i - start + 1);
            }
        }
        start = raw.find('{', start + 1);
    }
    return "";
}

std::string lowered_key(const std::string& key) {
    std::string out = key;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

PromptTemplate default_prompt_template() {
    PromptTemplate tmpl;
    tmpl.version = "v1";
    tmpl.template_text =
        "You are an event analyst for fact checking. Read the following {modality} item and "
        "decompose the event it describes.\n\n"
        "Item:\n{input_text}\n\n"
        "Respond with exactly one JSON object and nothing else, with these keys:\n"
        "  \"summary\": one-sentence natural-language summary of the event,\n"
        "  \"participants\": array of participant entity spans copied verbatim from the summary,\n"
        "  \"attributes\": array of attribute spans (places, dates, quantities) copied verbatim,\n"
        "  \"structure\": the summary with every participant and attribute span replaced by [Mask].\n";
    return tmpl;
}

void MllmClientConfig::validate() const {
    if (timeout_seconds <= 0) raise(ErrorCode::ConfigError, "mllm timeout must be > 0");
    if (max_retries < 0 || max_retries > 10) raise(ErrorCode::ConfigError, "mllm max_retries must be in [0, 10]");
    if (retry_backoff < 0) raise(ErrorCode::ConfigError, "mllm retry_backoff must be >= 0");
    if (max_concurrency < 1) raise(ErrorCode::ConfigError, "mllm max_concurrency must be >= 1");
}

std::string render_prompt(const PromptTemplate& tmpl, const std::string& input_text,
                          const std::string& modality) {
    if (count_occurrences(tmpl.template_text, "{input_text}") != 1)
        raise(ErrorCode::TemplateError, "template must contain {input_text} exactly once");
    if (count_occurrences(tmpl.template_text, "{modality}") != 1)
        raise(ErrorCode::TemplateError, "template must contain {modality} exactly once");
    return replace_once(replace_once(tmpl.template_text, "{input_text}", input_text), "{modality}",
                        modality);
}

EventSummary parse_response(const std::string& raw) {
    std::string object_text = first_json_object(raw);
    if (object_text.empty()) raise(ErrorCode::ParseError, "no JSON object found in response");

    nlohmann::json j = nlohmann::json::parse(object_text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        raise(ErrorCode::ParseError, "response is not parseable JSON");

    nlohmann::json fields;
    for (auto it = j.begin(); it != j.end(); ++it) fields[lowered_key(it.key())] = it.value();

    EventSummary s;
    try {
        if (!fields.contains("summary")) raise(ErrorCode::SummaryQualityError, "missing summary field");
        s.summary = fields.at("summary").get<std::string>();
        if (fields.contains("participants"))
            s.participants = fields.at("participants").get<std::vector<std::string>>();
        if (fields.contains("attributes"))
            s.attributes = fields.at("attributes").get<std::vector<std::string>>();
        if (fields.contains("structure")) {
            s.structure = fields.at("structure").get<std::string>();
        } else {
            s.structure = mask_structure(s.summary, s.participants, s.attributes);
        }
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::SummaryQualityError, std::string("malformed field: ") + e.what());
    }

    auto validation = validate_summary(s);
    if (!validation.ok()) {
        std::string msg = "summary fails validation:";
        for (const auto& v : validation.violations) msg += " " + v + ";";
        raise(ErrorCode::SummaryQualityError, msg);
    }
    return s;
}

EventSummary fallback_extract(const std::string& raw_text) {
    if (trim(raw_text).empty()) raise(ErrorCode::EmptyInput, "fallback_extract on empty text");

    EventSummary s;
    s.summary = trim(raw_text);

    auto tokens = alnum_tokens(s.summary);

    // participants: maximal runs of capitalized alphabetic tokens separated by
    // exactly one space, kept verbatim
    std::set<std::string> seen_participants;
    size_t i = 0;
    while (i < tokens.size()) {
        if (!is_capitalized_alpha(tokens[i].text)) {
            ++i;
            continue;
        }
        size_t run_end = i;
        while (run_end + 1 < tokens.size() && is_capitalized_alpha(tokens[run_end + 1].text) &&
               tokens[run_end + 1].begin == tokens[run_end].end + 1 &&
               s.summary[tokens[run_end].end] == ' ') {
            ++run_end;
        }
        std::string span = s.summary.substr(tokens[i].begin, tokens[run_end].end - tokens[i].begin);
        if (seen_participants.insert(span).second) s.participants.push_back(span);
        i = run_end + 1;
    }

    // attributes: numeric tokens plus the token after each preposition, in text
    // order, never repeating a participant span
    std::set<std::string> seen_attributes;
    for (size_t t = 0; t < tokens.size(); ++t) {
        bool qualifies = is_numeric(tokens[t].text) ||
                         (t > 0 && is_preposition(tokens[t - 1].text));
        if (!qualifies) continue;
        const std::string& span = tokens[t].text;
        if (seen_participants.count(span)) continue;
        if (seen_attributes.insert(span).second) s.attributes.push_back(span);
    }

    s.structure = mask_structure(s.summary, s.participants, s.attributes);
    return s;
}

MllmClient::MllmClient(MllmClientConfig config, PromptTemplate tmpl)
    : config_(std::move(config)), template_(std::move(tmpl)) {
    config_.validate();
    // fail fast on a bad template rather than on the first request
    render_prompt(template_, "", "");
}

EventSummary MllmClient::request_summary(const Claim& claim) const {
    return request_for(claim.raw_text, "text", std::nullopt);
}

EventSummary MllmClient::request_summary(const EvidenceDoc& doc) const {
    return request_for(doc.raw_text, modality_name(doc.modality),
                       doc.modality == Modality::Image ? doc.media_path : std::nullopt);
}

namespace {

// strict schema for live model output: all four fields must be present
EventSummary parse_strict(const std::string& content) {
    std::string object_text = first_json_object(content);
    if (object_text.empty()) raise(ErrorCode::SummaryQualityError, "model returned no JSON object");
    nlohmann::json j = nlohmann::json::parse(object_text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        raise(ErrorCode::SummaryQualityError, "model returned unparseable JSON");
    nlohmann::json fields;
    for (auto it = j.begin(); it != j.end(); ++it) fields[lowered_key(it.key())] = it.value();
    for (const char* key : {"summary", "participants", "attributes", "structure"}) {
        if (!fields.contains(key))
            raise(ErrorCode::SummaryQualityError, std::string("model response missing field '") + key + "'");
    }
    return parse_response(object_text);
}

} // namespace

EventSummary MllmClient::request_for(const std::string& input_text, const std::string& modality,
                                     const std::optional<std::string>& media_path) const {
    std::string prompt = render_prompt(template_, input_text, modality);
    std::string content = post_chat(prompt, media_path);
    try {
        return parse_strict(content);
    } catch (const Error& first_error) {
        if (first_error.code() == ErrorCode::TransportError) throw;
        // one repair re-prompt, then give up
        std::string repair = prompt +
            "\n\nYour previous reply could not be used (" + std::string(first_error.what()) +
            "). Reply again with ONLY the JSON object containing the keys summary, participants, "
            "attributes, structure.";
        std::string retry_content = post_chat(repair, media_path);
        return parse_strict(retry_content);
    }
}

std::string MllmClient::post_chat(const std::string& prompt,
                                  const std::optional<std::string>& media_path) const {
    // split base_url into scheme://host[:port] and path prefix
    std::string url = config_.base_url;
    size_t scheme_end = url.find("://");
    size_t path_start = scheme_end == std::string::npos ? url.find('/') : url.find('/', scheme_end + 3);
    std::string host_part = path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!path_prefix.empty() && path_prefix.back() == '/') path_prefix.pop_back();

    nlohmann::json content_parts = nlohmann::json::array();
    content_parts.push_back({{"type", "text"}, {"text", prompt}});
    if (media_path) {
        std::ifstream in(*media_path, std::ios::binary);
        if (!in) raise(ErrorCode::IoError, "cannot read media file " + *media_path);
        std::ostringstream bytes;
        bytes << in.rdbuf();
        content_parts.push_back(
            {{"type", "image_url"},
             {"image_url", {{"url", "data:image/jpeg;base64," + base64_encode(bytes.str())}}}});
    }

    nlohmann::json body = {
        {"model", config_.model_name},
        {"temperature", 0},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content_parts}}})},
    };

    httplib::Client client(host_part);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<int64_t>(config_.timeout_seconds * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(
        static_cast<int64_t>(config_.timeout_seconds * 1000)));

    httplib::Headers headers;
    const char* key = std::getenv(config_.api_key_source.c_str());
    if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            double delay = config_.retry_backoff * static_cast<double>(1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        auto res = client.Post(path_prefix + "/chat/completions", headers, body.dump(),
                               "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            if (res->has_header("Retry-After")) {
                // server backoff hint wins over our exponential schedule
                double hint = std::atof(res->get_header_value("Retry-After").c_str());
                if (hint > 0) std::this_thread::sleep_for(std::chrono::duration<double>(hint));
            }
            continue;
        }
        if (res->status != 200) {
            raise(ErrorCode::TransportError,
                  "HTTP " + std::to_string(res->status) + " from " + host_part + ": " + res->body);
        }
        nlohmann::json envelope = nlohmann::json::parse(res->body, nullptr, false);
        if (envelope.is_discarded() || !envelope.contains("choices") || envelope["choices"].empty())
            raise(ErrorCode::TransportError, "malformed chat-completion envelope");
        const auto& message = envelope["choices"][0]["message"];
        if (!message.contains("content"))
            raise(ErrorCode::TransportError, "chat-completion message has no content");
        return message["content"].get<std::string>();
    }
    raise(ErrorCode::TransportError,
          "request failed after " + std::to_string(config_.max_retries + 1) + " attempts (" +
              last_error + ")");
}

std::string base64_encode(const std::string& bytes) {
    static const char alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 2 < bytes.size()) {
        uint32_t n = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                     static_cast<unsigned char>(bytes[i + 2]);
        out += alphabet[(n >> 18) & 63];
        out += alphabet[(n >> 12) & 63];
        out += alphabet[(n >> 6) & 63];
        out += alphabet[n & 63];
        i += 3;
    }
    if (i + 1 == bytes.size()) {
        uint32_t n = static_cast<unsigned char>(bytes[i]) << 16;
        out += alphabet[(n >> 18) & 63];
        out += alphabet[(n >> 12) & 63];
        out += "==";
    } else if (i + 2 == bytes.size()) {
        uint32_t n = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out += alphabet[(n >> 18) & 63];
        out += alphabet[(n >> 12) & 63];
        out += alphabet[(n >> 6) & 63];
        out += '=';
    }
    return out;
}

} // namespace daclr
