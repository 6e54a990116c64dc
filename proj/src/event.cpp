#include "daclr/event.hpp"

#include <algorithm>
#include <cstring>
#include <set>

#include <nlohmann/json.hpp>

#include "daclr/errors.hpp"

namespace daclr {

const char* view_kind_name(ViewKind kind) {
    switch (kind) {
        case ViewKind::Full: return "full";
        case ViewKind::Sent: return "sent";
        case ViewKind::Struct: return "struct";
    }
    return "full";
}

ViewKind view_kind_from_name(const std::string& name) {
    if (name == "full") return ViewKind::Full;
    if (name == "sent") return ViewKind::Sent;
    if (name == "struct") return ViewKind::Struct;
    raise(ErrorCode::ConfigError, "unknown view kind '" + name + "'");
}

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::Text: return "text";
        case Modality::Image: return "image";
        case Modality::Table: return "table";
    }
    return "text";
}

Modality modality_from_name(const std::string& name) {
    if (name == "text") return Modality::Text;
    if (name == "image") return Modality::Image;
    if (name == "table") return Modality::Table;
    raise(ErrorCode::IngestError, "unknown modality '" + name + "'");
}

namespace {

// Text is held as alternating segments; mask segments are never searched, so
// spans can never match across or inside an existing `[Mask]`.
struct Segment {
    bool is_mask;
    std::string text;
};

std::vector<Segment> split_on_masks(const std::string& text) {
    std::vector<Segment> segments;
    size_t pos = 0;
    const size_t mask_len = std::strlen(kMaskToken);
    while (pos < text.size()) {
        size_t hit = text.find(kMaskToken, pos);
        if (hit == std::string::npos) {
            segments.push_back({false, text.substr(pos)});
            break;
        }
        if (hit > pos) segments.push_back({false, text.substr(pos, hit - pos)});
        segments.push_back({true, kMaskToken});
        pos = hit + mask_len;
    }
    return segments;
}

void replace_span(std::vector<Segment>& segments, const std::string& span) {
    std::vector<Segment> next;
    for (auto& seg : segments) {
        if (seg.is_mask || seg.text.empty()) {
            next.push_back(std::move(seg));
            continue;
        }
        size_t pos = 0;
        while (pos < seg.text.size()) {
            size_t hit = seg.text.find(span, pos);
            if (hit == std::string::npos) {
                next.push_back({false, seg.text.substr(pos)});
                break;
            }
            if (hit > pos) next.push_back({false, seg.text.substr(pos, hit - pos)});
            next.push_back({true, kMaskToken});
            pos = hit + span.size();
        }
    }
    segments = std::move(next);
}

std::string join_segments(const std::vector<Segment>& segments) {
    std::string out;
    for (const auto& seg : segments) out += seg.text;
    return out;
}

std::vector<std::string> ordered_spans(const std::vector<std::string>& participants,
                                       const std::vector<std::string>& attributes) {
    std::vector<std::string> spans;
    spans.reserve(participants.size() + attributes.size());
    for (const auto& s : participants)
        if (!s.empty()) spans.push_back(s);
    for (const auto& s : attributes)
        if (!s.empty()) spans.push_back(s);
    // longest first; stable, so ties keep participants-then-attributes order
    std::stable_sort(spans.begin(), spans.end(),
                     [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    return spans;
}

// true if span occurs in text outside every `[Mask]` token
bool occurs_unmasked(const std::string& text, const std::string& span) {
    if (span.empty()) return false;
    for (const auto& seg : split_on_masks(text)) {
        if (!seg.is_mask && seg.text.find(span) != std::string::npos) return true;
    }
    return false;
}

} // namespace

std::string mask_structure(const std::string& summary_text,
                           const std::vector<std::string>& participants,
                           const std::vector<std::string>& attributes) {
    auto segments = split_on_masks(summary_text);
    for (const auto& span : ordered_spans(participants, attributes)) {
        replace_span(segments, span);
    }
    return join_segments(segments);
}

std::string view(const EventSummary& summary, ViewKind kind) {
    switch (kind) {
        case ViewKind::Full:
            return summary.summary;
        case ViewKind::Struct:
            return summary.structure;
        case ViewKind::Sent: {
            if (summary.participants.empty() && summary.attributes.empty()) {
                raise(ErrorCode::EmptyView, "sent view of a summary with no participants or attributes");
            }
            std::string out;
            for (const auto& s : summary.participants) {
                if (!out.empty()) out += ' ';
                out += s;
            }
            for (const auto& s : summary.attributes) {
                if (!out.empty()) out += ' ';
                out += s;
            }
            return out;
        }
    }
    return summary.summary;
}

ValidationResult validate_summary(const EventSummary& s) {
    ValidationResult result;
    for (const auto& span : s.participants) {
        if (occurs_unmasked(s.structure, span))
            result.violations.push_back("unmasked participant span '" + span + "' in structure");
    }
    for (const auto& span : s.attributes) {
        if (occurs_unmasked(s.structure, span))
            result.violations.push_back("unmasked attribute span '" + span + "' in structure");
    }

    // every mask occurrence must be the exact token `[Mask]`
    const std::string& st = s.structure;
    for (size_t i = 0; i + 5 < st.size(); ++i) {
        if (st[i] != '[') continue;
        size_t close = st.find(']', i);
        if (close == std::string::npos) break;
        std::string inside = st.substr(i + 1, close - i - 1);
        std::string lowered = inside;
        std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (lowered == "mask" && inside != "Mask")
            result.violations.push_back("mask token '[" + inside + "]' is not exactly [Mask]");
    }

    auto check_list = [&](const std::vector<std::string>& spans, const char* which) {
        std::set<std::string> seen;
        for (const auto& span : spans) {
            if (span.empty())
                result.violations.push_back(std::string("empty span in ") + which);
            else if (!seen.insert(span).second)
                result.violations.push_back(std::string("duplicate span '") + span + "' in " + which);
        }
    };
    check_list(s.participants, "participants");
    check_list(s.attributes, "attributes");
    return result;
}

std::string serialize_summary(const EventSummary& s) {
    nlohmann::json j;
    j["summary"] = s.summary;
    j["participants"] = s.participants;
    j["attributes"] = s.attributes;
    j["structure"] = s.structure;
    return j.dump();
}

EventSummary deserialize_summary(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        raise(ErrorCode::ParseError, "not a JSON object");
    EventSummary s;
    try {
        s.summary = j.at("summary").get<std::string>();
        s.participants = j.at("participants").get<std::vector<std::string>>();
        s.attributes = j.at("attributes").get<std::vector<std::string>>();
        s.structure = j.at("structure").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::ParseError, std::string("bad event summary record: ") + e.what());
    }
    return s;
}

} // namespace daclr
