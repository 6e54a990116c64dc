#pragma once

#include <optional>
#include <string>
#include <vector>

namespace daclr {

inline constexpr const char* kMaskToken = "[Mask]";

// Event skeleton tuple for one claim or evidence item: a natural-language
// summary, the participant and attribute entity spans, and the summary with
// every entity span replaced by the mask token.
struct EventSummary {
    std::string summary;
    std::vector<std::string> participants;
    std::vector<std::string> attributes;
    std::string structure;

    bool operator==(const EventSummary&) const = default;
};

enum class ViewKind { Full, Sent, Struct };

const char* view_kind_name(ViewKind kind);
ViewKind view_kind_from_name(const std::string& name);

enum class Modality { Text, Image, Table };

const char* modality_name(Modality m);
Modality modality_from_name(const std::string& name);

struct Claim {
    std::string id;
    std::string raw_text;
    std::optional<EventSummary> summary;
};

struct EvidenceDoc {
    std::string id;
    Modality modality = Modality::Text;
    std::string raw_text;                  // empty allowed for image modality
    std::optional<std::string> media_path; // required for image modality
    std::optional<EventSummary> summary;
};

// Replaces every whole-span occurrence of each participant/attribute with
// `[Mask]`. Longer spans are replaced before shorter ones, scans run left to
// right, and text already inside a mask token is never touched (which also
// makes the function idempotent). Spans absent from the text are skipped.
std::string mask_structure(const std::string& summary_text,
                           const std::vector<std::string>& participants,
                           const std::vector<std::string>& attributes);

// Selects the text fed to each contrastive loss: Full -> summary,
// Struct -> structure, Sent -> participants then attributes joined by single
// spaces. Throws EmptyView for a Sent view with no spans at all.
std::string view(const EventSummary& summary, ViewKind kind);

struct ValidationResult {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// Checks the EventSummary invariants; violations are returned as data, never
// thrown. An entity span is only counted as unmasked when it occurs outside
// every `[Mask]` token in the structure.
ValidationResult validate_summary(const EventSummary& s);

// One JSON object per record, keys: summary, participants, attributes, structure.
std::string serialize_summary(const EventSummary& s);
EventSummary deserialize_summary(const std::string& json_text);

} // namespace daclr
