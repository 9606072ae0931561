#pragma once

// Tunable-constant ("knob") identification, validation and source rewrite.
// A rewritten program exposes every accepted literal through one parameter
// block whose values can be regenerated without touching anything else.

#include "tracelens/chat_client.hpp"
#include "tracelens/trace.hpp"

#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tracelens {

enum class KnobScale { linear, log };
enum class KnobKind { integer, real };

std::string_view to_string(KnobScale s);
std::string_view to_string(KnobKind k);  // "int" / "float"

struct KnobSpec {
    std::string name;
    std::string source_literal;
    std::string context_line;
    double default_value = 0.0;
    double low = 0.0;
    double high = 1.0;
    KnobScale scale = KnobScale::linear;
    KnobKind kind = KnobKind::real;
    std::string rationale;
};

struct KnobSpace {
    std::vector<KnobSpec> knobs;
    std::string structure_id;
};

inline constexpr std::size_t kMaxKnobs = 8;

struct DroppedKnob {
    std::string name;
    std::string reason;
};

struct KnobProposal {
    std::vector<KnobSpec> specs;
    std::vector<DroppedKnob> dropped;
};

/// The knob-identification system prompt, shipped verbatim.
std::string_view knob_identification_prompt();

/// User message: the source in a fenced block tagged with its language.
std::string knob_user_message(std::string_view source, Dialect dialect);

/// Parses one spec object and enforces the type invariants. Integer knobs
/// get low = max(1, floor(low)), high = ceil(high). The default is the
/// value of source_literal. Returns the drop reason on failure.
std::variant<KnobSpec, std::string> parse_knob_spec(const json& j);

/// Parses a {"hparams": [...]} reply. Keeps the first kMaxKnobs valid
/// specs with unique names. Throws InvalidJson.
KnobProposal parse_knob_response(std::string_view raw);

/// Exactly one model call, no retry. Throws Unavailable, AuthError,
/// InvalidJson.
KnobProposal request_knobs(std::string_view source, Dialect dialect, const std::string& model_id,
                           ChatClient& client);

/// Byte offsets of code-region occurrences of `literal` in `line` whose
/// neighbours are not identifier characters, '.', or an exponent sign.
std::vector<std::size_t> literal_occurrences(std::string_view line, std::string_view literal, Dialect dialect);

struct KnobValidation {
    std::vector<KnobSpec> accepted;
    std::vector<DroppedKnob> dropped;
};

KnobValidation validate_knobs(std::string_view source, const std::vector<KnobSpec>& specs, Dialect dialect);

/// Throws RewriteConflict when a context line is missing, repeated, or no
/// longer holds exactly one occurrence of its literal.
std::string rewrite_with_param_block(std::string_view source, const std::vector<KnobSpec>& accepted,
                                     Dialect dialect);

/// Macro name used for a knob in C_LIKE programs.
std::string macro_name(std::string_view knob_name);

/// Text of one value as written into the parameter block. The default
/// value reproduces the original literal bytes.
std::string render_value(const KnobSpec& spec, double value, Dialect dialect);

/// Regenerates the parameter block. Throws MissingValue, NonIntegralInt,
/// RewriteConflict when the block cannot be located.
std::string substitute_values(std::string_view rewritten, const KnobSpace& space,
                              const std::map<std::string, double>& values, Dialect dialect);

json to_json(const KnobSpec& k);

}  // namespace tracelens
