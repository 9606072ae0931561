#include "tracelens/trace.hpp"

#include "tracelens/errors.hpp"

#include <array>
#include <utility>

namespace tracelens {

namespace {

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E v) {
    for (const auto& [e, name] : table)
        if (e == v) return name;
    return "unknown";
}

template <typename E, std::size_t N>
E parse_from(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view s,
             std::string_view what) {
    for (const auto& [e, name] : table)
        if (name == s) return e;
    throw SchemaViolation("bad-enum", std::string("invalid ") + std::string(what) + " value '" +
                                          std::string(s) + "'");
}

constexpr std::array<std::pair<DomainTag, std::string_view>, 3> kDomainNames{{
    {DomainTag::math, "math"}, {DomainTag::ale, "ale"}, {DomainTag::other, "other"}}};
constexpr std::array<std::pair<Validity, std::string_view>, 2> kValidityNames{{
    {Validity::accepted, "accepted"}, {Validity::rejected, "rejected"}}};
constexpr std::array<std::pair<EvalStatus, std::string_view>, 3> kStatusNames{{
    {EvalStatus::ok, "ok"}, {EvalStatus::error, "error"}, {EvalStatus::timeout, "timeout"}}};
constexpr std::array<std::pair<EditOperator, std::string_view>, 5> kOperatorNames{{
    {EditOperator::mutation, "mutation"},
    {EditOperator::recombination, "recombination"},
    {EditOperator::refinement, "refinement"},
    {EditOperator::repair, "repair"},
    {EditOperator::unknown, "unknown"}}};
constexpr std::array<std::pair<Dialect, std::string_view>, 2> kDialectNames{{
    {Dialect::py_like, "PY_LIKE"}, {Dialect::c_like, "C_LIKE"}}};

}  // namespace

std::string_view to_string(DomainTag v) { return name_of(kDomainNames, v); }
std::string_view to_string(Validity v) { return name_of(kValidityNames, v); }
std::string_view to_string(EvalStatus v) { return name_of(kStatusNames, v); }
std::string_view to_string(EditOperator v) { return name_of(kOperatorNames, v); }
std::string_view to_string(Dialect v) { return name_of(kDialectNames, v); }

DomainTag parse_domain_tag(std::string_view s) { return parse_from(kDomainNames, s, "domain_tag"); }
Validity parse_validity(std::string_view s) { return parse_from(kValidityNames, s, "validity"); }
EvalStatus parse_eval_status(std::string_view s) { return parse_from(kStatusNames, s, "status"); }
EditOperator parse_edit_operator(std::string_view s) {
    return parse_from(kOperatorNames, s, "operator");
}
Dialect parse_dialect(std::string_view s) { return parse_from(kDialectNames, s, "dialect"); }

void Run::reindex() {
    candidate_index_.clear();
    context_index_.clear();
    evaluation_index_.clear();
    for (std::size_t i = 0; i < candidates.size(); ++i)
        candidate_index_.emplace(candidates[i].candidate_id, i);
    for (std::size_t i = 0; i < contexts.size(); ++i)
        context_index_.emplace(contexts[i].context_id, i);
    for (std::size_t i = 0; i < evaluations.size(); ++i)
        evaluation_index_.emplace(evaluations[i].candidate_id, i);
}

const Candidate* Run::find_candidate(std::string_view id) const {
    auto it = candidate_index_.find(std::string(id));
    return it == candidate_index_.end() ? nullptr : &candidates[it->second];
}

const Context* Run::find_context(std::string_view id) const {
    auto it = context_index_.find(std::string(id));
    return it == context_index_.end() ? nullptr : &contexts[it->second];
}

const Evaluation* Run::find_evaluation(std::string_view candidate_id) const {
    auto it = evaluation_index_.find(std::string(candidate_id));
    return it == evaluation_index_.end() ? nullptr : &evaluations[it->second];
}

const Candidate& Run::candidate(std::string_view id) const {
    if (const auto* c = find_candidate(id)) return *c;
    throw UnknownCandidate("unknown-candidate", "unknown candidate '" + std::string(id) + "'");
}

const Candidate& Run::seed() const { return candidate(seed_candidate_id); }

std::size_t Run::position_of(std::string_view id) const {
    auto it = candidate_index_.find(std::string(id));
    if (it == candidate_index_.end())
        throw UnknownCandidate("unknown-candidate", "unknown candidate '" + std::string(id) + "'");
    return it->second;
}

bool Run::operator==(const Run& o) const {
    return run_id == o.run_id && task == o.task && backend == o.backend &&
           model_config == o.model_config && domain_tag == o.domain_tag && budget == o.budget &&
           seed_candidate_id == o.seed_candidate_id && environment == o.environment &&
           extra == o.extra && candidates == o.candidates && evaluations == o.evaluations &&
           edges == o.edges && contexts == o.contexts;
}

}  // namespace tracelens
