#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "coa/core.hpp"

namespace coa {

// Tolerance for recomputing a stored rule weight from its alignments.
inline constexpr double kWeightRecomputeTolerance = 1e-9;

// The domain registry: behavior domains with their objective and rule sets.
// Immutable after load; operations return new registries.
struct Registry {
    std::vector<DomainId> domains;
    std::map<std::string, std::vector<Objective>> objectives;  // domain id -> set
    std::map<std::string, std::vector<Rule>> rules;            // domain id -> set

    const DomainId* find_domain(const std::string& id) const;
    const std::vector<Objective>* objectives_for(const std::string& domain) const;
    const std::vector<Rule>* rules_for(const std::string& domain) const;
    const Objective* find_objective(const std::string& domain, const std::string& id) const;
    const Rule* find_rule(const std::string& domain, const std::string& id) const;
};

struct RegistryViolation {
    std::string where;    // e.g. "rule MH1/r2"
    std::string message;  // e.g. "dangling objective id 'o9'"
};

/// Cross-references every id, checks score ranges and stored weights.
/// Returns the complete list of violations; empty list means valid.
std::vector<RegistryViolation> validate_registry(const Registry& registry);

Registry registry_from_json(const nlohmann::json& j);
nlohmann::json registry_to_json(const Registry& registry);

Registry load_registry(const std::string& path);
void save_registry(const Registry& registry, const std::string& path);

}  // namespace coa
