#include "coa/registry.hpp"

#include <cmath>
#include <fstream>
#include <set>

using json = nlohmann::json;

namespace coa {

const DomainId* Registry::find_domain(const std::string& id) const {
    for (const auto& d : domains) {
        if (d.id == id) return &d;
    }
    return nullptr;
}

const std::vector<Objective>* Registry::objectives_for(const std::string& domain) const {
    const auto it = objectives.find(domain);
    return it == objectives.end() ? nullptr : &it->second;
}

const std::vector<Rule>* Registry::rules_for(const std::string& domain) const {
    const auto it = rules.find(domain);
    return it == rules.end() ? nullptr : &it->second;
}

const Objective* Registry::find_objective(const std::string& domain, const std::string& id) const {
    const auto* set = objectives_for(domain);
    if (set == nullptr) return nullptr;
    for (const auto& o : *set) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

const Rule* Registry::find_rule(const std::string& domain, const std::string& id) const {
    const auto* set = rules_for(domain);
    if (set == nullptr) return nullptr;
    for (const auto& r : *set) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }
bool in_signed_unit(double v) { return v >= -1.0 && v <= 1.0; }

}  // namespace

std::vector<RegistryViolation> validate_registry(const Registry& registry) {
    std::vector<RegistryViolation> out;
    const auto add = [&out](const std::string& where, const std::string& message) {
        out.push_back({where, message});
    };

    std::set<std::string> domain_ids;
    for (const auto& d : registry.domains) {
        const std::string where = "domain " + d.id;
        if (!domain_ids.insert(d.id).second) add(where, "duplicate domain id '" + d.id + "'");
        if (d.id.empty()) add(where, "empty domain id");
        if (d.title.empty()) add(where, "empty title");
        if (d.description.empty()) add(where, "empty description");
    }

    for (const auto& [domain, set] : registry.objectives) {
        if (domain_ids.count(domain) == 0) {
            add("objectives " + domain, "unknown domain '" + domain + "'");
        }
        std::set<std::string> ids;
        for (const auto& o : set) {
            const std::string where = "objective " + domain + "/" + o.id;
            if (!ids.insert(o.id).second) add(where, "duplicate objective id '" + o.id + "'");
            if (!in_unit(o.support_overall)) add(where, "support_overall outside [0,1]");
            if (!in_unit(o.support_bridging)) add(where, "support_bridging outside [0,1]");
            if (!in_unit(o.preference)) add(where, "preference outside [0,1]");
        }
    }

    for (const auto& [domain, set] : registry.rules) {
        if (domain_ids.count(domain) == 0) {
            add("rules " + domain, "unknown domain '" + domain + "'");
        }
        std::set<std::string> ids;
        for (const auto& r : set) {
            const std::string where = "rule " + domain + "/" + r.id;
            if (!ids.insert(r.id).second) add(where, "duplicate rule id '" + r.id + "'");
            if (r.domain != domain) {
                add(where, "rule domain '" + r.domain + "' disagrees with its set '" + domain + "'");
            }
            double sum = 0.0;
            for (const auto& [objective_id, phi] : r.objective_alignments) {
                if (registry.find_objective(domain, objective_id) == nullptr) {
                    add(where, "dangling objective id '" + objective_id + "'");
                }
                if (!in_signed_unit(phi)) {
                    add(where, "alignment for '" + objective_id + "' outside [-1,1]");
                }
                sum += phi;
            }
            if (!r.objective_alignments.empty()) {
                const double mean = sum / static_cast<double>(r.objective_alignments.size());
                if (std::fabs(mean - r.weight) > kWeightRecomputeTolerance) {
                    add(where, "stored weight " + std::to_string(r.weight) +
                                   " does not equal the alignment mean " + std::to_string(mean));
                }
            }
        }
    }
    return out;
}

Registry registry_from_json(const json& j) {
    Registry reg;
    for (const auto& d : j.value("domains", json::array())) {
        reg.domains.push_back({d.at("id").get<std::string>(), d.at("title").get<std::string>(),
                               d.at("description").get<std::string>()});
    }
    for (const auto& o : j.value("objectives", json::array())) {
        Objective obj;
        obj.id = o.at("id").get<std::string>();
        obj.kind = objective_kind_from_string(o.at("kind").get<std::string>());
        obj.text = o.at("text").get<std::string>();
        obj.support_overall = o.value("support_overall", 0.0);
        obj.support_bridging = o.value("support_bridging", 0.0);
        obj.preference = o.value("preference", 0.0);
        reg.objectives[o.at("domain").get<std::string>()].push_back(std::move(obj));
    }
    for (const auto& r : j.value("rules", json::array())) {
        Rule rule;
        rule.id = r.at("id").get<std::string>();
        rule.text = r.at("text").get<std::string>();
        rule.domain = r.at("domain").get<std::string>();
        const json alignments = r.value("objective_alignments", json::object());
        for (const auto& [objective_id, phi] : alignments.items()) {
            rule.objective_alignments[objective_id] = phi.get<double>();
        }
        rule.weight = r.value("weight", 0.0);
        reg.rules[rule.domain].push_back(std::move(rule));
    }
    return reg;
}

json registry_to_json(const Registry& registry) {
    json j;
    j["domains"] = json::array();
    for (const auto& d : registry.domains) {
        j["domains"].push_back({{"id", d.id}, {"title", d.title}, {"description", d.description}});
    }
    j["objectives"] = json::array();
    for (const auto& [domain, set] : registry.objectives) {
        for (const auto& o : set) {
            j["objectives"].push_back({{"id", o.id},
                                       {"domain", domain},
                                       {"kind", to_string(o.kind)},
                                       {"text", o.text},
                                       {"support_overall", o.support_overall},
                                       {"support_bridging", o.support_bridging},
                                       {"preference", o.preference}});
        }
    }
    j["rules"] = json::array();
    for (const auto& [domain, set] : registry.rules) {
        for (const auto& r : set) {
            json alignments = json::object();
            for (const auto& [objective_id, phi] : r.objective_alignments) {
                alignments[objective_id] = phi;
            }
            j["rules"].push_back({{"id", r.id},
                                  {"domain", domain},
                                  {"text", r.text},
                                  {"objective_alignments", alignments},
                                  {"weight", r.weight}});
        }
    }
    return j;
}

Registry load_registry(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open registry '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
    try {
        return registry_from_json(j);
    } catch (const json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

void save_registry(const Registry& registry, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write registry '" + path + "'");
    out << registry_to_json(registry).dump(2) << "\n";
}

}  // namespace coa
