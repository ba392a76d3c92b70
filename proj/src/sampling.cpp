#include "medrec/sampling.hpp"

#include <algorithm>
#include <set>

#include "medrec/rng.hpp"

namespace medrec {

const RegistryEntry* Registry::find(const std::string& name) const {
    for (const auto& entry : models) {
        if (entry.id.name == name) return &entry;
    }
    return nullptr;
}

std::vector<ModelId> Registry::ids() const {
    std::vector<ModelId> out;
    out.reserve(models.size());
    for (const auto& entry : models) out.push_back(entry.id);
    return out;
}

std::vector<ModelId> Registry::ids_with_locality(Locality locality) const {
    std::vector<ModelId> out;
    for (const auto& entry : models) {
        if (entry.id.locality == locality) out.push_back(entry.id);
    }
    return out;
}

void validate_registry(const Registry& registry) {
    std::set<std::string> names;
    for (const auto& entry : registry.models) {
        validate_model_id(entry.id);
        if (!names.insert(entry.id.name).second) {
            throw Error(ErrorCode::invalid_config,
                        "duplicate registry model '" + entry.id.name + "'");
        }
    }
}

std::vector<ModelId> seeded_subset(std::vector<ModelId> items, std::size_t n,
                                   std::uint64_t seed) {
    if (n > items.size()) {
        throw Error(ErrorCode::insufficient_models,
                    "requested " + std::to_string(n) + " models from a pool of " +
                        std::to_string(items.size()));
    }
    // Sort first so the draw is independent of registry-file ordering.
    std::sort(items.begin(), items.end(),
              [](const ModelId& a, const ModelId& b) { return a.name < b.name; });
    auto rng = seeded_rng(seed);
    fisher_yates(items, rng);
    items.resize(n);
    return items;
}

EnsembleConfig sample(Strategy strategy, const Registry& registry, std::size_t n,
                      std::uint64_t seed,
                      const std::optional<EnsembleConfig>& chemistry_hint) {
    switch (strategy) {
        case Strategy::local:
            return make_ensemble(
                strategy, seeded_subset(registry.ids_with_locality(Locality::local), n, seed),
                seed);
        case Strategy::remote:
            return make_ensemble(
                strategy, seeded_subset(registry.ids_with_locality(Locality::remote), n, seed),
                seed);
        case Strategy::random:
            return make_ensemble(strategy, seeded_subset(registry.ids(), n, seed), seed);
        case Strategy::chemistry: {
            if (!chemistry_hint) {
                throw Error(ErrorCode::missing_chemistry_hint,
                            "CHEMISTRY sampling needs a recommendation hint");
            }
            if (chemistry_hint->members.size() != n) {
                throw Error(ErrorCode::invalid_config,
                            "chemistry hint has " +
                                std::to_string(chemistry_hint->members.size()) +
                                " members but n=" + std::to_string(n));
            }
            for (const auto& member : chemistry_hint->members) {
                if (registry.find(member.name) == nullptr) {
                    throw Error(ErrorCode::unknown_model,
                                "chemistry hint member '" + member.name +
                                    "' is not in the registry");
                }
            }
            return make_ensemble(strategy, chemistry_hint->members, seed);
        }
    }
    throw Error(ErrorCode::invalid_config, "unreachable strategy");
}

} // namespace medrec
