#pragma once

#include <optional>
#include <string>
#include <vector>

#include "medrec/domain.hpp"

namespace medrec {

/// One registry row: the model plus optional endpoint overrides and
/// decoding parameters (passed through verbatim; no fidelity claimed).
struct RegistryEntry {
    ModelId id;
    std::optional<std::string> base_url;
    std::optional<std::string> api_key_env;
    std::optional<double> temperature;
};

/// The set of models available to the sampler, loaded from models.json.
struct Registry {
    std::vector<RegistryEntry> models;

    const RegistryEntry* find(const std::string& name) const;
    std::vector<ModelId> ids() const;
    std::vector<ModelId> ids_with_locality(Locality locality) const;
};

/// Validates name uniqueness and per-model invariants.
void validate_registry(const Registry& registry);

/// Deterministic ordered subset: Fisher-Yates over the lexicographically
/// sorted names, seeded, first n taken. Throws Error(insufficient_models)
/// when n exceeds the pool.
std::vector<ModelId> seeded_subset(std::vector<ModelId> items, std::size_t n,
                                   std::uint64_t seed);

/// Builds an ensemble under one of the four strategies. LOCAL/REMOTE filter
/// by locality, RANDOM draws from the whole registry, CHEMISTRY returns the
/// hint's members verbatim (order preserved).
EnsembleConfig sample(Strategy strategy, const Registry& registry, std::size_t n,
                      std::uint64_t seed,
                      const std::optional<EnsembleConfig>& chemistry_hint = std::nullopt);

} // namespace medrec
