#pragma once

#include <string>

#include "m2curl/errors.hpp"

namespace m2curl::rl {

enum class Algorithm { sac, ppo };
enum class Representation { m2curl, rad, vanilla, state };
enum class Modalities { both, visual_only, tactile_only };

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "sac") return Algorithm::sac;
    if (s == "ppo") return Algorithm::ppo;
    throw ConfigError("unknown algorithm '" + s + "' (expected sac or ppo)");
}

inline Representation parse_representation(const std::string& s) {
    if (s == "m2curl") return Representation::m2curl;
    if (s == "rad") return Representation::rad;
    if (s == "vanilla") return Representation::vanilla;
    if (s == "state") return Representation::state;
    throw ConfigError("unknown representation '" + s + "' (expected m2curl, rad, vanilla or state)");
}

inline Modalities parse_modalities(const std::string& s) {
    if (s == "both") return Modalities::both;
    if (s == "visual_only") return Modalities::visual_only;
    if (s == "tactile_only") return Modalities::tactile_only;
    throw ConfigError("unknown modalities '" + s + "' (expected both, visual_only or tactile_only)");
}

inline std::string to_string(Algorithm a) { return a == Algorithm::sac ? "sac" : "ppo"; }

inline std::string to_string(Representation r) {
    switch (r) {
        case Representation::m2curl: return "m2curl";
        case Representation::rad: return "rad";
        case Representation::vanilla: return "vanilla";
        case Representation::state: return "state";
    }
    return "?";
}

inline std::string to_string(Modalities m) {
    switch (m) {
        case Modalities::both: return "both";
        case Modalities::visual_only: return "visual_only";
        case Modalities::tactile_only: return "tactile_only";
    }
    return "?";
}

struct AgentMode {
    Algorithm algorithm = Algorithm::sac;
    Representation representation = Representation::m2curl;
    Modalities modalities = Modalities::both;

    /// m2curl needs both modalities; state mode ignores the modality setting.
    void validate() const {
        if (representation == Representation::m2curl && modalities != Modalities::both) {
            throw ConfigError("representation m2curl requires modalities = both (got " + to_string(modalities) + ")");
        }
    }

    bool pixels() const { return representation != Representation::state; }
    bool augmented() const { return representation == Representation::m2curl || representation == Representation::rad; }
    bool contrastive() const { return representation == Representation::m2curl; }
    bool uses_visual() const { return pixels() && modalities != Modalities::tactile_only; }
    bool uses_tactile() const { return pixels() && modalities != Modalities::visual_only; }

    std::string label() const {
        std::string s = to_string(representation) + "-" + to_string(algorithm);
        if (pixels() && modalities != Modalities::both) s += "-" + to_string(modalities);
        return s;
    }

    friend bool operator==(const AgentMode&, const AgentMode&) = default;
};

}  // namespace m2curl::rl
