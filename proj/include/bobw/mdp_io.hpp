#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "bobw/mdp.hpp"
#include "json.hpp"

namespace bobw {

/// Raised for malformed or invalid model files; carries the itemized reasons.
class MdpFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// {"H": int, "layer_sizes": [int], "A": int, "P": [s][a][s']}
nlohmann::json mdp_to_json(const LayeredMdp& mdp);

/// Parses and validates; throws MdpFormatError listing every violation.
LayeredMdp mdp_from_json(const nlohmann::json& doc);

LayeredMdp load_mdp(const std::filesystem::path& path);
void save_mdp(const LayeredMdp& mdp, const std::filesystem::path& path);

}  // namespace bobw
