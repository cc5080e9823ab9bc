#include "bobw/mdp_io.hpp"

#include <fstream>
#include <numeric>

namespace bobw {

nlohmann::json mdp_to_json(const LayeredMdp& mdp) {
    nlohmann::json P = nlohmann::json::array();
    for (StateId s = 0; s < mdp.num_states(); ++s) {
        nlohmann::json per_action = nlohmann::json::array();
        for (ActionId a = 0; a < mdp.num_actions(); ++a) {
            const auto row = mdp.transition_row(s, a);
            per_action.push_back(std::vector<double>(row.begin(), row.end()));
        }
        P.push_back(std::move(per_action));
    }
    return {{"H", mdp.horizon()},
            {"layer_sizes", mdp.layer_sizes()},
            {"A", mdp.num_actions()},
            {"P", std::move(P)}};
}

LayeredMdp mdp_from_json(const nlohmann::json& doc) {
    try {
        const auto H = doc.at("H").get<std::size_t>();
        const auto sizes = doc.at("layer_sizes").get<std::vector<std::size_t>>();
        const auto A = doc.at("A").get<std::size_t>();
        if (sizes.size() != H) throw MdpFormatError("layer_sizes must have H entries");
        const std::size_t S = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
        const auto& P = doc.at("P");
        if (!P.is_array() || P.size() != S) throw MdpFormatError("P must have S rows");
        std::vector<double> flat;
        flat.reserve(S * A * S);
        for (const auto& per_state : P) {
            if (!per_state.is_array() || per_state.size() != A)
                throw MdpFormatError("P[s] must have A entries");
            for (const auto& row : per_state) {
                if (!row.is_array() || row.size() != S)
                    throw MdpFormatError("P[s][a] must have S entries");
                for (const auto& x : row) flat.push_back(x.get<double>());
            }
        }
        LayeredMdp mdp(sizes, A, std::move(flat));
        const auto issues = validate_mdp(mdp);
        if (!issues.empty()) {
            std::string msg = "invalid MDP:";
            for (const auto& i : issues) msg += "\n  " + i;
            throw MdpFormatError(msg);
        }
        return mdp;
    } catch (const nlohmann::json::exception& e) {
        throw MdpFormatError(std::string("malformed MDP document: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw MdpFormatError(e.what());
    }
}

LayeredMdp load_mdp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MdpFormatError("cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw MdpFormatError(path.string() + ": " + e.what());
    }
    return mdp_from_json(doc);
}

void save_mdp(const LayeredMdp& mdp, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << mdp_to_json(mdp).dump(2) << '\n';
}

}  // namespace bobw
