#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "eso/model.hpp"

namespace eso {

/// Everything the CLI needs to price one grant.
struct ModelInputs {
    MarketParams market;
    GrantSpec grant;
    ExercisePolicy policy;
};

/**
 * Parameter file: a JSON document with the market/grant scalars at top level
 * and two nested specs:
 *
 *   intensity: {"kind":"constant","lambda":1.0}
 *              {"kind":"affine","A":0.2,"B":0.02}
 *   jump:      {"kind":"unit"} | {"kind":"uniform"}
 *              {"kind":"custom","table":[[1.0],[0.5,0.5],...]}
 *
 * The affine intensity reads lambda(t,s) = A - B ln(s/K) on the truncated
 * log-moneyness domain. See README for the full schema.
 */
inline ModelInputs parse_params(const nlohmann::json& j) {
    MarketParams mkt;
    mkt.S0 = j.at("S0").get<double>();
    mkt.K = j.at("K").get<double>();
    mkt.r = j.at("r").get<double>();
    mkt.q = j.at("q").get<double>();
    mkt.sigma = j.at("sigma").get<double>();
    mkt.T = j.at("T").get<double>();
    mkt.validate();

    GrantSpec grant;
    grant.M = j.at("M").get<int>();
    grant.t_v = j.at("t_v").get<double>();
    grant.alpha = j.at("alpha").get<double>();
    grant.beta = j.at("beta").get<double>();
    grant.validate(mkt.T);

    JumpSizeDistribution jumps = JumpSizeDistribution::uniform();
    if (j.contains("jump")) {
        const auto& jj = j.at("jump");
        const std::string kind = jj.at("kind").get<std::string>();
        if (kind == "unit") {
            jumps = JumpSizeDistribution::unit();
        } else if (kind == "uniform") {
            jumps = JumpSizeDistribution::uniform();
        } else if (kind == "custom") {
            jumps = JumpSizeDistribution::custom(
                jj.at("table").get<std::vector<std::vector<double>>>());
        } else {
            throw std::invalid_argument("params: unknown jump kind '" + kind + "'");
        }
    }

    if (grant.M > jumps.max_count())
        throw std::invalid_argument("params: custom jump table smaller than the grant");

    const auto& ij = j.at("intensity");
    const std::string kind = ij.at("kind").get<std::string>();
    if (kind == "constant") {
        return ModelInputs{mkt, grant,
                           ExercisePolicy::constant(ij.at("lambda").get<double>(), jumps)};
    }
    if (kind == "affine") {
        return ModelInputs{mkt, grant,
                           ExercisePolicy::affine(ij.at("A").get<double>(),
                                                  ij.at("B").get<double>(), jumps)};
    }
    throw std::invalid_argument("params: unknown intensity kind '" + kind +
                                "' (file formats support constant|affine)");
}

inline ModelInputs load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open parameter file: " + path);
    nlohmann::json j;
    in >> j;
    return parse_params(j);
}

inline nlohmann::json params_to_json(const ModelInputs& inputs) {
    nlohmann::json j;
    j["S0"] = inputs.market.S0;
    j["K"] = inputs.market.K;
    j["r"] = inputs.market.r;
    j["q"] = inputs.market.q;
    j["sigma"] = inputs.market.sigma;
    j["T"] = inputs.market.T;
    j["M"] = inputs.grant.M;
    j["t_v"] = inputs.grant.t_v;
    j["alpha"] = inputs.grant.alpha;
    j["beta"] = inputs.grant.beta;
    switch (inputs.policy.kind()) {
        case ExercisePolicy::Kind::Constant:
            j["intensity"] = {{"kind", "constant"},
                              {"lambda", inputs.policy.constant_lambda()}};
            break;
        case ExercisePolicy::Kind::Affine:
            j["intensity"] = {{"kind", "affine"},
                              {"A", inputs.policy.a(0.0)},
                              {"B", inputs.policy.b(0.0)}};
            break;
        case ExercisePolicy::Kind::TimeDependent:
            throw std::invalid_argument(
                "params: time-dependent intensities are a code-level feature and have "
                "no file form");
    }
    switch (inputs.policy.jump_sizes().kind()) {
        case JumpSizeDistribution::Kind::Unit:
            j["jump"] = {{"kind", "unit"}};
            break;
        case JumpSizeDistribution::Kind::Uniform:
            j["jump"] = {{"kind", "uniform"}};
            break;
        case JumpSizeDistribution::Kind::Custom: {
            const int mmax = std::min(inputs.grant.M,
                                      inputs.policy.jump_sizes().max_count());
            std::vector<std::vector<double>> table;
            for (int m = 1; m <= mmax; ++m) {
                std::vector<double> row;
                for (int z = 1; z <= m; ++z)
                    row.push_back(inputs.policy.jump_sizes().prob(m, z));
                table.push_back(std::move(row));
            }
            j["jump"] = {{"kind", "custom"}, {"table", table}};
            break;
        }
    }
    return j;
}

inline void save_params(const ModelInputs& inputs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write parameter file: " + path);
    out << params_to_json(inputs).dump(2) << "\n";
}

}  // namespace eso
