#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "bgw/model.hpp"

namespace bgw {

namespace detail {

inline std::vector<double> read_pmf(const nlohmann::json& j, int min_key) {
    if (!j.is_object())
        throw PreconditionError("pmf must be an object of \"k\": p entries");
    std::vector<double> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::size_t used = 0;
        int k = 0;
        try {
            k = std::stoi(it.key(), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != it.key().size() || k < min_key)
            throw PreconditionError("bad pmf key \"" + it.key() + "\"");
        const std::size_t idx = std::size_t(k - min_key);
        if (out.size() <= idx)
            out.resize(idx + 1, 0.0);
        out[idx] = it.value().get<double>();
    }
    return out;
}

inline nlohmann::ordered_json write_pmf(const std::vector<double>& pmf, int first_key) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < pmf.size(); ++i)
        if (pmf[i] != 0.0)
            j[std::to_string(int(i) + first_key)] = pmf[i];
    return j;
}

} // namespace detail

// Parses a model document. Tabular offspring laws are normalized to p1 = 0.
inline ModelSpec model_from_json(const nlohmann::json& j) {
    ModelSpec spec;
    try {
        const auto& off = j.at("offspring");
        const auto type = off.at("type").get<std::string>();
        if (type == "tabular")
            spec.offspring = TabularOffspring{detail::read_pmf(off.at("pmf"), 0)};
        else if (type == "sibuya_mix")
            spec.offspring = SibuyaMixOffspring{off.at("p0").get<double>(), off.at("alpha").get<double>()};
        else
            throw PreconditionError("unknown offspring type \"" + type + "\"");
        spec.lambda = j.at("lambda").get<double>();
        spec.mu = j.value("mu", 0.0);
        if (j.contains("immigration")) {
            const auto& im = j.at("immigration");
            const auto itype = im.at("type").get<std::string>();
            if (itype == "none")
                spec.immigration = NoImmigration{};
            else if (itype == "tabular")
                spec.immigration = TabularImmigration{detail::read_pmf(im.at("pmf"), -1)};
            else if (itype == "sibuya")
                spec.immigration = SibuyaImmigration{im.at("alpha").get<double>()};
            else
                throw PreconditionError("unknown immigration type \"" + itype + "\"");
        }
    } catch (const nlohmann::json::exception& e) {
        throw PreconditionError(std::string("model document: ") + e.what());
    }
    if (auto t = std::get_if<TabularOffspring>(&spec.offspring);
        t && t->pmf.size() > 1 && t->pmf[1] > 0 && t->pmf[1] < 1)
        spec = normalize_remove_p1(spec);
    return spec;
}

inline nlohmann::ordered_json model_to_json(const ModelSpec& spec) {
    nlohmann::ordered_json j;
    if (auto t = std::get_if<TabularOffspring>(&spec.offspring)) {
        j["offspring"] = {{"type", "tabular"}, {"pmf", detail::write_pmf(t->pmf, 0)}};
    } else {
        const auto& s = std::get<SibuyaMixOffspring>(spec.offspring);
        j["offspring"] = {{"type", "sibuya_mix"}, {"p0", s.p0}, {"alpha", s.alpha}};
    }
    j["lambda"] = spec.lambda;
    if (auto t = std::get_if<TabularImmigration>(&spec.immigration))
        j["immigration"] = {{"type", "tabular"}, {"pmf", detail::write_pmf(t->pmf, -1)}};
    else if (auto s = std::get_if<SibuyaImmigration>(&spec.immigration))
        j["immigration"] = {{"type", "sibuya"}, {"alpha", s->alpha}};
    else
        j["immigration"] = {{"type", "none"}};
    j["mu"] = spec.mu;
    return j;
}

inline ModelSpec load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw PreconditionError("cannot open model file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw PreconditionError(path + ": " + e.what());
    }
    return model_from_json(j);
}

} // namespace bgw
