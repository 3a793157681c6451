#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "neurashed/errors.hpp"
#include "neurashed/graph.hpp"

namespace neurashed {

struct Dataset {
    std::vector<InputPattern> patterns;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline Dataset parse_dataset(const std::string& text) {
    using nlohmann::json;
    json j = detail::parse_json(text);
    if (!j.is_object())
        fail(ErrorCode::MalformedDocument, "dataset document must be a JSON object");
    detail::reject_unknown_fields(j, {"patterns"}, "dataset document");
    if (!j.contains("patterns") || !j["patterns"].is_array())
        fail(ErrorCode::MalformedDocument, "dataset document needs a \"patterns\" array");

    Dataset ds;
    for (const auto& pj : j["patterns"]) {
        if (!pj.is_object())
            fail(ErrorCode::MalformedDocument, "pattern entries must be objects");
        detail::reject_unknown_fields(pj, {"fire", "label", "weight"}, "pattern entry");
        InputPattern p;
        if (!pj.contains("fire") || !pj["fire"].is_array() || pj["fire"].empty())
            fail(ErrorCode::MalformedDocument, "pattern needs a non-empty \"fire\" array");
        for (const auto& f : pj["fire"]) {
            if (!f.is_number_integer())
                fail(ErrorCode::MalformedDocument, "fire entries must be integers");
            p.fire.push_back(f.get<int>());
        }
        std::sort(p.fire.begin(), p.fire.end());
        p.label = detail::get_int(pj, "label", "pattern entry");
        if (p.label < 0)
            fail(ErrorCode::MalformedDocument, "label must be non-negative");
        if (pj.contains("weight")) {
            if (!pj["weight"].is_number())
                fail(ErrorCode::MalformedDocument, "weight must be a number");
            p.weight = pj["weight"].get<double>();
            if (!(p.weight > 0.0))
                fail(ErrorCode::MalformedDocument, "weight must be positive");
        }
        ds.patterns.push_back(std::move(p));
    }
    return ds;
}

inline std::string serialize_dataset(const Dataset& ds) {
    nlohmann::json j;
    j["patterns"] = nlohmann::json::array();
    for (const auto& p : ds.patterns) {
        nlohmann::json pj;
        pj["fire"] = p.fire;
        pj["label"] = p.label;
        if (p.weight != 1.0) pj["weight"] = p.weight;
        j["patterns"].push_back(pj);
    }
    return j.dump(2) + "\n";
}

// Checks every pattern against the graph: firing nodes on level 1, labels
// within 0..K-1 (check_input raises the named errors).
inline void validate_dataset(const Graph& g, const Dataset& ds) {
    if (ds.patterns.empty())
        fail(ErrorCode::EmptyDataset, "dataset has no patterns");
    for (const auto& p : ds.patterns)
        check_input(g, p);
}

} // namespace neurashed
