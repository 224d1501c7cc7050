#pragma once
#include <json.hpp>
#include <string>

// Minimal structural validator for the subset of JSON Schema the report
// schema uses: type, required, properties, items, enum.
namespace hdtest {

inline bool type_matches(const nlohmann::json& value, const std::string& type) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "boolean") return value.is_boolean();
    if (type == "integer") return value.is_number_integer() || value.is_number_unsigned();
    if (type == "number") return value.is_number();
    return false;
}

inline bool validate_schema(const nlohmann::json& schema, const nlohmann::json& value,
                            std::string& error, const std::string& path = "$") {
    if (schema.contains("type") && schema["type"].is_string()) {
        if (!type_matches(value, schema["type"].get<std::string>())) {
            error = path + ": expected " + schema["type"].get<std::string>();
            return false;
        }
    }
    if (schema.contains("enum")) {
        bool hit = false;
        for (const auto& candidate : schema["enum"])
            if (candidate == value) hit = true;
        if (!hit) {
            error = path + ": value not in enum";
            return false;
        }
    }
    if (value.is_object()) {
        if (schema.contains("required"))
            for (const auto& req : schema["required"])
                if (!value.contains(req.get<std::string>())) {
                    error = path + ": missing required field '" + req.get<std::string>() +
                            "'";
                    return false;
                }
        if (schema.contains("properties"))
            for (auto it = schema["properties"].begin(); it != schema["properties"].end();
                 ++it)
                if (value.contains(it.key()) &&
                    !validate_schema(it.value(), value[it.key()], error,
                                     path + "." + it.key()))
                    return false;
    }
    if (value.is_array() && schema.contains("items")) {
        for (std::size_t i = 0; i < value.size(); ++i)
            if (!validate_schema(schema["items"], value[i], error,
                                 path + "[" + std::to_string(i) + "]"))
                return false;
    }
    return true;
}

}  // namespace hdtest
