#include "nht/run.hpp"

#include <cmath>

namespace nht {

namespace {

#include "nht_schemas.inc"

std::string escape_token(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out += c;
    }
    return out;
}

std::string type_of(const json& v) {
    if (v.is_null()) return "null";
    if (v.is_boolean()) return "boolean";
    if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
    if (v.is_number_float()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array";
    return "object";
}

bool has_type(const json& v, const std::string& t) {
    if (t == "number") return v.is_number();
    if (t == "integer") {
        if (v.is_number_integer() || v.is_number_unsigned()) return true;
        if (v.is_number_float()) {
            double d = v.get<double>();
            return std::isfinite(d) && d == std::floor(d);
        }
        return false;
    }
    return type_of(v) == t;
}

class Validator {
public:
    explicit Validator(const json& root) : root_(root) {}

    void check(const json& s, const json& v, const std::string& ptr,
               std::vector<SchemaError>& errs) const {
        if (s.is_boolean()) {
            if (!s.get<bool>()) errs.push_back({ptr, "value not allowed"});
            return;
        }
        if (s.contains("$ref")) {
            check(resolve(s["$ref"].get<std::string>()), v, ptr, errs);
            return;
        }
        if (s.contains("type")) {
            const json& t = s["type"];
            bool ok = false;
            if (t.is_string()) ok = has_type(v, t.get<std::string>());
            else
                for (const auto& x : t) ok = ok || has_type(v, x.get<std::string>());
            if (!ok) {
                errs.push_back({ptr, "expected " + (t.is_string() ? t.get<std::string>() : t.dump()) +
                                         ", got " + type_of(v)});
                return;
            }
        }
        if (s.contains("const") && v != s["const"])
            errs.push_back({ptr, "expected " + s["const"].dump()});
        if (s.contains("enum")) {
            bool ok = false;
            for (const auto& e : s["enum"]) ok = ok || e == v;
            if (!ok) errs.push_back({ptr, "must be one of " + s["enum"].dump()});
        }
        if (v.is_number()) {
            const double d = v.get<double>();
            if (s.contains("minimum") && d < s["minimum"].get<double>())
                errs.push_back({ptr, "must be >= " + s["minimum"].dump()});
            if (s.contains("maximum") && d > s["maximum"].get<double>())
                errs.push_back({ptr, "must be <= " + s["maximum"].dump()});
            if (s.contains("exclusiveMinimum") && !(d > s["exclusiveMinimum"].get<double>()))
                errs.push_back({ptr, "must be > " + s["exclusiveMinimum"].dump()});
        }
        if (v.is_string() && s.contains("minLength") &&
            v.get<std::string>().size() < s["minLength"].get<std::size_t>())
            errs.push_back({ptr, "string too short"});
        if (v.is_array()) {
            if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>())
                errs.push_back({ptr, "needs at least " + s["minItems"].dump() + " items"});
            if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>())
                errs.push_back({ptr, "allows at most " + s["maxItems"].dump() + " items"});
            if (s.contains("items"))
                for (std::size_t i = 0; i < v.size(); ++i)
                    check(s["items"], v[i], ptr + "/" + std::to_string(i), errs);
        }
        if (v.is_object()) {
            if (s.contains("required"))
                for (const auto& r : s["required"]) {
                    const std::string k = r.get<std::string>();
                    if (!v.contains(k)) errs.push_back({ptr + "/" + escape_token(k), "required"});
                }
            const json* props = s.contains("properties") ? &s["properties"] : nullptr;
            for (auto it = v.begin(); it != v.end(); ++it) {
                const std::string p = ptr + "/" + escape_token(it.key());
                if (props && props->contains(it.key())) {
                    check((*props)[it.key()], it.value(), p, errs);
                } else if (s.contains("additionalProperties")) {
                    const json& ap = s["additionalProperties"];
                    if (ap.is_boolean() && !ap.get<bool>()) errs.push_back({p, "unknown key"});
                    else check(ap, it.value(), p, errs);
                }
            }
        }
        if (s.contains("oneOf")) one_of(s["oneOf"], v, ptr, errs);
    }

private:
    const json& resolve(const std::string& ref) const {
        if (ref.rfind("#", 0) != 0) throw std::invalid_argument("remote $ref unsupported: " + ref);
        return root_.at(json::json_pointer(ref.substr(1)));
    }

    // A branch whose "kind" const matches is reported alone; it makes errors readable.
    void one_of(const json& branches, const json& v, const std::string& ptr,
                std::vector<SchemaError>& errs) const {
        int matches = 0;
        std::vector<SchemaError> keyed;
        bool have_keyed = false;
        for (const auto& b0 : branches) {
            const json& b = b0.contains("$ref") ? resolve(b0["$ref"].get<std::string>()) : b0;
            std::vector<SchemaError> e;
            check(b, v, ptr, e);
            if (e.empty()) ++matches;
            if (v.is_object() && v.contains("kind") && b.contains("properties") &&
                b["properties"].contains("kind") && b["properties"]["kind"].contains("const") &&
                b["properties"]["kind"]["const"] == v["kind"]) {
                keyed = e;
                have_keyed = true;
            }
        }
        if (matches == 1) return;
        if (have_keyed && !keyed.empty()) {
            errs.insert(errs.end(), keyed.begin(), keyed.end());
            return;
        }
        if (matches == 0) {
            if (v.is_object() && v.contains("kind"))
                errs.push_back({ptr + "/kind", "unknown kind " + v["kind"].dump()});
            else errs.push_back({ptr, "matches none of the allowed forms"});
        } else {
            errs.push_back({ptr, "matches more than one allowed form"});
        }
    }

    const json& root_;
};

}  // namespace

std::vector<SchemaError> validate_json(const json& schema, const json& doc) {
    std::vector<SchemaError> errs;
    Validator(schema).check(schema, doc, "", errs);
    return errs;
}

const json& config_schema() {
    static const json s = json::parse(kConfigSchema);
    return s;
}

const json& certificate_schema() {
    static const json s = json::parse(kCertificateSchema);
    return s;
}

const json& thresholds_schema() {
    static const json s = json::parse(kThresholdsSchema);
    return s;
}

const json& report_schema() {
    static const json s = json::parse(kReportSchema);
    return s;
}

}  // namespace nht
