#pragma once

#include "nht/models.hpp"
#include "nht/thresholds.hpp"
#include "nht/trapping.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nht {

using json = nlohmann::json;

// ---- schema validation (the subset of JSON Schema the shipped schemas use) ----

struct SchemaError {
    std::string pointer;  // JSON pointer into the document
    std::string message;
};

std::vector<SchemaError> validate_json(const json& schema, const json& doc);

const json& config_schema();
const json& certificate_schema();
const json& thresholds_schema();
const json& report_schema();

// Configuration problems carry the JSON pointer of the offending value.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& pointer, const std::string& msg)
        : std::runtime_error(pointer + ": " + msg), pointer_(pointer) {}
    const std::string& pointer() const { return pointer_; }

private:
    std::string pointer_;
};

// ---- configuration -------------------------------------------------------------

ModelBundle bundle_from_config(const json& model);
CertifyOptions certify_options_from(const json& options, std::uint64_t seed);

// ---- serialization ---------------------------------------------------------------

json to_json(const Vec& v);
json to_json(const TrappingCertificate& c, const ModelBundle& b);
json to_json(const ThresholdReport& r);
json to_json(const BThresholds& b);
json to_json(const DecayThreshold& d);
json to_json(const RadialBound& r);
json to_json(const KerrSaddleReport& k);
json to_json(const ClosedFredholm& c);
json to_json(const ThresholdInput& in);

// Quantities at the trapped component, with the model's mu and p1.
ThresholdInput threshold_input_from(const TrappingCertificate& c, const ModelBundle& b);
// From options.thresholds with from = manual.
ThresholdInput manual_threshold_input(const json& thresholds, const ModelBundle& b);

struct ThresholdBundle {
    json report;
    bool feasible = true;
    std::string verdict;
};

// Every applicable threshold operation on the input; `extra` is options.thresholds.
ThresholdBundle evaluate_thresholds(const ThresholdInput& in, const ModelBundle& b,
                                    const json& extra);

// Aligned text table of the conditions in a threshold report.
std::vector<std::string> threshold_table(const json& report);

// ---- portraits ----------------------------------------------------------------------

struct PortraitData {
    std::string kind;  // "r-t" or "theta-eta"
    std::string title;
    std::vector<std::vector<std::array<double, 2>>> curves;
    std::vector<std::array<double, 2>> gamma;   // trapped samples
    std::vector<std::array<double, 2>> radial;  // other invariant samples
};

std::string render_svg(const PortraitData& p);
// (x, y) of a phase point in the portrait plane
std::array<double, 2> portrait_coords(const ModelBundle& b, const std::string& kind, const Vec& z,
                                      double t);

// ---- runs ------------------------------------------------------------------------------

struct RunRequest {
    std::optional<std::string> config_path;
    std::optional<std::string> config_text;
    std::optional<std::string> task;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    bool quiet = true;
};

struct RunResult {
    int exit_code = 1;  // 0 success, 2 infeasible or inconclusive, 1 error
    std::string verdict;
    std::string error;
    std::string report;  // JSON text of the main report
    std::vector<std::string> written;
    std::vector<std::string> log;  // human-readable summary lines
};

RunResult run(const RunRequest& req);

const char* version_string();

}  // namespace nht
