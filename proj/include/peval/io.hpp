#ifndef PEVAL_IO_HPP
#define PEVAL_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "peval/estimators.hpp"
#include "peval/policy.hpp"
#include "peval/pomdp.hpp"

namespace peval::io {

inline constexpr std::int64_t kFormatVersion = 1;

// ordered_json keeps key order stable, which the byte-identical-output
// guarantee relies on.
using json = nlohmann::ordered_json;

/// Parses JSON text; parse errors surface as io_error with origin:line:col.
json parse_string(const std::string& text, const std::string& origin);
json parse_file(const std::filesystem::path& path);

// --- model / policy / class / return-spec schemas -------------------------

Pomdp pomdp_from_json(const json& j, const std::string& origin);
json pomdp_to_json(const Pomdp& model);
Pomdp load_pomdp(const std::filesystem::path& path);
void save_pomdp(const Pomdp& model, const std::filesystem::path& path);

Policy policy_from_json(const json& j, const std::string& origin);
json policy_to_json(const Policy& p);
Policy load_policy(const std::filesystem::path& path);
void save_policy(const Policy& p, const std::filesystem::path& path);

/// Accepts an explicit member list or a softmax logit grid ("axes": each
/// axis varies one (context, action) logit over `steps` evenly spaced
/// values; members are the cartesian product).
PolicyClass policy_class_from_json(const json& j, const std::string& origin);
PolicyClass load_policy_class(const std::filesystem::path& path);

ReturnSpec return_spec_from_json(const json& j, const std::string& origin);
json return_spec_to_json(const ReturnSpec& spec);

// --- dataset (line-delimited histories) ------------------------------------

struct Dataset {
  SampleSet samples;
  std::optional<Policy> behavior;  // optionally embedded in the header line
};

/// One header object, then one JSON object per history:
/// {"o":[...],"a":[...],"r":[...],"bp":[...],"seed":...}. Doubles are
/// written with shortest round-trip formatting, so reload is bit-exact.
void write_dataset(const SampleSet& samples, const std::optional<Policy>& behavior, std::ostream& os);
void save_dataset(const SampleSet& samples, const std::optional<Policy>& behavior,
                  const std::filesystem::path& path);
Dataset read_dataset(std::istream& is, const std::string& origin);
Dataset load_dataset(const std::filesystem::path& path);

// --- reports ---------------------------------------------------------------

/// A report is a fixed, versioned column set plus rows; every row echoes
/// the inputs that produced it. CSV and JSON carry the same fields.
struct Report {
  std::string type;
  std::vector<std::string> columns;
  std::vector<json> rows;  // objects keyed by `columns`

  /// Starts a row with format_version and report_type filled in.
  json new_row() const;
};

void write_report_csv(const Report& report, std::ostream& os);
void write_report_json(const Report& report, std::ostream& os);
/// format is "csv" or "json"; empty path writes to stdout.
void save_report(const Report& report, const std::string& format, const std::string& path);

// --- typed field access with path diagnostics -------------------------------

const json& require_key(const json& j, const std::string& key, const std::string& origin);
double get_double(const json& j, const std::string& key, const std::string& origin);
std::int64_t get_int(const json& j, const std::string& key, const std::string& origin);
std::uint64_t get_uint64(const json& j, const std::string& key, const std::string& origin);
std::string get_string(const json& j, const std::string& key, const std::string& origin);
void check_format_version(const json& j, const std::string& origin);

}  // namespace peval::io

#endif
