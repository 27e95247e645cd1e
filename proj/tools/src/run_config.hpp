#pragma once

// Flat "key: value" run configuration shared by every subcommand.
//
// One entry per line, '#' starts a comment, blank lines are ignored. Lists
// are comma separated. Unknown and repeated keys are rejected. Keys written
// by `eqstop solve` are accepted and ignored so a solution document can be
// fed back in as a configuration.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "eqstop/pathsim.hpp"
#include "eqstop/stopcore.hpp"

namespace eqstop::cli {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class OutputFormat { Kv, Json };
enum class Candidate { Equilibrium, ForcePure, ForceMixed };

struct RunConfig {
  RealOptionProblem problem{0.2, 3.0, 0.5, 0.2, 2.0};
  std::size_t grid = 2001;
  std::optional<double> x_min;
  std::optional<double> x_max;
  std::optional<double> dt;
  std::size_t paths = 10000;
  std::uint64_t seed = 20240611;
  double t_max = 0.0;
  pathsim::TailMode tail_mode = pathsim::TailMode::AnalyticCorrection;
  std::vector<double> eval_states;
  std::vector<double> h_list{0.2, 0.1, 0.05};
  double x = 2.0;
  OutputFormat format = OutputFormat::Kv;
  std::string out;
  Candidate candidate = Candidate::Equilibrium;

  bool operator==(const RunConfig&) const = default;
};

/// Applies the entries of `text` on top of `base`. Throws ConfigError.
RunConfig parse_config(std::string_view text, RunConfig base = {});

/// Every field, in a form parse_config reads back to an equal RunConfig.
std::string write_config(const RunConfig& cfg);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Strict full-string parse; throws ConfigError naming `key`.
double parse_double(std::string_view text, std::string_view key);

// ---------------------------------------------------------------------------
// Output documents
// ---------------------------------------------------------------------------

using Value = std::variant<std::string, double, bool, std::int64_t>;

/// Ordered flat key-value document, rendered as "key: value" lines or as a
/// JSON object.
class Document {
 public:
  Document& add(std::string key, Value v) {
    entries_.emplace_back(std::move(key), std::move(v));
    return *this;
  }
  Document& add(std::string key, const char* v) { return add(std::move(key), Value(std::string(v))); }
  const std::vector<std::pair<std::string, Value>>& entries() const { return entries_; }
  std::string render(OutputFormat fmt) const;

 private:
  std::vector<std::pair<std::string, Value>> entries_;
};

}  // namespace eqstop::cli
