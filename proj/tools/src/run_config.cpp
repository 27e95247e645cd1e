#include "run_config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace eqstop::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  std::ostringstream os;
  os << "config: " << key << ": expected " << want << ", got '" << value << "'";
  throw ConfigError(os.str());
}

std::uint64_t parse_unsigned(std::string_view text, std::string_view key) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size())
    bad_value(key, text, "a non-negative integer");
  return v;
}

std::vector<double> parse_list(std::string_view text, std::string_view key) {
  std::vector<double> out;
  if (text.empty()) return out;
  for (;;) {
    const auto comma = text.find(',');
    out.push_back(parse_double(trim(text.substr(0, comma)), key));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_double(v[i]);
  }
  return s;
}

// Written by `solve`; accepted so its output can be re-ingested.
const std::set<std::string, std::less<>> kSolutionKeys = {
    "regime", "xlow", "xbar",  "push", "threshold", "lambda_at_xlow", "alpha1", "alpha2",
    "a1",     "b1",   "a2",    "b2",   "D1",        "D2",             "regime_lhs", "regime_rhs"};

void apply(RunConfig& c, std::string_view key, std::string_view v) {
  if (key == "sigma2") c.problem.sigma2 = parse_double(v, key);
  else if (key == "K") c.problem.strike = parse_double(v, key);
  else if (key == "p") c.problem.p = parse_double(v, key);
  else if (key == "r1") c.problem.r1 = parse_double(v, key);
  else if (key == "r2") c.problem.r2 = parse_double(v, key);
  else if (key == "grid") c.grid = parse_unsigned(v, key);
  else if (key == "x_min") c.x_min = parse_double(v, key);
  else if (key == "x_max") c.x_max = parse_double(v, key);
  else if (key == "dt") c.dt = parse_double(v, key);
  else if (key == "paths") c.paths = parse_unsigned(v, key);
  else if (key == "seed") c.seed = parse_unsigned(v, key);
  else if (key == "t_max") c.t_max = parse_double(v, key);
  else if (key == "tail_mode") {
    if (v == "analytic") c.tail_mode = pathsim::TailMode::AnalyticCorrection;
    else if (v == "truncate") c.tail_mode = pathsim::TailMode::Truncate;
    else bad_value(key, v, "analytic or truncate");
  } else if (key == "eval_states") c.eval_states = parse_list(v, key);
  else if (key == "h_list") c.h_list = parse_list(v, key);
  else if (key == "x") c.x = parse_double(v, key);
  else if (key == "format") {
    if (v == "kv") c.format = OutputFormat::Kv;
    else if (v == "json") c.format = OutputFormat::Json;
    else bad_value(key, v, "kv or json");
  } else if (key == "out") c.out = std::string(v);
  else if (key == "candidate") {
    if (v == "equilibrium") c.candidate = Candidate::Equilibrium;
    else if (v == "pure") c.candidate = Candidate::ForcePure;
    else if (v == "mixed") c.candidate = Candidate::ForceMixed;
    else bad_value(key, v, "equilibrium, pure or mixed");
  } else if (kSolutionKeys.count(key) == 0) {
    throw ConfigError("config: unknown key '" + std::string(key) + "'");
  }
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view text, std::string_view key) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v))
    bad_value(key, text, "a finite number");
  return v;
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos)
      throw ConfigError("config: line " + std::to_string(line_no) + ": expected 'key: value'");
    const auto key = trim(line.substr(0, colon));
    const auto value = trim(line.substr(colon + 1));
    if (!seen.emplace(key).second)
      throw ConfigError("config: duplicate key '" + std::string(key) + "'");
    apply(base, key, value);
  }
  return base;
}

std::string write_config(const RunConfig& c) {
  std::ostringstream os;
  os << "sigma2: " << format_double(c.problem.sigma2) << '\n'
     << "K: " << format_double(c.problem.strike) << '\n'
     << "p: " << format_double(c.problem.p) << '\n'
     << "r1: " << format_double(c.problem.r1) << '\n'
     << "r2: " << format_double(c.problem.r2) << '\n'
     << "grid: " << c.grid << '\n';
  if (c.x_min) os << "x_min: " << format_double(*c.x_min) << '\n';
  if (c.x_max) os << "x_max: " << format_double(*c.x_max) << '\n';
  if (c.dt) os << "dt: " << format_double(*c.dt) << '\n';
  os << "paths: " << c.paths << '\n'
     << "seed: " << c.seed << '\n'
     << "t_max: " << format_double(c.t_max) << '\n'
     << "tail_mode: "
     << (c.tail_mode == pathsim::TailMode::Truncate ? "truncate" : "analytic") << '\n'
     << "eval_states: " << join(c.eval_states) << '\n'
     << "h_list: " << join(c.h_list) << '\n'
     << "x: " << format_double(c.x) << '\n'
     << "format: " << (c.format == OutputFormat::Json ? "json" : "kv") << '\n';
  if (!c.out.empty()) os << "out: " << c.out << '\n';
  os << "candidate: "
     << (c.candidate == Candidate::ForcePure    ? "pure"
         : c.candidate == Candidate::ForceMixed ? "mixed"
                                                : "equilibrium")
     << '\n';
  return os.str();
}

std::string Document::render(OutputFormat fmt) const {
  if (fmt == OutputFormat::Json) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : entries_)
      std::visit([&, &key = k](const auto& x) { j[key] = x; }, v);
    return j.dump(2) + "\n";
  }
  std::ostringstream os;
  for (const auto& [k, v] : entries_) {
    os << k << ": ";
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, double>) os << format_double(x);
          else if constexpr (std::is_same_v<T, bool>) os << (x ? "true" : "false");
          else os << x;
        },
        v);
    os << '\n';
  }
  return os.str();
}

}  // namespace eqstop::cli
