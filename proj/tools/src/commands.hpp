#pragma once

#include <iosfwd>
#include <string>
#include <string_view>

#include "eqstop/closedform.hpp"
#include "eqstop/verifier.hpp"
#include "run_config.hpp"

namespace eqstop::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitInvalidInput = 2;
inline constexpr int kExitNumerical = 3;

struct CommandResult {
  int exit_code = kExitOk;
  std::string output;  // document or CSV
  std::string error;   // diagnostic for stderr
};

/// Candidate selected by cfg.candidate (the equilibrium unless forced).
closedform::EquilibriumSolution select_solution(const RunConfig& cfg);

/// All checks behind `verify`: conditions (I)-(IV), the generator
/// reduction, continuity, the ODE and jump residuals and the FD comparison.
bool verification_passed(const verifier::ConditionReport& rep, double strike);

Document cmd_solve(const RunConfig& cfg);
Document cmd_classify(const RunConfig& cfg);
Document cmd_verify(const RunConfig& cfg, bool& passed);
std::string cmd_simulate(const RunConfig& cfg);
std::string cmd_figure(const RunConfig& cfg);
std::string cmd_diagnostics(const RunConfig& cfg);

/// Runs a subcommand by name and maps failures to exit codes:
/// 1 failed verification, 2 invalid input, 3 numerical failure.
CommandResult run_command(std::string_view name, const RunConfig& cfg);

/// Full command line: parsing, config file, flag overrides, dispatch and
/// output. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eqstop::cli
