#pragma once

#include <string>

#include <json.hpp>

namespace pita {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

/// Built-in defaults for a command's resolved configuration.
nlohmann::json default_config(const std::string& command);

/// Named preset patch (pita-rec, pita-phy, paper-scale, desk-scale).
nlohmann::json preset_patch(const std::string& name);

/// Synthesizes a dataset CSV plus manifest from a resolved generate config.
void run_generate(const nlohmann::json& config);

/// Ingests, preprocesses and trains one variant; writes checkpoint, training
/// log and config echo.
void run_train(const nlohmann::json& config);

/// Evaluates checkpoints on the validation split; writes the JSON report and
/// the four boxplot SVGs.
void run_eval(const nlohmann::json& config);

/// Dispatches on config["command"]; exceptions map to exit codes in main.
void run_command(const nlohmann::json& config);

/// Maps an in-flight exception to the tool's exit code convention.
int exit_code_for_current_exception();

}  // namespace pita
