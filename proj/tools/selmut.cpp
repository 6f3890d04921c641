// selmut: command line front end for scenario files.
//
//   selmut simulate    scenario.json --out DIR
//   selmut analyze     scenario.json --out DIR
//   selmut equilibrium scenario.json --out DIR
//   selmut sweep       scenario.json --param kernel.eps --values 0.1,0.05 --out DIR
//
// Exit codes: 0 success, 2 invalid input, 3 numeric failure.
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "selmut/scenario.hpp"

namespace {

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument(item);
    out.push_back(v);
  }
  return out;
}

int report(int code, const std::string& message, const selmut::Json& detail) {
  if (code == selmut::kExitValidation) {
    std::cerr << "invalid input:\n";
    if (detail.contains("issues"))
      for (const auto& issue : detail["issues"]) std::cerr << "  " << issue.get<std::string>() << '\n';
    else
      std::cerr << "  " << message << '\n';
  } else if (code == selmut::kExitNumeric) {
    std::cerr << "numeric failure: " << message << '\n';
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selection-mutation dynamics on finite strategy spaces"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::string param;
  std::string values;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("scenario", scenario, "Scenario JSON file")->required();
    sub->add_option("-o,--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Seed for random initial measures")->capture_default_str();
  };
  auto* simulate = app.add_subcommand("simulate", "Integrate the scenario and write the trajectory");
  auto* analyze = app.add_subcommand("analyze", "Integrate and run every requested analysis");
  auto* equilibrium = app.add_subcommand("equilibrium", "Solve for equilibria and run continuation requests");
  auto* sweep_cmd = app.add_subcommand("sweep", "Repeat a scenario over a list of parameter values");
  for (auto* sub : {simulate, analyze, equilibrium, sweep_cmd}) add_common(sub);
  std::string sweep_mode = "analyze";
  sweep_cmd->add_option("--param", param, "kernel.eps, initial.total or model.<field>")->required();
  sweep_cmd->add_option("--values", values, "Comma-separated values")->required();
  sweep_cmd->add_option("--mode", sweep_mode, "Command run for each value")
      ->check(CLI::IsMember({"simulate", "analyze", "equilibrium"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : selmut::kExitValidation;
  }

  auto to_command = [](const std::string& name) {
    if (name == "simulate") return selmut::Command::Simulate;
    if (name == "equilibrium") return selmut::Command::Equilibrium;
    return selmut::Command::Analyze;
  };

  try {
    if (sweep_cmd->parsed()) {
      std::vector<double> list;
      try {
        list = parse_values(values);
      } catch (const std::exception&) {
        return report(selmut::kExitValidation, "--values must be a comma-separated list of numbers", {});
      }
      const auto out = selmut::sweep(scenario, param, list, to_command(sweep_mode), out_dir, seed);
      if (out.exit_code == selmut::kExitOk) std::cout << "wrote " << out_dir << "/sweep.csv\n";
      return report(out.exit_code, out.message.empty() ? "one or more runs failed" : out.message, out.report);
    }
    const auto* sub = app.get_subcommands().front();
    const auto out = selmut::run_scenario_file(scenario, to_command(sub->get_name()), out_dir, seed);
    for (const auto& f : out.files) std::cout << "wrote " << f.string() << '\n';
    return report(out.exit_code, out.message, out.report);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return selmut::kExitNumeric;
  }
}
