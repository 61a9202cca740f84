#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "edu/floor_sim.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stand-in for the interactive floor: sends segment presses to the hub", "floor-sim"};
  std::string hub;
  std::string script_path;
  bool interactive = false;
  int expect_timeout_ms = 5000;
  app.add_option("--hub", hub, "Hub WebSocket URL, e.g. ws://127.0.0.1:8080/ws")->required();
  auto* script_opt = app.add_option("--script", script_path, "Press script file");
  app.add_flag("--interactive", interactive, "Keys 1-4 press segments 0-3")->excludes(script_opt);
  app.add_option("--expect-timeout-ms", expect_timeout_ms, "Wait limit for 'expect feedback'")->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : edu::floor::exit_code::parse;
  }

  edu::floor::RunOptions options;
  options.hub_url = hub;
  options.expect_timeout = std::chrono::milliseconds(expect_timeout_ms);
  options.transcript_out = &std::cout;
  options.err = &std::cerr;

  if (script_path.empty() || interactive) {
    return edu::floor::run_interactive(std::cin, options).exit_code;
  }

  std::ifstream in(script_path);
  if (!in) {
    std::cerr << "cannot read script " << script_path << "\n";
    return edu::floor::exit_code::parse;
  }
  std::stringstream text;
  text << in.rdbuf();
  auto script = edu::floor::parse_script(text.str());
  if (!script) {
    std::cerr << script_path << ":" << script.error().line << ": " << script.error().reason << "\n";
    return edu::floor::exit_code::parse;
  }
  return edu::floor::run_script(*script, options).exit_code;
}
