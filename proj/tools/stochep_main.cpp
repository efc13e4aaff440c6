// Command-line front end: one subcommand per experiment plus `run` (experiment
// taken from the config file) and `audit`.
//
// Exit status: 0 all checks pass, 1 a check failed, 2 invalid config,
// 3 numerical blow-up, 4 I/O or other runtime error.

#include "stochep/errors.hpp"
#include "stochep/experiments.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

nlohmann::json load_json(const std::string& path)
{
  std::ifstream is(path);
  if (!is) throw stochep::ConfigError("config: cannot open " + path);
  try
  {
    return nlohmann::json::parse(is);
  }
  catch (const nlohmann::json::parse_error& e)
  {
    throw stochep::ConfigError(std::string("config: ") + e.what());
  }
}

struct RunArgs
{
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int run_experiment(const std::string& experiment, const RunArgs& args)
{
  nlohmann::json doc = nlohmann::json::object();
  if (!args.config_path.empty()) doc = load_json(args.config_path);
  if (!experiment.empty())
  {
    nlohmann::json& target = doc.contains("schema_version") && doc.contains("config") ? doc["config"] : doc;
    if (target.contains("experiment") && target["experiment"] != experiment)
    {
      const auto& given = target["experiment"];
      throw stochep::ConfigError("experiment: config is for " + given.dump() + ", not \"" + experiment + "\"");
    }
    target["experiment"] = experiment;
  }
  stochep::ExperimentConfig config = stochep::parse_config(doc);
  if (args.seed)
  {
    config.parameters["seed"] = *args.seed;
    config = stochep::resolve(std::move(config));
  }
  if (!args.out.empty()) config.output_dir = args.out;

  const auto out = stochep::run(config);
  for (const auto& c : out.checks)
    std::cout << (c.pass ? "pass " : "FAIL ") << c.name << " value=" << c.value << " tolerance=" << c.tolerance
              << '\n';
  std::cout << "artifacts written to " << config.output_dir << '\n';
  return out.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Stochastic Euler-Poincare reduction: experiments and invariant audit"};
  app.require_subcommand(1);

  RunArgs args;
  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "JSON config or a previous run's manifest.json");
    sub->add_option("--seed", args.seed, "Override parameters.seed");
    sub->add_option("--out", args.out, "Output directory (overrides output_dir)");
  };

  std::string selected;
  auto* generic = app.add_subcommand("run", "Run the experiment named in --config");
  add_run_options(generic);
  generic->callback([&] { selected = "run"; });
  for (const auto& name : stochep::experiment_names())
  {
    auto* sub = app.add_subcommand(name, "Run the " + name + " experiment");
    add_run_options(sub);
    sub->callback([&selected, name] { selected = name; });
  }

  bool inject_fault = false;
  auto* audit = app.add_subcommand("audit", "Run every invariant with default settings and print a table");
  audit->add_flag("--inject-ad-sign-fault", inject_fault, "Negate the so(3) bracket after building the connection");
  audit->callback([&] { selected = "audit"; });

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    return app.exit(e);
  }

  try
  {
    if (selected == "audit")
    {
      stochep::AuditOptions options;
      options.flip_ad_sign = inject_fault;
      const auto rows = stochep::audit(options);
      std::cout << stochep::format_audit(rows);
      for (const auto& r : rows)
        if (!r.pass) return 1;
      return 0;
    }
    if (selected == "run" && args.config_path.empty())
      throw stochep::ConfigError("config: `run` requires --config");
    return run_experiment(selected == "run" ? std::string() : selected, args);
  }
  catch (const stochep::NumericalBlowup& e)
  {
    std::cerr << stochep::error_line("numerical_blowup", e.what(), e.step()) << '\n';
    return 3;
  }
  catch (const std::invalid_argument& e)
  {
    std::cerr << stochep::error_line("invalid_config", e.what()) << '\n';
    return 2;
  }
  catch (const std::exception& e)
  {
    std::cerr << stochep::error_line("runtime_error", e.what()) << '\n';
    return 4;
  }
}
