#include <iostream>
#include <map>
#include <memory>

#include <CLI11.hpp>

#include "caire/pipeline/pipeline.hpp"

namespace pl = caire::pipeline;

namespace {

struct Sub {
  pl::Command command;
  CLI::App* app = nullptr;
  std::string config;
  std::map<std::string, std::string> flags;
};

const char* describe(pl::Command c) {
  switch (c) {
    case pl::Command::kSimulate: return "Generate a synthetic cohort with known causal motifs";
    case pl::Command::kTrain: return "Fit a model variant (single run or cross-validated ensemble)";
    case pl::Command::kEstimate: return "Score candidate sequences with a trained model or ensemble";
    case pl::Command::kEvaluate: return "Compare methods on held-out patients and write a report";
    case pl::Command::kReport: return "Re-render figures from a metrics directory";
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal attribution of immune receptor sequences"};
  app.require_subcommand(1);

  std::vector<std::unique_ptr<Sub>> subs;
  for (auto c : {pl::Command::kSimulate, pl::Command::kTrain, pl::Command::kEstimate, pl::Command::kEvaluate,
                 pl::Command::kReport}) {
    auto sub = std::make_unique<Sub>();
    sub->command = c;
    sub->app = app.add_subcommand(std::string(pl::to_string(c)), describe(c));
    sub->app->add_option("--config", sub->config, "key = value settings file (flags take precedence)");
    const pl::Settings defaults(c);
    for (const auto& [key, def] : defaults.values()) {
      auto* opt = sub->app->add_option("--" + key, sub->flags[key]);
      if (!def.empty()) opt->description("default: " + def);
    }
    subs.push_back(std::move(sub));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (const auto& sub : subs) {
    if (!sub->app->parsed()) continue;
    pl::Settings settings(sub->command);
    try {
      if (!sub->config.empty()) settings.apply_file(sub->config);
      for (const auto& [key, value] : sub->flags)
        if (sub->app->count("--" + key) > 0) settings.set(key, value, pl::Provenance::kFlag);
    } catch (const caire::Error& e) {
      std::cerr << "usage error: " << e.what() << '\n';
      return 2;
    }
    return pl::run_command(settings, std::cout, std::cerr);
  }
  return 2;
}
