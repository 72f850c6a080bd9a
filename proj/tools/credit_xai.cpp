// credit_xai: command line front end for the cxai pipeline.
//
// Exit status: 0 ok, 1 internal error, 2 usage or contract error. Errors are
// reported as one line on stderr.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cxai/pipeline.hpp"

namespace {

int exit_code_for(cxai::ErrorCode c) {
  switch (c) {
    case cxai::ErrorCode::SingularHessian: return 1;
    default: return 2;
  }
}

void fail_line(std::string_view code, std::string_view message) {
  std::string flat(message);
  for (auto& ch : flat) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  if (code.empty()) {
    std::fprintf(stderr, "error: %s\n", flat.c_str());
  } else {
    std::fprintf(stderr, "error: %.*s: %s\n", static_cast<int>(code.size()), code.data(), flat.c_str());
  }
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Credit scoring models with explanations"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir = "run";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool verbose = false;
  app.add_option("--config", config_path, "run configuration (JSON, comments allowed)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed, overrides the config");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 1024))->capture_default_str();
  app.add_flag("--verbose", verbose, "log progress to stderr");

  cxai::SynthParams synth;
  auto* c_synth = app.add_subcommand("synth", "write a synthetic credit data set");
  c_synth->add_option("--rows", synth.n_rows)->capture_default_str();
  c_synth->add_option("--informative", synth.n_informative)->capture_default_str();
  c_synth->add_option("--noise", synth.n_noise)->capture_default_str();
  c_synth->add_option("--categorical", synth.n_categorical)->capture_default_str();
  c_synth->add_option("--constant", synth.n_constant)->capture_default_str();
  c_synth->add_option("--drift", synth.drift)->capture_default_str();
  c_synth->add_option("--missing-rate", synth.missing_rate)->capture_default_str();

  std::string data_override;
  auto* c_split = app.add_subcommand("split", "temporal split and train-only preprocessing");
  c_split->add_option("--data", data_override, "input CSV, overrides the config");

  auto* c_select = app.add_subcommand("select", "feature selection on the training partition");

  std::vector<std::string> families;
  std::string features_file;
  auto* c_train = app.add_subcommand("train", "train, tune and score models");
  c_train->add_option("--family", families, "logistic, woe_logistic, rf, gbm or xgb (repeatable)");
  c_train->add_option("--features", features_file, "feature list, one per line (default: selection output)")
      ->check(CLI::ExistingFile);

  std::string model_arg, predict_data, predict_output;
  auto* c_predict = app.add_subcommand("predict", "score a CSV with a trained model");
  c_predict->add_option("--model", model_arg, "model name or model file")->required();
  c_predict->add_option("--data", predict_data, "CSV to score")->required()->check(CLI::ExistingFile);
  c_predict->add_option("--output", predict_output, "output CSV (default <out>/predictions/<model>.csv)");

  cxai::ExplainRequest req;
  std::string order = "greedy";
  auto* c_explain = app.add_subcommand("explain", "PFI, PDP, ceteris paribus or Break Down");
  c_explain->add_option("--what,--method", req.method, "pfi, pdp, pdp2, cp or bd")
      ->required()
      ->check(CLI::IsMember({"pfi", "pdp", "pdp2", "cp", "bd"}));
  c_explain->add_option("--model", req.models, "model name or file (pdp takes several)")->required();
  c_explain->add_option("--feature", req.features, "feature to profile (repeatable)");
  c_explain->add_option("--instance", req.instance, "row of the explained split")->capture_default_str();
  c_explain->add_option("--order", order, "greedy or a comma-separated feature list")->capture_default_str();
  c_explain->add_option("--split", req.split, "partition to explain (default from config)");

  auto* c_report = app.add_subcommand("report", "comparison table, dot plot and rejections");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail_line("Usage", e.what());
    return 2;
  }

  cxai::warning_sink() = [](std::string_view msg) {
    std::fprintf(stderr, "warning: %.*s\n", static_cast<int>(msg.size()), msg.data());
  };

  try {
    cxai::RunContext ctx;
    if (!config_path.empty()) ctx.config = cxai::load_config(config_path);
    if (seed) {
      ctx.config.seed = *seed;
      ctx.config.split.seed = *seed;
    }
    ctx.out = out_dir;
    ctx.threads = threads;
    ctx.verbose = verbose;

    if (*c_synth) {
      synth.seed = ctx.config.seed;
      std::cout << cxai::cmd_synth(ctx, synth).string() << '\n';
    } else if (*c_split) {
      if (!data_override.empty()) ctx.config.data_path = data_override;
      const auto s = cxai::cmd_split(ctx);
      for (const auto& [name, n] : s.rows) std::cout << name << ' ' << n << " rows, " << s.bad.at(name) << " bad\n";
    } else if (*c_select) {
      const auto r = cxai::cmd_select(ctx);
      std::cout << r.input.size() << " features in, " << r.preselection.selected.size() << " preselected, "
                << r.survivors().size() << " kept\n";
    } else if (*c_train) {
      for (const auto& m : cxai::cmd_train(ctx, families, features_file)) {
        const auto g = m.report.gini_of("test");
        std::cout << m.name << " test Gini " << (g ? cxai::csv::format_double(*g) : "n/a") << '\n';
      }
    } else if (*c_predict) {
      std::cout << cxai::cmd_predict(ctx, model_arg, predict_data, predict_output).string() << '\n';
    } else if (*c_explain) {
      if (order != "greedy") req.order = split_commas(order);
      std::cout << cxai::cmd_explain(ctx, req).string() << '\n';
    } else if (*c_report) {
      for (const auto& d : cxai::cmd_report(ctx)) {
        std::cout << d.model_name << (d.rejected ? " rejected: " + d.reason : " accepted") << '\n';
      }
    }
  } catch (const cxai::Error& e) {
    // what() already reads "<code>: <message>".
    fail_line("", e.what());
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    fail_line("BadInput", e.what());
    return 2;
  } catch (const std::exception& e) {
    fail_line("internal", e.what());
    return 1;
  }
  return 0;
}
