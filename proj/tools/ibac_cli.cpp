#include "ibac/ibac.h"

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

namespace {

int exit_code(ibac_status s) {
  switch (s) {
    case IBAC_OK: return 0;
    case IBAC_ERR_CONFIG:
    case IBAC_ERR_INVALID_ARGUMENT: return 2;
    case IBAC_ERR_DIVERGENCE: return 3;
    case IBAC_ERR_PARTIAL: return 4;
    default: return 1;
  }
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent action models with an information bottleneck: data, training, alignment analysis"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Print nothing on success");

  std::string config, out, data, checkpoint, input, head_kind = "direct", m_text;
  std::optional<std::uint64_t> seed;
  bool identity = false;

  auto* gen = app.add_subcommand("gen", "Generate a transition dataset");
  gen->add_option("-c,--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  gen->add_option("-o,--out", out, "Dataset file to write")->required();
  gen->add_option("-s,--seed", seed, "Override env.seed");

  auto* train = app.add_subcommand("train", "Train a latent model on a dataset");
  train->add_option("-c,--config", config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("-d,--data", data, "Dataset file")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--out", out, "Output directory (default: config out_dir)");
  train->add_option("-s,--seed", seed, "Override train.seed");

  auto* analyze = app.add_subcommand("analyze", "Latent/action alignment report");
  analyze->add_option("-m,--checkpoint", checkpoint, "Model checkpoint");
  analyze->add_option("-d,--data", data, "Dataset file")->required()->check(CLI::ExistingFile);
  analyze->add_option("-c,--config", config, "Run config supplying the binning")->check(CLI::ExistingFile);
  analyze->add_option("-o,--out", out, "Output directory")->required();
  analyze->add_flag("--identity", identity, "Debug: use the true actions as latents");

  auto* sweep = app.add_subcommand("sweep", "Run a beta/offset/seed grid");
  sweep->add_option("-c,--config", config, "Sweep config (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("-o,--out", out, "Output directory (default: config out_dir)");
  sweep->add_option("-s,--seed", seed, "Override the base train.seed");

  auto* head = app.add_subcommand("head", "Fit and evaluate a few-shot action head");
  head->add_option("-m,--checkpoint", checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  head->add_option("-d,--data", data, "Dataset file")->required()->check(CLI::ExistingFile);
  head->add_option("-c,--config", config, "Run config supplying the head section")->check(CLI::ExistingFile);
  head->add_option("-k,--kind", head_kind, "direct or index")->check(CLI::IsMember({"direct", "index"}));
  head->add_option("-n,--labeled", m_text, "Labeled rows M, or 'all'");
  head->add_option("-s,--seed", seed, "Split and head seed");
  head->add_option("-o,--out", out, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Aggregate a sweep CSV over seeds");
  report->add_option("-i,--input", input, "sweep.csv")->required()->check(CLI::ExistingFile);
  report->add_option("-o,--out", out, "Aggregate CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::uint64_t* seed_ptr = seed ? &*seed : nullptr;
  char* summary = nullptr;
  ibac_status status = IBAC_OK;

  if (*gen) {
    status = ibac_cmd_gen(config.c_str(), out.c_str(), seed_ptr, &summary);
  } else if (*train) {
    status = ibac_cmd_train(config.c_str(), data.c_str(), opt(out), seed_ptr, &summary);
  } else if (*analyze) {
    if (checkpoint.empty() && !identity) {
      std::fprintf(stderr, "analyze: --checkpoint is required unless --identity is given\n");
      return 2;
    }
    status = ibac_cmd_analyze(opt(checkpoint), data.c_str(), opt(config), out.c_str(), identity ? 1 : 0, &summary);
  } else if (*sweep) {
    status = ibac_cmd_sweep(config.c_str(), opt(out), seed_ptr, &summary);
  } else if (*head) {
    std::optional<std::size_t> m;
    if (m_text == "all") {
      m = 0;
    } else if (!m_text.empty()) {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(m_text, &used);
        if (used != m_text.size() || v < 1) throw std::invalid_argument(m_text);
        m = static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        std::fprintf(stderr, "head: --labeled must be a positive integer or 'all'\n");
        return 2;
      }
    }
    status = ibac_cmd_head(checkpoint.c_str(), data.c_str(), opt(config), head_kind.c_str(), m ? &*m : nullptr,
                           seed_ptr, out.c_str(), &summary);
  } else if (*report) {
    status = ibac_cmd_report(input.c_str(), out.c_str(), &summary);
  }

  if (summary && (!quiet || status != IBAC_OK)) std::printf("%s\n", summary);
  ibac_string_free(summary);
  if (status != IBAC_OK) std::fprintf(stderr, "error (%s): %s\n", ibac_status_name(status), ibac_last_error());
  return exit_code(status);
}
