#include "ibac/ibac.h"

#include "common/binary_io.hpp"
#include "common/errors.hpp"
#include "env/dataset_io.hpp"
#include "harness/commands.hpp"
#include "harness/run_steps.hpp"
#include "harness/sweep.hpp"
#include "metrics/report_io.hpp"
#include "models/checkpoint.hpp"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

struct ibac_dataset {
  ibac::TransitionDataset data;
};

struct ibac_model {
  ibac::Checkpoint checkpoint;
};

struct ibac_report {
  ibac::AlignmentReport report;
};

namespace {

thread_local std::string g_last_error;

// Caller-side mistakes that are not library errors, e.g. a short buffer.
class BadArgument : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ibac_status fail(ibac_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `body` and maps library exceptions to status codes. Most derived
// classes first.
template <typename F>
ibac_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const BadArgument& e) {
    return fail(IBAC_ERR_INVALID_ARGUMENT, e.what());
  } catch (const ibac::DivergenceError& e) {
    return fail(IBAC_ERR_DIVERGENCE, e.what());
  } catch (const ibac::ChecksumError& e) {
    return fail(IBAC_ERR_CHECKSUM, e.what());
  } catch (const ibac::VersionError& e) {
    return fail(IBAC_ERR_VERSION, e.what());
  } catch (const ibac::FormatError& e) {
    return fail(IBAC_ERR_FORMAT, e.what());
  } catch (const ibac::ConfigError& e) {
    return fail(IBAC_ERR_CONFIG, e.what());
  } catch (const ibac::ShapeError& e) {
    return fail(IBAC_ERR_SHAPE, e.what());
  } catch (const ibac::IoError& e) {
    return fail(IBAC_ERR_IO, e.what());
  } catch (const ibac::UnsupportedError& e) {
    return fail(IBAC_ERR_UNSUPPORTED, e.what());
  } catch (const ibac::DegenerateError& e) {
    return fail(IBAC_ERR_DEGENERATE, e.what());
  } catch (const ibac::EmptyError& e) {
    return fail(IBAC_ERR_EMPTY, e.what());
  } catch (const ibac::NumericError& e) {
    return fail(IBAC_ERR_NUMERIC, e.what());
  } catch (const ibac::Error& e) {
    return fail(IBAC_ERR_INTERNAL, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(IBAC_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(IBAC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(IBAC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(IBAC_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_summary(char** summary, const std::string& text) {
  if (summary) *summary = dup_string(text);
}

nlohmann::json parse_json_arg(const char* text, const char* what) {
  if (!text || !*text) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ibac::ConfigError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

ibac::BinningConfig binning_arg(const char* json) {
  return json && *json ? ibac::binning_from_json(parse_json_arg(json, "binning")) : ibac::BinningConfig{};
}

void copy_out(const ibac::DenseMatrix& m, double* out, std::size_t len) {
  if (len != m.size()) {
    throw BadArgument("buffer holds " + std::to_string(len) + " values, need " + std::to_string(m.size()));
  }
  std::copy(m.values().begin(), m.values().end(), out);
}

}  // namespace

extern "C" {

const char* ibac_last_error(void) { return g_last_error.c_str(); }

const char* ibac_status_name(ibac_status status) {
  switch (status) {
    case IBAC_OK: return "ok";
    case IBAC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case IBAC_ERR_CONFIG: return "config error";
    case IBAC_ERR_SHAPE: return "shape error";
    case IBAC_ERR_DIVERGENCE: return "divergence";
    case IBAC_ERR_FORMAT: return "format error";
    case IBAC_ERR_CHECKSUM: return "checksum error";
    case IBAC_ERR_VERSION: return "version error";
    case IBAC_ERR_IO: return "i/o error";
    case IBAC_ERR_UNSUPPORTED: return "unsupported";
    case IBAC_ERR_DEGENERATE: return "degenerate input";
    case IBAC_ERR_EMPTY: return "empty input";
    case IBAC_ERR_NUMERIC: return "numeric error";
    case IBAC_ERR_PARTIAL: return "partial failure";
    case IBAC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* ibac_version(void) { return "0.1.0"; }

void ibac_string_free(char* s) { std::free(s); }

ibac_status ibac_dataset_generate(const char* env_json, ibac_dataset** out) {
  if (!out) return fail(IBAC_ERR_INVALID_ARGUMENT, "out is null");
  return guarded([&] {
    auto d = std::make_unique<ibac_dataset>();
    d->data = ibac::generate(ibac::env_config_from_json(parse_json_arg(env_json, "env config")));
    *out = d.release();
    return IBAC_OK;
  });
}

ibac_status ibac_dataset_offset(const ibac_dataset* source, size_t k, const char* reduction, ibac_dataset** out) {
  if (!source || !out) return fail(IBAC_ERR_INVALID_ARGUMENT, "null handle or out pointer");
  return guarded([&] {
    auto d = std::make_unique<ibac_dataset>();
    const auto r = reduction ? ibac::label_reduction_from_string(reduction) : ibac::LabelReduction::First;
    d->data = ibac::offset_pairs(source->data, k, r);
    *out = d.release();
    return IBAC_OK;
  });
}

ibac_status ibac_dataset_load(const char* path, ibac_dataset** out) {
  if (!path || !out) return fail(IBAC_ERR_INVALID_ARGUMENT, "null path or out pointer");
  return guarded([&] {
    auto d = std::make_unique<ibac_dataset>();
    d->data = ibac::load_dataset(path);
    *out = d.release();
    return IBAC_OK;
  });
}

ibac_status ibac_dataset_save(const ibac_dataset* dataset, const char* path) {
  if (!dataset || !path) return fail(IBAC_ERR_INVALID_ARGUMENT, "null handle or path");
  return guarded([&] {
    ibac::save_dataset(path, dataset->data);
    return IBAC_OK;
  });
}

ibac_status ibac_dataset_shape(const ibac_dataset* dataset, size_t* n, size_t* d_obs, size_t* d_a, size_t* k) {
  if (!dataset) return fail(IBAC_ERR_INVALID_ARGUMENT, "null handle");
  g_last_error.clear();
  if (n) *n = dataset->data.size();
  if (d_obs) *d_obs = dataset->data.d_obs();
  if (d_a) *d_a = dataset->data.d_a();
  if (k) *k = dataset->data.offset;
  return IBAC_OK;
}

ibac_status ibac_dataset_copy_obs(const ibac_dataset* dataset, double* obs_t, double* obs_next, size_t len) {
  if (!dataset || !obs_t || !obs_next) return fail(IBAC_ERR_INVALID_ARGUMENT, "null handle or buffer");
  return guarded([&] {
    copy_out(dataset->data.obs_t, obs_t, len);
    copy_out(dataset->data.obs_next, obs_next, len);
    return IBAC_OK;
  });
}

ibac_status ibac_dataset_copy_actions(const ibac_dataset* dataset, double* out, size_t len) {
  if (!dataset || !out) return fail(IBAC_ERR_INVALID_ARGUMENT, "null handle or buffer");
  return guarded([&] {
    copy_out(dataset->data.actions, out, len);
    return IBAC_OK;
  });
}

void ibac_dataset_free(ibac_dataset* dataset) { delete dataset; }

ibac_status ibac_model_train(const ibac_dataset* dataset, const char* run_json, ibac_model** out) {
  if (!dataset || !out) return fail(IBAC_ERR_INVALID_ARGUMENT, "null handle or out pointer");
  return guarded([&] {
    nlohmann::json j = parse_json_arg(run_json, "run config");
    // the dataset decides the environment
    j["env"] = ibac::to_json(dataset->data.env);
    j["offset_k"] = dataset->data.offset;
    const ibac::RunConfig config = ibac::run_config_from_json(j);
    const auto result = ibac::train(config.kind, ibac::training_view(dataset->data), config.model, config.train);
    auto m = std::make_unique<ibac_model>();
    m->checkpoint.model = result.model;
    m->checkpoint.train = config.train;
    if (!result.curve.empty()) m->checkpoint.final_losses = result.curve.back();
    *out = m.release();
    return IBAC_OK;
  });
}

ibac_status ibac_model_load(const char* path, ibac_model** out) {
  if (!path || !out) return fail(IBAC_ERR_INVALID_ARGUMENT, "null path or out pointer");
  return guarded([&] {
    auto m = std::make_unique<ibac_model>();
    m->checkpoint = ibac::load_checkpoint(path);
    *out = m.release();
    return IBAC_OK;
  });
}

ibac_status ibac_model_save(const ibac_model* model, const char* path) {
  if (!model || !path) return fail(IBAC_ERR_INVALID_ARGUMENT, "null handle or path");
  return guarded([&] {
    ibac::save_checkpoint(path, model->checkpoint);
    return IBAC_OK;
  });
}

ibac_status ibac_model_shape(const ibac_model* model, size_t* d_obs, size_t* d_z) {
  if (!model) return fail(IBAC_ERR_INVALID_ARGUMENT, "null handle");
  g_last_error.clear();
  if (d_obs) *d_obs = model->checkpoint.model.d_obs;
  if (d_z) *d_z = model->checkpoint.model.d_z;
  return IBAC_OK;
}

ibac_status ibac_model_latents(const ibac_model* model, const ibac_dataset* dataset, double* out, size_t len) {
  if (!model || !dataset || !out) return fail(IBAC_ERR_INVALID_ARGUMENT, "null handle or buffer");
  return guarded([&] {
    if (model->checkpoint.model.d_obs != dataset->data.d_obs()) throw ibac::ShapeError("model and dataset d_obs differ");
    copy_out(ibac::extract_latents(model->checkpoint.model, ibac::training_view(dataset->data)), out, len);
    return IBAC_OK;
  });
}

void ibac_model_free(ibac_model* model) { delete model; }

ibac_status ibac_report_compute(const ibac_model* model, const ibac_dataset* dataset, const char* binning_json,
                                ibac_report** out) {
  if (!model || !dataset || !out) return fail(IBAC_ERR_INVALID_ARGUMENT, "null handle or out pointer");
  return guarded([&] {
    auto r = std::make_unique<ibac_report>();
    r->report = ibac::analyze_run(model->checkpoint.model, dataset->data, binning_arg(binning_json));
    *out = r.release();
    return IBAC_OK;
  });
}

ibac_status ibac_report_from_matrices(const double* latents, const double* actions, size_t n, size_t d_z, size_t d_a,
                                      const char* binning_json, ibac_report** out) {
  if (!latents || !actions || !out) return fail(IBAC_ERR_INVALID_ARGUMENT, "null buffer or out pointer");
  return guarded([&] {
    ibac::DenseMatrix z(n, d_z, std::vector<double>(latents, latents + n * d_z));
    ibac::DenseMatrix a(n, d_a, std::vector<double>(actions, actions + n * d_a));
    auto r = std::make_unique<ibac_report>();
    r->report = ibac::alignment_report(z, a, binning_arg(binning_json));
    *out = r.release();
    return IBAC_OK;
  });
}

ibac_status ibac_report_means(const ibac_report* report, double* mean_max_ratio, double* mean_max_abs_r) {
  if (!report) return fail(IBAC_ERR_INVALID_ARGUMENT, "null handle");
  g_last_error.clear();
  if (mean_max_ratio) *mean_max_ratio = report->report.mean_max_ratio();
  if (mean_max_abs_r) *mean_max_abs_r = report->report.mean_max_pearson();
  return IBAC_OK;
}

ibac_status ibac_report_json(const ibac_report* report, char** out) {
  if (!report || !out) return fail(IBAC_ERR_INVALID_ARGUMENT, "null handle or out pointer");
  return guarded([&] {
    *out = dup_string(ibac::report_to_json(report->report).dump(2));
    return IBAC_OK;
  });
}

ibac_status ibac_report_csv(const ibac_report* report, char** out) {
  if (!report || !out) return fail(IBAC_ERR_INVALID_ARGUMENT, "null handle or out pointer");
  return guarded([&] {
    *out = dup_string(ibac::report_to_csv(report->report).to_string());
    return IBAC_OK;
  });
}

void ibac_report_free(ibac_report* report) { delete report; }

ibac_status ibac_cmd_gen(const char* config_path, const char* out_path, const uint64_t* seed, char** summary) {
  if (!config_path || !out_path) return fail(IBAC_ERR_INVALID_ARGUMENT, "gen needs a config and an output path");
  return guarded([&] {
    ibac::RunConfig c = ibac::load_run_config(config_path);
    if (seed) c.env.seed = *seed;
    set_summary(summary, ibac::cmd_gen(c, out_path).summary);
    return IBAC_OK;
  });
}

ibac_status ibac_cmd_train(const char* config_path, const char* dataset_path, const char* out_dir,
                           const uint64_t* seed, char** summary) {
  if (!config_path || !dataset_path) return fail(IBAC_ERR_INVALID_ARGUMENT, "train needs a config and a dataset");
  return guarded([&] {
    ibac::RunConfig c = ibac::load_run_config(config_path);
    if (out_dir) c.out_dir = out_dir;
    if (seed) c.train.seed = *seed;
    try {
      set_summary(summary, ibac::cmd_train(c, dataset_path).summary);
    } catch (const ibac::TrainingDiverged& e) {
      set_summary(summary, std::string("training diverged at epoch ") + std::to_string(e.epoch()) +
                               "; last good checkpoint saved with the divergence marker");
      throw;
    }
    return IBAC_OK;
  });
}

ibac_status ibac_cmd_analyze(const char* checkpoint_path, const char* dataset_path, const char* config_path,
                             const char* out_dir, int identity_debug, char** summary) {
  if (!dataset_path || !out_dir || (!checkpoint_path && !identity_debug)) {
    return fail(IBAC_ERR_INVALID_ARGUMENT, "analyze needs a checkpoint, a dataset and an output directory");
  }
  return guarded([&] {
    const ibac::BinningConfig binning = config_path ? ibac::load_run_config(config_path).binning : ibac::BinningConfig{};
    set_summary(summary, ibac::cmd_analyze(checkpoint_path ? checkpoint_path : "", dataset_path, binning, out_dir,
                                           identity_debug != 0)
                             .summary);
    return IBAC_OK;
  });
}

ibac_status ibac_cmd_sweep(const char* config_path, const char* out_dir, const uint64_t* seed, char** summary) {
  if (!config_path) return fail(IBAC_ERR_INVALID_ARGUMENT, "sweep needs a config");
  return guarded([&] {
    ibac::SweepConfig c = ibac::load_sweep_config(config_path);
    if (seed) c.base.train.seed = *seed;
    const std::filesystem::path dir = out_dir ? std::filesystem::path(out_dir) : std::filesystem::path(c.base.out_dir);
    const auto outcome = ibac::run_sweep(c, dir);
    set_summary(summary, outcome.summary);
    if (outcome.failed > 0) {
      return fail(IBAC_ERR_PARTIAL, std::to_string(outcome.failed) + " sweep cell(s) failed; see the status column");
    }
    return IBAC_OK;
  });
}

ibac_status ibac_cmd_head(const char* checkpoint_path, const char* dataset_path, const char* config_path,
                          const char* head_kind, const size_t* m, const uint64_t* seed, const char* out_dir,
                          char** summary) {
  if (!checkpoint_path || !dataset_path || !out_dir) {
    return fail(IBAC_ERR_INVALID_ARGUMENT, "head needs a checkpoint, a dataset and an output directory");
  }
  return guarded([&] {
    ibac::HeadRunConfig h = config_path ? ibac::load_run_config(config_path).head : ibac::HeadRunConfig{};
    if (head_kind) h.kind = head_kind;
    if (m) h.m = *m;
    if (seed) h.seed = h.direct.seed = h.index.seed = *seed;
    set_summary(summary, ibac::cmd_head(checkpoint_path, dataset_path, h, out_dir).summary);
    return IBAC_OK;
  });
}

ibac_status ibac_cmd_report(const char* sweep_csv, const char* out_path, char** summary) {
  if (!sweep_csv || !out_path) return fail(IBAC_ERR_INVALID_ARGUMENT, "report needs a sweep CSV and an output path");
  return guarded([&] {
    set_summary(summary, ibac::cmd_report(sweep_csv, out_path).summary);
    return IBAC_OK;
  });
}

}  // extern "C"
