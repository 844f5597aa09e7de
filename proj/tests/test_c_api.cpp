// Exercises the shared library through its public header only.
#include <doctest.h>
#include <ibac/ibac.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Dir {
  fs::path path;
  Dir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("ibac_capi_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~Dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::string take(char* s) {
  std::string out = s ? s : "";
  ibac_string_free(s);
  return out;
}

const char* kEnv = R"({"episodes": 6, "episode_len": 30, "nuisance_dim": 3})";
const char* kRun = R"({"env": {"episodes": 6, "episode_len": 30, "nuisance_dim": 3},
                       "model": {"hidden": [8]}, "train": {"epochs": 2, "batch_size": 32},
                       "binning": {"n_bins": 16}})";

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(ibac_status_name(IBAC_OK)) == "ok");
  CHECK(std::string(ibac_status_name(IBAC_ERR_CHECKSUM)) == "checksum error");
  CHECK(std::string(ibac_version()) == "0.1.0");
}

TEST_CASE("datasets through handles") {
  ibac_dataset* ds = nullptr;
  REQUIRE(ibac_dataset_generate(kEnv, &ds) == IBAC_OK);
  CHECK(std::string(ibac_last_error()).empty());
  size_t n = 0, d_obs = 0, d_a = 0, k = 0;
  REQUIRE(ibac_dataset_shape(ds, &n, &d_obs, &d_a, &k) == IBAC_OK);
  CHECK(n == 6 * 29);
  CHECK(d_obs == 7);
  CHECK(d_a == 2);
  CHECK(k == 1);

  std::vector<double> obs(n * d_obs), next(n * d_obs), acts(n * d_a);
  REQUIRE(ibac_dataset_copy_obs(ds, obs.data(), next.data(), obs.size()) == IBAC_OK);
  REQUIRE(ibac_dataset_copy_actions(ds, acts.data(), acts.size()) == IBAC_OK);
  // the position block moves by exactly the action at offset 1
  for (size_t r = 0; r < n; ++r)
    for (size_t c = 0; c < 2; ++c) CHECK(next[r * d_obs + c] - obs[r * d_obs + c] == doctest::Approx(acts[r * 2 + c]));
  CHECK(ibac_dataset_copy_actions(ds, acts.data(), acts.size() - 1) == IBAC_ERR_INVALID_ARGUMENT);

  ibac_dataset* k3 = nullptr;
  REQUIRE(ibac_dataset_offset(ds, 3, "sum", &k3) == IBAC_OK);
  ibac_dataset_shape(k3, &n, nullptr, nullptr, &k);
  CHECK(n == 6 * 27);
  CHECK(k == 3);
  ibac_dataset* bad = nullptr;
  CHECK(ibac_dataset_offset(ds, 30, nullptr, &bad) == IBAC_ERR_EMPTY);
  CHECK(bad == nullptr);
  CHECK(std::string(ibac_last_error()).find("k=30") != std::string::npos);
  CHECK(ibac_dataset_offset(ds, 2, "median", &bad) == IBAC_ERR_CONFIG);

  Dir dir;
  REQUIRE(ibac_dataset_save(ds, (dir / "d.ibds").c_str()) == IBAC_OK);
  ibac_dataset* back = nullptr;
  REQUIRE(ibac_dataset_load((dir / "d.ibds").c_str(), &back) == IBAC_OK);
  std::vector<double> obs2(obs.size()), next2(obs.size());
  ibac_dataset_copy_obs(back, obs2.data(), next2.data(), obs2.size());
  for (size_t i = 0; i < obs.size(); ++i) CHECK(obs2[i] == static_cast<double>(static_cast<float>(obs[i])));
  CHECK(ibac_dataset_load((dir / "missing.ibds").c_str(), &bad) == IBAC_ERR_IO);

  ibac_dataset_free(back);
  ibac_dataset_free(k3);
  ibac_dataset_free(ds);
  ibac_dataset_free(nullptr);
}

TEST_CASE("argument and config errors") {
  ibac_dataset* ds = nullptr;
  CHECK(ibac_dataset_generate(R"({"episodes": 0})", &ds) == IBAC_ERR_CONFIG);
  CHECK(std::string(ibac_last_error()).find("env.episodes") != std::string::npos);
  CHECK(ibac_dataset_generate("{not json", &ds) == IBAC_ERR_CONFIG);
  CHECK(ibac_dataset_generate(nullptr, nullptr) == IBAC_ERR_INVALID_ARGUMENT);
  CHECK(ibac_dataset_shape(nullptr, nullptr, nullptr, nullptr, nullptr) == IBAC_ERR_INVALID_ARGUMENT);
  CHECK(ibac_model_train(nullptr, kRun, nullptr) == IBAC_ERR_INVALID_ARGUMENT);
}

TEST_CASE("models and reports") {
  ibac_dataset* ds = nullptr;
  REQUIRE(ibac_dataset_generate(kEnv, &ds) == IBAC_OK);
  ibac_model* m = nullptr;
  REQUIRE(ibac_model_train(ds, kRun, &m) == IBAC_OK);
  size_t d_obs = 0, d_z = 0, n = 0;
  ibac_model_shape(m, &d_obs, &d_z);
  ibac_dataset_shape(ds, &n, nullptr, nullptr, nullptr);
  CHECK(d_obs == 7);
  CHECK(d_z == 4);
  std::vector<double> z(n * d_z);
  REQUIRE(ibac_model_latents(m, ds, z.data(), z.size()) == IBAC_OK);

  Dir dir;
  REQUIRE(ibac_model_save(m, (dir / "m.ibac").c_str()) == IBAC_OK);
  ibac_model* back = nullptr;
  REQUIRE(ibac_model_load((dir / "m.ibac").c_str(), &back) == IBAC_OK);
  std::vector<double> z2(z.size());
  ibac_model_latents(back, ds, z2.data(), z2.size());
  CHECK(z == z2);

  // a byte flipped in the parameter payload
  {
    std::fstream f(dir / "m.ibac", std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(-20, std::ios::end);
    char c;
    f.get(c);
    f.seekp(-20, std::ios::end);
    f.put(static_cast<char>(c ^ 0x40));
  }
  ibac_model* broken = nullptr;
  CHECK(ibac_model_load((dir / "m.ibac").c_str(), &broken) == IBAC_ERR_CHECKSUM);

  ibac_report* r = nullptr;
  REQUIRE(ibac_report_compute(m, ds, R"({"n_bins": 16})", &r) == IBAC_OK);
  double ratio = -1, absr = -1;
  ibac_report_means(r, &ratio, &absr);
  CHECK(ratio >= 0.0);
  CHECK(absr <= 1.0);
  char* json = nullptr;
  REQUIRE(ibac_report_json(r, &json) == IBAC_OK);
  CHECK(take(json).find("mi_ratio") != std::string::npos);
  char* csv = nullptr;
  REQUIRE(ibac_report_csv(r, &csv) == IBAC_OK);
  CHECK(take(csv).rfind("i,j,abs_pearson,mi_nats,h_nats,ratio,degenerate_flag\n", 0) == 0);

  std::vector<double> acts(n * 2);
  ibac_dataset_copy_actions(ds, acts.data(), acts.size());
  ibac_report* self = nullptr;
  REQUIRE(ibac_report_from_matrices(acts.data(), acts.data(), n, 2, 2, nullptr, &self) == IBAC_OK);
  ibac_report_means(self, &ratio, &absr);
  CHECK(ratio == doctest::Approx(1.0));
  CHECK(absr == doctest::Approx(1.0));
  CHECK(ibac_report_from_matrices(acts.data(), acts.data(), 1, 2, 2, nullptr, &self) == IBAC_ERR_EMPTY);

  ibac_report_free(self);
  ibac_report_free(r);
  ibac_model_free(back);
  ibac_model_free(m);
  ibac_dataset_free(ds);
}

TEST_CASE("divergence is reported as its own status") {
  ibac_dataset* ds = nullptr;
  REQUIRE(ibac_dataset_generate(kEnv, &ds) == IBAC_OK);
  ibac_model* m = nullptr;
  CHECK(ibac_model_train(ds, R"({"model": {"hidden": [8]}, "train": {"epochs": 3, "lr": 1e200}})", &m) ==
        IBAC_ERR_DIVERGENCE);
  CHECK(m == nullptr);
  ibac_dataset_free(ds);
}

TEST_CASE("commands") {
  Dir dir;
  write(dir / "run.json", kRun);
  char* s = nullptr;
  const uint64_t seed = 9;
  REQUIRE(ibac_cmd_gen((dir / "run.json").c_str(), (dir / "d.ibds").c_str(), &seed, &s) == IBAC_OK);
  CHECK(take(s).find("N=174") != std::string::npos);
  REQUIRE(ibac_cmd_train((dir / "run.json").c_str(), (dir / "d.ibds").c_str(), (dir / "out").c_str(), nullptr,
                         &s) == IBAC_OK);
  take(s);
  CHECK(fs::exists(dir / "out/run/loss.csv"));
  CHECK(ibac_cmd_train((dir / "run.json").c_str(), (dir / "d.ibds").c_str(), (dir / "out").c_str(), nullptr,
                       nullptr) == IBAC_ERR_CONFIG);
  REQUIRE(ibac_cmd_analyze((dir / "out/run/model.ibac").c_str(), (dir / "d.ibds").c_str(),
                           (dir / "run.json").c_str(), (dir / "out/run").c_str(), 0, &s) == IBAC_OK);
  CHECK(take(s).find("max MI ratio") != std::string::npos);
  const size_t m = 20;
  REQUIRE(ibac_cmd_head((dir / "out/run/model.ibac").c_str(), (dir / "d.ibds").c_str(), nullptr, "index", &m,
                        nullptr, (dir / "out/run").c_str(), &s) == IBAC_OK);
  CHECK(take(s).find("index_accuracy") != std::string::npos);
  CHECK(ibac_cmd_head((dir / "out/run/model.ibac").c_str(), (dir / "d.ibds").c_str(), nullptr, "table", &m, nullptr,
                      (dir / "out/run").c_str(), nullptr) == IBAC_ERR_CONFIG);

  write(dir / "sweep.json", R"({"env": {"episodes": 4, "episode_len": 20, "nuisance_dim": 2},
                                "model": {"hidden": [8]}, "train": {"epochs": 3, "lr": 1e200},
                                "sweep": {"beta_grid": [0.01, 0.1], "offset_grid": [1], "seeds": [1]}})");
  CHECK(ibac_cmd_sweep((dir / "sweep.json").c_str(), (dir / "sw").c_str(), nullptr, &s) == IBAC_ERR_PARTIAL);
  take(s);
  REQUIRE(ibac_cmd_report((dir / "sw/sweep.csv").c_str(), (dir / "sw/agg.csv").c_str(), &s) == IBAC_OK);
  CHECK(take(s).find("2 groups") != std::string::npos);
}
