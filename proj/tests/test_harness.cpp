#include <doctest.h>

#include "common/binary_io.hpp"
#include "common/csv.hpp"
#include "common/errors.hpp"
#include "env/dataset_io.hpp"
#include "harness/commands.hpp"
#include "harness/config.hpp"
#include "harness/run_steps.hpp"
#include "harness/sweep.hpp"
#include "metrics/report_io.hpp"
#include "models/checkpoint.hpp"
#include "test_support.hpp"

#include <cmath>
#include <cstdlib>

using namespace ibac;
namespace fs = std::filesystem;

namespace {

RunConfig small_run(const fs::path& out, std::uint64_t seed = 1) {
  RunConfig c;
  c.out_dir = out.string();
  c.env.episodes = 8;
  c.env.episode_len = 40;
  c.env.nuisance_dim = 3;
  c.env.action_mode = ActionMode::PiecewiseConstant;
  c.env.seed = seed;
  c.model.hidden = {16};
  c.train.epochs = 3;
  c.train.batch_size = 64;
  c.binning.n_bins = 32;
  return c;
}

SweepConfig small_sweep(const fs::path& out) {
  SweepConfig s;
  s.base = small_run(out);
  s.kinds = {ModelKind::Vib, ModelKind::Idm};
  s.beta_grid = {1e-3, 1e-1};
  s.offset_grid = {1, 2};
  s.seeds = {1, 2};
  s.head_m = {10};
  return s;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

}  // namespace

TEST_CASE("run config parsing") {
  const auto d = run_config_from_json(nlohmann::json::object());
  CHECK(d.env == EnvConfig{});
  CHECK(d.train.epochs == 2000);
  CHECK(d.binning.n_bins == 256);
  CHECK(d.model.hidden == std::vector<std::size_t>{64, 64});

  auto c = small_run("x");
  c.kind = ModelKind::Idm;
  c.offset_k = 3;
  c.label_reduction = LabelReduction::Sum;
  c.head.kind = "index";
  c.head.m = 0;
  const auto back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.env == c.env);
  CHECK(back.kind == ModelKind::Idm);

  try {
    run_config_from_json({{"train", {{"epoch", 3}}}});
    FAIL("unknown key accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.epoch") != std::string::npos);
  }
  try {
    run_config_from_json({{"env", {{"episodes", 0}}}});
    FAIL("episodes=0 accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("env.episodes") != std::string::npos);
  }
  CHECK_THROWS_AS(run_config_from_json({{"train", {{"lr", "fast"}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"kind", "vae"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"offset_k", 100}}), ConfigError);  // k >= episode_len
}

TEST_CASE("sweep config parsing") {
  const auto s = sweep_config_from_json(nlohmann::json::object());
  CHECK(s.beta_grid == std::vector<double>{1e-4, 1e-3, 1e-2, 1e-1, 1.0});
  CHECK(s.offset_grid == std::vector<std::size_t>{1, 2, 4, 8});
  CHECK(s.seeds.size() == 5);
  const auto t = small_sweep("o");
  CHECK(to_json(sweep_config_from_json(to_json(t))) == to_json(t));
  CHECK_THROWS_AS(sweep_config_from_json({{"sweep", {{"beta_grid", nlohmann::json::array()}}}}), ConfigError);
  CHECK_THROWS_AS(sweep_config_from_json({{"sweep", {{"seeds", nlohmann::json::array()}}}}), ConfigError);
  CHECK_THROWS_AS(sweep_config_from_json({{"sweep", {{"betas", {1}}}}}), ConfigError);
}

TEST_CASE("cmd_gen") {
  testing::TempDir dir("gen");
  RunConfig c;
  const auto p1 = dir / "a.ibds", p2 = dir / "b.ibds";
  const auto out = cmd_gen(c, p1);
  CHECK(out.summary.find("N=19800") != std::string::npos);
  CHECK(load_dataset(p1).size() == 200 * 99);
  cmd_gen(c, p2);
  CHECK(read_file(p1) == read_file(p2));
  c.env.episodes = 0;
  CHECK_THROWS_AS(cmd_gen(c, dir / "c.ibds"), ConfigError);
}

TEST_CASE("cmd_train") {
  testing::TempDir dir("train");
  auto c = small_run(dir.path());
  const auto ds = dir / "d.ibds";
  cmd_gen(c, ds);

  SUBCASE("zero epochs saves the seeded initialization") {
    c.train.epochs = 0;
    cmd_train(c, ds);
    const auto ck = load_checkpoint(dir / "run/model.ibac");
    CHECK(ck.model == make_model(ModelKind::Vib, load_dataset(ds).d_obs(), c.model, init_seed(c.train.seed)));
    CHECK(parse_csv(slurp(dir / "run/loss.csv")).rows.empty());
  }
  SUBCASE("loss csv and determinism") {
    cmd_train(c, ds);
    const auto t = parse_csv(slurp(dir / "run/loss.csv"));
    CHECK(t.header == std::vector<std::string>{"epoch", "loss_total", "loss_rec", "loss_kl"});
    CHECK(t.rows.size() == 3);
    CHECK(t.rows.front()[0] == "1");
    const auto resolved = read_json_file(dir / "run/run.json");
    CHECK(resolved["train"]["epochs"] == 3);
    CHECK(resolved["binning"]["n_bins"] == 32);  // defaults and overrides echoed

    CHECK_THROWS_AS(cmd_train(c, ds), ConfigError);  // run id already used
    auto again = c;
    again.run_id = "again";
    cmd_train(again, ds);
    CHECK(slurp(dir / "run/loss.csv") == slurp(dir / "again/loss.csv"));
    CHECK(load_checkpoint(dir / "run/model.ibac").model == load_checkpoint(dir / "again/model.ibac").model);
  }
  SUBCASE("divergence keeps a marked checkpoint") {
    c.train.lr = 1e200;
    c.run_id = "boom";
    CHECK_THROWS_AS(cmd_train(c, ds), TrainingDiverged);
    const auto ck = load_checkpoint(dir / "boom/model.ibac");
    CHECK(ck.diverged);
    for (double v : ck.model.flat_params()) REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("cmd_analyze") {
  testing::TempDir dir("analyze");
  auto c = small_run(dir.path());
  const auto ds = dir / "d.ibds";
  cmd_gen(c, ds);
  cmd_train(c, ds);

  SUBCASE("identity debug mode") {
    const auto out = cmd_analyze("", ds, c.binning, dir / "id", true);
    CHECK(out.summary.find("a0           ") != std::string::npos);
    const auto r = report_from_json(read_json_file(dir / "id/alignment.json"));
    for (double v : r.max_ratio_per_channel) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : r.max_pearson_per_channel) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    std::size_t ones = 0;
    for (std::size_t p = out.summary.find("1.0000"); p != std::string::npos; p = out.summary.find("1.0000", p + 1))
      ++ones;
    CHECK(ones == 2 * 2 + 2);  // both channels and the means
  }
  SUBCASE("csv round trip") {
    cmd_analyze(dir / "run/model.ibac", ds, c.binning, dir / "run");
    const auto r = report_from_json(read_json_file(dir / "run/alignment.json"));
    const auto t = parse_csv(slurp(dir / "run/alignment.csv"));
    REQUIRE(t.rows.size() == r.d_z * r.d_a);
    for (const auto& row : t.rows) {
      const auto i = std::stoul(row[0]), j = std::stoul(row[1]);
      CHECK(std::stod(row[2]) == r.pearson_abs(i, j));
      CHECK(std::stod(row[3]) == r.mi_nats(i, j));
      CHECK(std::stod(row[4]) == r.entropy[j]);
      CHECK(std::stod(row[5]) == r.mi_ratio(i, j));
      CHECK(std::stoi(row[6]) == (r.cell_degenerate(i, j) ? 1 : 0));
    }
    const auto ck = load_checkpoint(dir / "run/model.ibac");
    const auto direct = analyze_run(ck.model, load_dataset(ds), c.binning);
    CHECK(direct.mi_ratio == r.mi_ratio);
  }
  SUBCASE("dimension mismatch") {
    auto other = c;
    other.env.nuisance_dim = 5;
    cmd_gen(other, dir / "other.ibds");
    CHECK_THROWS_AS(cmd_analyze(dir / "run/model.ibac", dir / "other.ibds", c.binning, dir / "x"), ShapeError);
  }
}

TEST_CASE("trained models analyze better than their initialization (5-seed majority)") {
  testing::TempDir dir("benefit");
  int better = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto c = small_run(dir.path(), seed);
    c.env.episodes = 40;
    c.env.nuisance_jitter = 1.0;
    c.env.action_levels = 5;
    c.train.epochs = 30;
    c.train.seed = seed;
    c.model.hidden = {32, 32};
    const auto ds = dir / ("d" + std::to_string(seed) + ".ibds");
    cmd_gen(c, ds);
    c.run_id = "trained" + std::to_string(seed);
    cmd_train(c, ds);
    auto init = c;
    init.run_id = "init" + std::to_string(seed);
    init.train.epochs = 0;
    cmd_train(init, ds);
    cmd_analyze(dir / (c.run_id + "/model.ibac"), ds, c.binning, dir / c.run_id);
    cmd_analyze(dir / (init.run_id + "/model.ibac"), ds, c.binning, dir / init.run_id);
    const auto a = report_from_json(read_json_file(dir / (c.run_id + "/alignment.json")));
    const auto b = report_from_json(read_json_file(dir / (init.run_id + "/alignment.json")));
    bool all = true;
    for (std::size_t j = 0; j < a.d_a; ++j) all &= a.max_ratio_per_channel[j] > b.max_ratio_per_channel[j];
    better += all;
  }
  CHECK(better >= 3);
}

TEST_CASE("cmd_head") {
  testing::TempDir dir("head");
  auto c = small_run(dir.path());
  const auto ds = dir / "d.ibds";
  cmd_gen(c, ds);
  cmd_train(c, ds);
  const auto model = dir / "run/model.ibac";
  HeadRunConfig h;
  h.m = 20;
  h.direct.epochs = 20;
  const auto out = cmd_head(model, ds, h, dir / "h");
  CHECK(out.summary.find("M=20") != std::string::npos);
  CHECK(std::holds_alternative<DirectProjectionHead>(load_head(dir / "h/head_direct.ibac")));
  const auto metrics = parse_csv(slurp(dir / "h/head_metrics.csv"));
  CHECK(metrics.rows.size() == 1);
  h.kind = "index";
  h.codebook_k = 4;
  cmd_head(model, ds, h, dir / "h");
  CHECK(std::holds_alternative<QuantizedIndexHead>(load_head(dir / "h/head_index.ibac")));
  h.kind = "lookup";
  CHECK_THROWS_AS(cmd_head(model, ds, h, dir / "h"), ConfigError);
  h.kind = "direct";
  h.m = 100000;
  CHECK_THROWS_AS(cmd_head(model, ds, h, dir / "h"), ConfigError);
}

TEST_CASE("all labels are no worse than M=50 (5-seed majority)") {
  testing::TempDir dir("mall");
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto c = small_run(dir.path(), seed);
    c.env.episodes = 40;
    c.env.nuisance_jitter = 1.0;
    c.env.action_levels = 5;
    c.env.segment_lens = {6, 12};
    c.train.epochs = 20;
    c.train.seed = seed;
    c.model.hidden = {32, 32};
    c.run_id = "r" + std::to_string(seed);
    const auto data = prepare_dataset(c);
    const auto run = train_run(c, data, dir / c.run_id);
    const auto latents = extract_latents(run.model, training_view(data));
    HeadRunConfig h;
    h.seed = seed;
    h.m = 50;
    const auto few = fit_head_on_latents(latents, data.actions, h);
    h.m = 0;
    const auto all = fit_head_on_latents(latents, data.actions, h);
    CHECK(all.m == data.size() - eval_count(data.size()));
    ok += all.eval_mse <= few.eval_mse;
  }
  CHECK(ok >= 3);
}

TEST_CASE("aggregate_sweep") {
  CsvTable s;
  s.header = {"kind", "beta", "k", "seed", "cell_seed", "status", "m1", "m2"};
  s.rows = {{"vib", "0.01", "1", "1", "11", "ok", "0.2", "5"},
            {"vib", "0.01", "1", "2", "12", "ok", "0.4", "5"},
            {"vib", "0.01", "1", "3", "13", "diverged at epoch 2", "nan", "nan"},
            {"vib", "0.10000000000000001", "1", "1", "14", "ok", "0.7", "-1"}};
  const auto a = aggregate_sweep(s);
  CHECK(a.header == std::vector<std::string>{"kind", "beta", "k", "n", "m1_mean", "m1_std", "m2_mean", "m2_std"});
  REQUIRE(a.rows.size() == 2);
  CHECK(a.rows[0][3] == "2");
  CHECK(std::stod(a.rows[0][4]) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(std::stod(a.rows[0][5]) == doctest::Approx(0.1414).epsilon(1e-3));
  CHECK(std::stod(a.rows[0][7]) == 0.0);
  CHECK(a.rows[1][3] == "1");
  CHECK(a.rows[1][4] == "0.69999999999999996");
  CHECK(a.rows[1][5] == "0");
  CsvTable broken;
  broken.header = {"kind", "beta"};
  CHECK_THROWS_AS(aggregate_sweep(broken), FormatError);
}

TEST_CASE("csv formatting") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(2.0) == "2");
  CsvTable t;
  t.header = {"a", "b"};
  t.rows = {{"1", "x"}};
  CHECK(t.to_string() == "a,b\n1,x\n");
  CHECK(parse_csv(t.to_string()).rows == t.rows);
}

TEST_CASE("cell seeds and names") {
  const SweepCell a{ModelKind::Vib, 1e-2, 4, 3};
  CHECK(cell_name(a) == "vib_b0.01_k4_s3");
  CHECK(cell_seed(1, a) == cell_seed(1, a));
  CHECK(cell_seed(1, a) != cell_seed(2, a));
  CHECK(cell_seed(1, a) != cell_seed(1, {ModelKind::Idm, 1e-2, 4, 3}));
  CHECK(cell_seed(1, a) != cell_seed(1, {ModelKind::Vib, 1e-3, 4, 3}));
  const auto s = small_sweep("o");
  const auto r = cell_run_config(s, a);
  CHECK(r.run_id == "vib_b0.01_k4_s3");
  CHECK(r.train.beta == 1e-2);
  CHECK(r.offset_k == 4);
  CHECK(r.env.seed == dataset_seed(s.base.env.seed, 3));
  CHECK(sweep_cells(s).size() == 16);

  setenv("IBAC_THREADS", "2", 1);
  CHECK(effective_parallelism(8) == 2);
  CHECK(effective_parallelism(1) == 1);
  setenv("IBAC_THREADS", "zero", 1);
  CHECK(effective_parallelism(8) == 8);
  unsetenv("IBAC_THREADS");
}

TEST_CASE("sweep: serial and concurrent runs agree") {
  testing::TempDir dir("sweep");
  auto s = small_sweep(dir.path());
  s.parallelism = 1;
  const auto serial = run_sweep(s, dir / "serial");
  s.parallelism = 3;
  const auto parallel = run_sweep(s, dir / "parallel");
  CHECK(serial.failed == 0);
  CHECK(serial.table.rows.size() == 16);
  CHECK(slurp(dir / "serial/sweep.csv") == slurp(dir / "parallel/sweep.csv"));
  for (const auto& cell : sweep_cells(s)) {
    const auto name = cell_name(cell);
    for (const char* f : {"model.ibac", "loss.csv", "alignment.csv", "alignment.json", "heads.csv"}) {
      CAPTURE(name);
      CAPTURE(f);
      CHECK(read_file(dir / ("serial/cells/" + name + "/" + f)) == read_file(dir / ("parallel/cells/" + name + "/" + f)));
    }
  }
  for (const auto& e : fs::directory_iterator(dir / "serial/data")) {
    CHECK(read_file(e.path()) == read_file(dir / "parallel/data" / e.path().filename()));
  }
}

TEST_CASE("sweep: adding grid points leaves existing cells unchanged") {
  testing::TempDir dir("grid");
  auto s = small_sweep(dir.path());
  s.kinds = {ModelKind::Vib};
  s.beta_grid = {1e-2};
  s.offset_grid = {1};
  s.seeds = {2};
  s.head_m = {};
  const auto one = run_sweep(s, dir / "one");
  s.beta_grid = {1e-3, 1e-2};
  s.seeds = {1, 2};
  const auto more = run_sweep(s, dir / "more");
  const auto& row = one.table.rows[0];
  bool found = false;
  for (const auto& r : more.table.rows) found |= r == row;
  CHECK(found);
  CHECK(read_file(dir / "one/cells/vib_b0.01_k1_s2/model.ibac") == read_file(dir / "more/cells/vib_b0.01_k1_s2/model.ibac"));
}

TEST_CASE("sweep: failed cells stay in the table") {
  testing::TempDir dir("fail");
  auto s = small_sweep(dir.path());
  s.kinds = {ModelKind::Vib};
  s.offset_grid = {1};
  s.seeds = {1};
  s.head_m = {};
  s.base.train.lr = 1e200;  // every cell diverges
  s.beta_grid = {1e-3, 1e-2};
  const auto out = run_sweep(s, dir / "o");
  CHECK(out.failed == 2);
  const auto t = parse_csv(slurp(dir / "o/sweep.csv"));
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][t.column("status")].rfind("diverged", 0) == 0);
  CHECK(t.rows[0][t.column("mean_max_ratio")] == "nan");
  CHECK(aggregate_sweep(t).rows[0][3] == "0");
}

TEST_CASE("sweep composition: a singleton grid equals gen + train + analyze") {
  testing::TempDir dir("compose");
  auto s = small_sweep(dir.path());
  s.kinds = {ModelKind::Idm};
  s.beta_grid = {1e-2};
  s.offset_grid = {2};
  s.seeds = {4};
  s.head_m = {};
  const auto out = run_sweep(s, dir / "sweep");
  const SweepCell cell{ModelKind::Idm, 1e-2, 2, 4};
  auto c = cell_run_config(s, cell);
  c.out_dir = (dir / "manual").string();
  const auto ds = dir / "manual.ibds";
  cmd_gen(c, ds);
  cmd_train(c, ds);
  const auto run_dir = dir / ("manual/" + c.run_id);
  cmd_analyze(run_dir / "model.ibac", ds, c.binning, run_dir);
  const auto cell_dir = dir / ("sweep/cells/" + c.run_id);
  CHECK(read_file(ds) == read_file(dir / "sweep/data/seed4_k2.ibds"));
  for (const char* f : {"model.ibac", "loss.csv", "alignment.csv", "alignment.json"}) {
    CAPTURE(f);
    CHECK(read_file(run_dir / f) == read_file(cell_dir / f));
  }
  // the aggregate of a single-row sweep is that row
  const auto agg = aggregate_sweep(out.table);
  REQUIRE(agg.rows.size() == 1);
  const auto& row = out.table.rows[0];
  for (std::size_t c2 = 6; c2 < out.table.header.size(); ++c2) {
    CHECK(agg.rows[0][agg.column(out.table.header[c2] + "_mean")] == row[c2]);
    CHECK(agg.rows[0][agg.column(out.table.header[c2] + "_std")] == "0");
  }
}
