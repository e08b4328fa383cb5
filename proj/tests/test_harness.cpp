#include <filesystem>
#include <map>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "vmig/harness/config_file.hpp"
#include "vmig/harness/experiment.hpp"
#include "vmig/harness/experiment_config.hpp"
#include "vmig/harness/metrics.hpp"

using namespace vmig;
using namespace vmig::harness;
namespace fs = std::filesystem;

namespace {

std::string message_of(const std::string& text) {
    try {
        load_config_text(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

ExperimentConfig tiny_experiment(const std::string& out) {
    ExperimentConfig c;
    c.world.num_vehicles = 2;
    c.world.num_rsus = 2;
    c.world.episode_length = 8;
    c.trainer.epochs = 3;
    c.trainer.batch_size = 8;
    c.trainer.gradient_steps = 2;
    c.trainer.eval_episodes = 1;
    c.trainer.critic_hidden = {8};
    c.trainer.policy.hidden = {8};
    c.trainer.policy.embedding_dim = 4;
    c.trainer.policy.steps = 2;
    c.seeds = {1, 2};
    c.summary_window = 2;
    c.output_dir = out;
    return c;
}

fs::path scratch_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("vmig-test-" + name);
    fs::remove_all(p);
    return p;
}

// A value for `key` that differs from `current` and that the field accepts.
std::string mutate(const ConfigField& f, const std::string& current) {
    const std::vector<std::string> candidates{"cgdm", "gdm",   "clip", "tanh", "steps", "none", "true", "false",
                                              "3",    "7",     "0.25", "0.5",  "12.5",  "1,2",  "4,4", "alt-dir",
                                              "",     "0,1",   "0:0,1:1,2:2,3:3"};
    for (const auto& c : candidates) {
        if (c == current) continue;
        ExperimentConfig probe;
        try {
            f.set(probe, c);
        } catch (const Error&) {
            continue;
        }
        if (f.get(probe) != current) return c;
    }
    return current;
}

}  // namespace

TEST(ConfigFile, ParsesCommentsAndRejectsDuplicates) {
    const auto e = parse_config_text("# header\nworld.num_vehicles = 6  # trailing\n\n trust.update_rate=0.5\n");
    ASSERT_EQ(e.size(), 2u);
    EXPECT_EQ(e[0].key, "world.num_vehicles");
    EXPECT_EQ(e[0].value, "6");
    EXPECT_EQ(e[1].line, 4);
    EXPECT_THROW(parse_config_text("a.b = 1\na.b = 2\n"), ConfigError);
    EXPECT_THROW(parse_config_text("no equals sign\n"), ConfigError);
    EXPECT_THROW(parse_config_text("Bad.Key = 1\n"), ConfigError);
}

TEST(ConfigFile, ScalarParsers) {
    EXPECT_EQ(parse_double("k", "1e-4"), 1e-4);
    EXPECT_THROW(parse_double("k", "1.0x"), ConfigError);
    EXPECT_EQ(parse_int("k", "-3"), -3);
    EXPECT_THROW(parse_int("k", "2.5"), ConfigError);
    EXPECT_TRUE(parse_bool("k", "true"));
    EXPECT_THROW(parse_bool("k", "yes"), ConfigError);
    EXPECT_EQ(split_list(" 1, 2 ,3 "), (std::vector<std::string>{"1", "2", "3"}));
    EXPECT_TRUE(split_list("  ").empty());
    for (double v : {0.1, 1e-300, 123456.789, -2.5}) EXPECT_EQ(parse_double("k", format_double(v)), v);
}

TEST(ExperimentConfigTest, DefaultsReproduceTheParameterTable) {
    const auto c = load_config_text("");
    EXPECT_EQ(c.world.num_vehicles, 8);
    EXPECT_EQ(c.world.num_rsus, 4);
    EXPECT_EQ(c.trainer.epochs, 200);
    EXPECT_EQ(c.trainer.policy.steps, 5);
    EXPECT_EQ(c.trainer.discount, 0.95);
    EXPECT_EQ(c.trainer.soft_update_rate, 0.005);
    EXPECT_EQ(c.trust.update_rate, 0.7);
    EXPECT_EQ(c.trainer.batch_size, 256);
    EXPECT_EQ(c.trainer.buffer_capacity, 1000000);
    EXPECT_EQ(c.trainer.actor_learning_rate, 1e-4);
    EXPECT_EQ(c.trainer.critic_learning_rate, 1e-3);
    EXPECT_EQ(c.trust.weight_attitude, 0.33);
    EXPECT_EQ(c.world.cpu_speed_min, 1e8);
    EXPECT_EQ(c.world.cpu_speed_max, 3e8);
    EXPECT_EQ(c.world.data_size_min, 100);
    EXPECT_EQ(c.world.data_size_max, 600);
    EXPECT_EQ(c.world.uplink_bandwidth_min, 100);
    EXPECT_EQ(c.world.uplink_bandwidth_max, 300);
}

TEST(ExperimentConfigTest, ErrorsNameTheKeyPath) {
    EXPECT_NE(message_of("world.attack_frequency = 1.5\n").find("world.attack_frequency"), std::string::npos);
    EXPECT_NE(message_of("world.bogus = 1\n").find("world.bogus"), std::string::npos);
    EXPECT_NE(message_of("trainer.batch_size = many\n").find("trainer.batch_size"), std::string::npos);
    EXPECT_NE(message_of("experiment.seeds = \n").find("experiment.seeds"), std::string::npos);
    EXPECT_NE(message_of("experiment.mode = ppo\n").find("experiment.mode"), std::string::npos);
}

TEST(ExperimentConfigTest, OmittedKeysAreEchoedWithDefaults) {
    const auto c = load_config_text("world.num_vehicles = 6\n");
    const auto text = serialize_config(c);
    EXPECT_NE(text.find("world.num_vehicles = 6\n"), std::string::npos);
    EXPECT_NE(text.find("trainer.discount = 0.95\n"), std::string::npos);
    EXPECT_EQ(load_config_text(text).world.num_vehicles, 6);
    EXPECT_EQ(serialize_config(load_config_text(text)), text);
}

TEST(ExperimentConfigTest, EveryKeyRoundTripsAndIsSerialised) {
    const ExperimentConfig c;
    const auto text = serialize_config(c);
    for (const auto& f : config_fields()) {
        EXPECT_NE(text.find(f.key + " = "), std::string::npos) << f.key;
        ExperimentConfig d;
        f.set(d, f.get(c));
        EXPECT_EQ(f.get(d), f.get(c)) << f.key;
    }
}

TEST(ExperimentConfigTest, ChangingAnyKeyChangesTheHash) {
    const ExperimentConfig base;
    const auto h = config_hash(base);
    for (const auto& f : config_fields()) {
        const auto now = f.get(base);
        const auto other = mutate(f, now);
        ASSERT_NE(other, now) << "no alternative value found for " << f.key;
        ExperimentConfig m = base;
        f.set(m, other);
        EXPECT_NE(config_hash(m), h) << f.key;
    }
}

TEST(ExperimentConfigTest, GitBlobHash) {
    // Same digest as `git hash-object` on a file holding "hello\n".
    EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(ExperimentConfigTest, SweepValuesAreRangeChecked) {
    EXPECT_THROW(load_config_text("experiment.sweep_axis = data_size\nexperiment.sweep_values = 50\n"), ConfigError);
    EXPECT_NO_THROW(load_config_text(
        "experiment.sweep_axis = data_size\nexperiment.sweep_values = 50\nexperiment.allow_out_of_range = true\n"));
    const auto c = load_config_text("experiment.sweep_axis = steps\nexperiment.sweep_values = 1,2,5\n");
    EXPECT_EQ(c.with_sweep_value(2).trainer.policy.steps, 2);
    const auto d = load_config_text("experiment.sweep_axis = compute\nexperiment.sweep_values = 2e8\n");
    EXPECT_EQ(d.with_sweep_value(2e8).world.cpu_speed_min, 2e8);
    EXPECT_EQ(d.with_sweep_value(2e8).world.cpu_speed_max, 2e8);
}

TEST(Metrics, EmptyRowSetIsHeaderOnly) {
    EXPECT_EQ(format_rows({}), "run_id,mode,seed,index,metric,value\n");
    EXPECT_TRUE(parse_metrics(format_rows({})).empty());
}

TEST(Metrics, RowsRoundTrip) {
    std::vector<MetricRow> rows{{"cgdm-s1", "cgdm", 1, 0, "test_reward", -12.25},
                                {"cgdm-s1", "cgdm", 1, 1, "test_reward", 0.1}};
    const auto text = format_rows(rows);
    EXPECT_EQ(text, "run_id,mode,seed,index,metric,value\ncgdm-s1,cgdm,1,0,test_reward,-12.25\n"
                    "cgdm-s1,cgdm,1,1,test_reward,0.1\n");
    const auto back = parse_metrics(text);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].value, 0.1);
    EXPECT_THROW(parse_metrics("a,b\n"), IoError);
}

TEST(Metrics, SummaryMeanMatchesRecomputation) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(-100.0, 10.0);
    std::vector<MetricRow> rows;
    std::map<std::uint64_t, std::vector<double>> series;
    for (std::uint64_t seed : {1, 2, 3, 4})
        for (int epoch = 0; epoch < 30; ++epoch) {
            const double v = n(rng);
            rows.push_back({"r" + std::to_string(seed), "cgdm", seed, epoch, "test_reward", v});
            series[seed].push_back(v);
        }
    const auto agg = aggregate_final(rows, 20, [](const MetricRow& r) { return r.mode; });
    std::vector<double> per_seed;
    for (auto& [seed, s] : series) {
        double sum = 0.0;
        for (int i = 10; i < 30; ++i) sum += s[i];
        per_seed.push_back(sum / 20.0);
    }
    double mean = 0.0;
    for (double v : per_seed) mean += v;
    mean /= 4.0;
    double ss = 0.0;
    for (double v : per_seed) ss += (v - mean) * (v - mean);
    const auto& s = agg.at("cgdm").at("test_reward");
    EXPECT_NEAR(s.mean, mean, 1e-12);
    EXPECT_NEAR(s.std, std::sqrt(ss / 3.0), 1e-12);
    EXPECT_EQ(s.count, 4u);
}

TEST(Experiment, RandomModeRecordsNoGradientSteps) {
    const auto dir = scratch_dir("random");
    const auto r = run_cell(tiny_experiment(dir.string()), learner::Mode::random, 1, std::nullopt, {false});
    ASSERT_FALSE(r.failed);
    for (const auto& row : r.rows) {
        EXPECT_NE(row.metric, "critic_loss");
        if (row.metric == "gradient_steps") EXPECT_EQ(row.value, 0.0);
    }
}

TEST(Experiment, RunsAreDeterministicAndWriteArtifacts) {
    const auto dir = scratch_dir("determinism");
    auto cfg = tiny_experiment((dir / "a").string());
    const auto a = run_cell(cfg, learner::Mode::cgdm, 3);
    cfg.output_dir = (dir / "b").string();
    const auto b = run_cell(cfg, learner::Mode::cgdm, 3);
    const auto text_a = read_text_file((fs::path(a.directory) / "metrics.csv").string());
    EXPECT_EQ(text_a, read_text_file((fs::path(b.directory) / "metrics.csv").string()));
    EXPECT_TRUE(fs::exists(fs::path(a.directory) / "final.ckpt"));
    EXPECT_TRUE(fs::exists(fs::path(a.directory) / "manifest.cfg"));
    EXPECT_EQ(nn::load_checkpoint((fs::path(a.directory) / "final.ckpt").string()).size(), 6u);

    const auto replay = run_replay((fs::path(a.directory) / "manifest.cfg").string(), (dir / "replay").string());
    EXPECT_TRUE(replay.identical);
    fs::remove_all(dir);
}

TEST(Experiment, AblationEmitsFourLabelledCurves) {
    const auto dir = scratch_dir("ablate");
    auto cfg = tiny_experiment(dir.string());
    cfg.seeds = {1};
    const auto runs = run_ablate(cfg);
    ASSERT_EQ(runs.size(), 4u);
    const auto summary = nlohmann::json::parse(read_text_file((dir / "summary.json").string()));
    for (const char* g : {"cgdm", "no-con", "no-dc", "gdm"}) {
        EXPECT_TRUE(summary["metrics"].contains(g)) << g;
        EXPECT_TRUE(summary["metrics"][g].contains("test_reward")) << g;
    }
    EXPECT_EQ(summary["metrics"]["no-con"]["mean_confidence"]["mean"].get<double>(), 1.0);
    EXPECT_EQ(summary["metrics"]["no-dc"]["consistency_grad_norm"]["mean"].get<double>(), 0.0);
    fs::remove_all(dir);
}

TEST(Experiment, StepSweepReportsNormalisedRewardAndWallTime) {
    const auto dir = scratch_dir("sweep");
    auto cfg = tiny_experiment(dir.string());
    cfg.seeds = {1};
    cfg.sweep_axis = SweepAxis::steps;
    cfg.sweep_values = {1, 2, 3};
    run_sweep(cfg);
    const auto summary = nlohmann::json::parse(read_text_file((dir / "summary.json").string()));
    for (const char* g : {"cgdm@steps=1", "cgdm@steps=2", "cgdm@steps=3"}) {
        EXPECT_TRUE(summary["normalized_reward"].contains(g)) << g;
        EXPECT_TRUE(summary["wall_seconds_per_epoch"].contains(g)) << g;
        const double n = summary["normalized_reward"][g].get<double>();
        EXPECT_GE(n, 0.0);
        EXPECT_LE(n, 1.0);
    }
    fs::remove_all(dir);
}

TEST(Experiment, EvaluateNeedsACheckpointUnlessRandom) {
    const auto dir = scratch_dir("evaluate");
    auto cfg = tiny_experiment(dir.string());
    EXPECT_THROW(run_evaluate(cfg, 1, {false}), ConfigError);
    cfg.mode = learner::Mode::random;
    const auto rows = run_evaluate(cfg, 1, {false});
    bool saw_reputation = false;
    for (const auto& r : rows) saw_reputation = saw_reputation || r.metric == "reputation.u0.s1";
    EXPECT_TRUE(saw_reputation);
}
