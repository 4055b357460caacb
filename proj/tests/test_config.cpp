#include <doctest.h>

#include "ulab/config.hpp"

using namespace ulab;

namespace {

const char* kSample = R"(
# demo configuration
[experiment]
trials = 3
seeds = 131,42,7

[dataset]
kind = blobs
classes = 3
per_class = 50
dim = 4
spread = 0.15
mode = sample
forget_class = 0
forget_fraction = 0.5
test_fraction = 0.2
seed = 7
split_seed = 99

[train]
hidden_dims = 100
activation = relu
lr = 0.01
momentum = 0.9
weight_decay = 5e-4
batch_size = 128
epochs = 40
clip_norm = 1.0
schedule_T = 200

[unlearn]
method = rurk
lr = 0.01
epochs = 2
rurk.tau = 0.03
rurk.lambda_f = 0.03
rurk.lambda_a = 0.03
rurk.v = 1
rurk.method = ball

[eval]
tau_grid = 0, 0.01, 0.02, 0.03
attack.kind = gaussian
attack.c = 100
eta = 0.05
max_relearn_epochs = 30

[output]
dir = out_test
)";

}  // namespace

TEST_CASE("ini parsing: sections, dotted keys, comments") {
    const auto ini = config::Ini::parse_string("[a]\nx = 1\n; comment\ny.z = hello\n[b]\nx = 2.5\nflag = true\n");
    CHECK(ini.get_int("a", "x", 0) == 1);
    CHECK(ini.get_string("a", "y.z") == "hello");
    CHECK(ini.get_double("b", "x", 0.0) == 2.5);
    CHECK(ini.get_bool("b", "flag", false));
    CHECK(ini.get_int("a", "missing", 42) == 42);
    CHECK(ini.has_section("a"));
    CHECK_FALSE(ini.has_section("c"));
}

TEST_CASE("ini parsing errors carry position information") {
    CHECK_THROWS_AS(config::Ini::parse_string("[a\nx = 1\n"), ParseError);
    CHECK_THROWS_AS(config::Ini::parse_string("[a]\nno equals sign\n"), ParseError);
    CHECK_THROWS_AS(config::Ini::parse_string("x = 1\n"), ParseError);  // key outside section
    const auto ini = config::Ini::parse_string("[a]\nx = abc\n");
    CHECK_THROWS_AS(ini.get_double("a", "x", 0.0), ParseError);
    CHECK_THROWS_AS(ini.get_bool("a", "x", false), ParseError);
    CHECK_THROWS_WITH_AS(ini.get_string("a", "nope"), doctest::Contains("nope"), ParseError);
}

TEST_CASE("experiment config: full sample document") {
    const auto cfg = config::experiment_config_from_ini(config::Ini::parse_string(kSample));
    CHECK(cfg.trials == 3);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{131, 42, 7});
    CHECK(cfg.dataset.kind == "blobs");
    CHECK(cfg.dataset.forget_fraction == 0.5);
    CHECK(cfg.hidden_dims == std::vector<int>{100});
    CHECK(cfg.train.lr0 == 0.01);
    CHECK(cfg.train.weight_decay == 5e-4);
    CHECK(cfg.train.clip_norm == 1.0);
    CHECK(cfg.has_unlearn);
    CHECK(cfg.unlearn.method == unlearn::Method::rurk);
    CHECK(cfg.unlearn.optim.epochs == 2);
    CHECK(cfg.unlearn.rurk.tau == 0.03);
    CHECK(cfg.unlearn.rurk.vuln_method == attack::VulnMethod::ball);
    CHECK(cfg.eval.tau_grid == std::vector<double>{0.0, 0.01, 0.02, 0.03});
    CHECK(cfg.eval.attack.kind == attack::Kind::gaussian);
    CHECK(cfg.eval.attack.mc_count == 100);
    CHECK(cfg.output_dir == "out_test");
}

TEST_CASE("experiment config: seeds must match trials") {
    const char* bad = "[experiment]\ntrials = 2\nseeds = 1,2,3\n[dataset]\nkind = blobs\n";
    CHECK_THROWS_AS(config::experiment_config_from_ini(config::Ini::parse_string(bad)), ParseError);
}

TEST_CASE("experiment config: unknown method and mode are rejected") {
    const char* bad_method = "[unlearn]\nmethod = banana\n";
    CHECK_THROWS_AS(config::experiment_config_from_ini(config::Ini::parse_string(bad_method)), ConfigError);
    const char* bad_mode = "[dataset]\nmode = both\n";
    CHECK_THROWS_AS(config::experiment_config_from_ini(config::Ini::parse_string(bad_mode)), ParseError);
}
