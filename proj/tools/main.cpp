#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ulab/experiment.hpp"
#include "ulab/rng.hpp"

// unlearn-lab <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--trial <i>]
// Exit codes: 0 ok, 2 config/parse error, 3 numeric error.

namespace {

using namespace ulab;

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> trial;
};

config::ExperimentConfig load_config(const CliOptions& opt) {
    config::ExperimentConfig cfg = config::load_experiment_config(opt.config_path);
    if (!opt.out_dir.empty()) {
        cfg.output_dir = opt.out_dir;
    }
    if (opt.seed_override) {
        cfg.trials = 1;
        cfg.seeds = {*opt.seed_override};
    }
    if (opt.trial) {
        if (*opt.trial < 0 || *opt.trial >= static_cast<int>(cfg.seeds.size())) {
            throw ConfigError("--trial index out of range");
        }
        cfg.seeds = {cfg.seeds[static_cast<std::size_t>(*opt.trial)]};
        cfg.trials = 1;
        cfg.first_trial_index = *opt.trial;
    }
    return cfg;
}

int cmd_train(const CliOptions& opt) {
    const config::ExperimentConfig cfg = load_config(opt);
    experiment::ensure_dir(cfg.output_dir);
    const data::UnlearnTask task = experiment::build_task(cfg.dataset);
    const std::vector<int> dims = experiment::model_dims(cfg, task);
    for (std::size_t t = 0; t < cfg.seeds.size(); ++t) {
        const std::uint64_t seed = cfg.seeds[t];
        const std::string trial_dir =
            cfg.output_dir + "/trial_" + std::to_string(cfg.first_trial_index + static_cast<int>(t));
        experiment::ensure_dir(trial_dir);
        train::TrainConfig train_cfg = cfg.train;
        train_cfg.seed = seed;
        auto run = train::train(nn::init_params(dims, cfg.activation, seed), task.dataset, task.train_idx(),
                                train_cfg);
        nn::checkpoint_save(run.model, trial_dir + "/original.ckpt");
        train::write_loss_history_csv(run.loss_history, trial_dir + "/original_loss.csv");

        train::TrainConfig retrain_cfg = cfg.retrain;
        retrain_cfg.seed = seed;
        auto retrain_run = train::train(nn::init_params(dims, cfg.activation, seed), task.dataset, task.retain_idx,
                                        retrain_cfg);
        nn::checkpoint_save(retrain_run.model, trial_dir + "/retrain.ckpt");
        train::write_loss_history_csv(retrain_run.loss_history, trial_dir + "/retrain_loss.csv");
        std::cout << "trial " << t << ": trained original and re-train models (seed " << seed << ")\n";
    }
    return 0;
}

int cmd_unlearn(const CliOptions& opt) {
    const config::ExperimentConfig cfg = load_config(opt);
    if (!cfg.has_unlearn) {
        throw ConfigError("config has no [unlearn] section");
    }
    const data::UnlearnTask task = experiment::build_task(cfg.dataset);
    for (std::size_t t = 0; t < cfg.seeds.size(); ++t) {
        const std::uint64_t seed = cfg.seeds[t];
        const std::string trial_dir =
            cfg.output_dir + "/trial_" + std::to_string(cfg.first_trial_index + static_cast<int>(t));
        const nn::MlpModel original = nn::checkpoint_load(trial_dir + "/original.ckpt");
        unlearn::MethodHyper hyper = cfg.unlearn;
        hyper.init_seed = seed;
        const nn::MlpModel unlearned = unlearn::run_unlearn(original, task, hyper, seed);
        nn::checkpoint_save(unlearned, trial_dir + "/unlearned.ckpt");
        std::cout << "trial " << t << ": " << unlearn::method_to_string(cfg.unlearn.method)
                  << " model written\n";
    }
    return 0;
}

int cmd_evaluate(const CliOptions& opt) {
    const config::ExperimentConfig cfg = load_config(opt);
    const data::UnlearnTask task = experiment::build_task(cfg.dataset);
    for (std::size_t t = 0; t < cfg.seeds.size(); ++t) {
        const std::uint64_t seed = cfg.seeds[t];
        const std::string trial_dir =
            cfg.output_dir + "/trial_" + std::to_string(cfg.first_trial_index + static_cast<int>(t));
        const nn::MlpModel original = nn::checkpoint_load(trial_dir + "/original.ckpt");
        const nn::MlpModel retrained = nn::checkpoint_load(trial_dir + "/retrain.ckpt");

        config::EvalConfig eval_cfg = cfg.eval;
        eval_cfg.eval_seed = Rng::mix(cfg.eval.eval_seed, seed);
        eval_cfg.relearn.seed = Rng::mix(seed, 0x6c72);

        std::vector<std::pair<std::string, eval::EvalReport>> reports;
        const eval::EvalReport retrain_report = experiment::evaluate_model(
            retrained, retrained, original, task, eval_cfg, /*with_relearn=*/true, /*with_curve=*/false);
        reports.emplace_back("retrain", retrain_report);

        std::ifstream probe(trial_dir + "/unlearned.ckpt");
        if (probe.good()) {
            probe.close();
            const nn::MlpModel unlearned = nn::checkpoint_load(trial_dir + "/unlearned.ckpt");
            eval::EvalReport report = experiment::evaluate_model(unlearned, retrained, original, task, eval_cfg,
                                                                 /*with_relearn=*/true, /*with_curve=*/true);
            report.avg_gap = eval::avg_gap(report, retrain_report);
            eval::write_rk_curve_csv(report.curve, trial_dir + "/rk_curve.csv");
            reports.emplace_back("unlearned", report);
        }
        experiment::write_reports_json(trial_dir + "/report.json", reports);
        std::cout << "trial " << t << ": report written\n";
    }
    return 0;
}

int cmd_rk_curve(const CliOptions& opt) {
    const config::ExperimentConfig cfg = load_config(opt);
    const data::UnlearnTask task = experiment::build_task(cfg.dataset);
    for (std::size_t t = 0; t < cfg.seeds.size(); ++t) {
        const std::uint64_t seed = cfg.seeds[t];
        const std::string trial_dir =
            cfg.output_dir + "/trial_" + std::to_string(cfg.first_trial_index + static_cast<int>(t));
        const nn::MlpModel retrained = nn::checkpoint_load(trial_dir + "/retrain.ckpt");
        const nn::MlpModel unlearned = nn::checkpoint_load(trial_dir + "/unlearned.ckpt");
        const auto curve = eval::rk_curve(unlearned, retrained, task, cfg.eval.tau_grid, cfg.eval.attack,
                                          Rng::mix(cfg.eval.eval_seed, seed));
        eval::write_rk_curve_csv(curve, trial_dir + "/rk_curve.csv");
        std::cout << "trial " << t << ": rk_curve.csv written\n";
    }
    return 0;
}

int cmd_theory(const CliOptions& opt) {
    config::ExperimentConfig cfg = load_config(opt);
    cfg.theory.enabled = true;
    const int failures = experiment::run_theory_block(cfg.theory, cfg.output_dir);
    std::cout << "theory_report.csv written (" << failures << " failed checks)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale machine unlearning laboratory"};
    app.require_subcommand(1);

    CliOptions opt;
    std::string iris_path = "data/iris.csv";

    const auto add_common = [&](CLI::App* sub, bool config_required = true) {
        sub->add_option("--config", opt.config_path, "experiment config (INI)")->required(config_required);
        sub->add_option("--out", opt.out_dir, "output directory override");
        sub->add_option("--seed", opt.seed_override, "run a single trial with this seed");
        sub->add_option("--trial", opt.trial, "run only this trial index");
    };

    CLI::App* train_cmd = app.add_subcommand("train", "train the original and re-train reference models");
    add_common(train_cmd);
    CLI::App* unlearn_cmd = app.add_subcommand("unlearn", "apply the configured unlearning method");
    add_common(unlearn_cmd);
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "compute metrics for stored checkpoints");
    add_common(eval_cmd);
    CLI::App* rk_cmd = app.add_subcommand("rk-curve", "residual-knowledge curve for stored checkpoints");
    add_common(rk_cmd);
    CLI::App* theory_cmd = app.add_subcommand("theory", "run the numerical theory checks");
    add_common(theory_cmd);
    CLI::App* run_cmd = app.add_subcommand("run", "full pipeline: train, unlearn, evaluate, aggregate");
    add_common(run_cmd);
    CLI::App* demo_cmd = app.add_subcommand("demo-iris", "iris demo: gd vs rurk residual knowledge");
    demo_cmd->add_option("--data", iris_path, "path to the iris csv");
    demo_cmd->add_option("--out", opt.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (train_cmd->parsed()) {
            return cmd_train(opt);
        }
        if (unlearn_cmd->parsed()) {
            return cmd_unlearn(opt);
        }
        if (eval_cmd->parsed()) {
            return cmd_evaluate(opt);
        }
        if (rk_cmd->parsed()) {
            return cmd_rk_curve(opt);
        }
        if (theory_cmd->parsed()) {
            return cmd_theory(opt);
        }
        if (run_cmd->parsed()) {
            return experiment::run_experiment(load_config(opt));
        }
        if (demo_cmd->parsed()) {
            return experiment::run_demo_iris(iris_path, opt.out_dir.empty() ? "out_iris" : opt.out_dir);
        }
    } catch (const ulab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const ulab::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const ulab::VersionError& e) {
        std::cerr << "version error: " << e.what() << '\n';
        return 2;
    } catch (const ulab::ShapeError& e) {
        std::cerr << "shape error: " << e.what() << '\n';
        return 3;
    } catch (const ulab::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
