#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ulab/config.hpp"
#include "ulab/experiment.hpp"

// End-to-end checks of the command-line surface: exit codes, the staged
// train -> unlearn -> evaluate -> rk-curve flow, and the retrain-only
// degenerate pipeline.

namespace fs = std::filesystem;

namespace {

const std::string kBinary = ULAB_CLI_PATH;

int run_cli(const std::string& args) {
    const std::string cmd = "\"" + kBinary + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    std::error_code ec;
    fs::remove_all(dir, ec);
    fs::create_directories(dir);
    return dir;
}

void write_tiny_config(const fs::path& path, bool with_unlearn) {
    std::ofstream out(path);
    out << "[experiment]\ntrials = 1\nseeds = 131\n"
        << "[dataset]\nkind = blobs\nclasses = 3\nper_class = 20\ndim = 3\nspread = 0.2\nseed = 6\n"
        << "mode = sample\nforget_class = 0\nforget_fraction = 0.5\ntest_fraction = 0.2\nsplit_seed = 7\n"
        << "[train]\nhidden_dims = 8\nlr = 0.05\nbatch_size = 16\nepochs = 8\n";
    if (with_unlearn) {
        out << "[unlearn]\nmethod = gd\nlr = 0.02\nepochs = 2\n";
    }
    out << "[eval]\ntau_grid = 0, 0.02\nattack.kind = gaussian\nattack.c = 40\n";
}

}  // namespace

TEST_CASE("cli: config errors exit with code 2") {
    CHECK(run_cli("run --config /nonexistent/config.ini") == 2);

    const fs::path dir = fresh_dir("ulab_cli_badcfg");
    const fs::path cfg = dir / "bad.ini";
    {
        std::ofstream out(cfg);
        out << "[experiment]\ntrials = 2\nseeds = 1\n[dataset]\nkind = blobs\n";
    }
    CHECK(run_cli("run --config \"" + cfg.string() + "\"") == 2);
}

TEST_CASE("cli: staged train/unlearn/evaluate/rk-curve flow") {
    const fs::path dir = fresh_dir("ulab_cli_staged");
    const fs::path cfg = dir / "exp.ini";
    write_tiny_config(cfg, /*with_unlearn=*/true);
    const std::string common = " --config \"" + cfg.string() + "\" --out \"" + (dir / "out").string() + "\"";

    CHECK(run_cli("train" + common) == 0);
    CHECK(fs::exists(dir / "out/trial_0/original.ckpt"));
    CHECK(fs::exists(dir / "out/trial_0/retrain.ckpt"));
    CHECK(fs::exists(dir / "out/trial_0/original_loss.csv"));

    CHECK(run_cli("unlearn" + common) == 0);
    CHECK(fs::exists(dir / "out/trial_0/unlearned.ckpt"));

    CHECK(run_cli("evaluate" + common) == 0);
    CHECK(fs::exists(dir / "out/trial_0/report.json"));
    CHECK(fs::exists(dir / "out/trial_0/rk_curve.csv"));

    CHECK(run_cli("rk-curve" + common) == 0);

    // rk_curve.csv keeps a stable header
    std::ifstream curve(dir / "out/trial_0/rk_curve.csv");
    std::string header;
    std::getline(curve, header);
    CHECK(header == "tau,r_hat,k_hat,prevalence,denominator_zero_count");

    // unlearn before train in a fresh directory fails with a parse error
    const fs::path dir2 = fresh_dir("ulab_cli_staged2");
    const fs::path cfg2 = dir2 / "exp.ini";
    write_tiny_config(cfg2, true);
    CHECK(run_cli("unlearn --config \"" + cfg2.string() + "\" --out \"" + (dir2 / "out").string() + "\"") == 2);
}

TEST_CASE("cli: retrain-only run reports just the re-train row") {
    const fs::path dir = fresh_dir("ulab_cli_minimal");
    const fs::path cfg = dir / "exp.ini";
    write_tiny_config(cfg, /*with_unlearn=*/false);
    CHECK(run_cli("run --config \"" + cfg.string() + "\" --out \"" + (dir / "out").string() + "\"") == 0);

    std::ifstream in(dir / "out/report.json");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string report = buffer.str();
    CHECK(report.find("\"retrain\"") != std::string::npos);
    CHECK(report.find("\"unlearned\"") == std::string::npos);
    CHECK(report.find("\"original\"") == std::string::npos);
}

TEST_CASE("cli: theory subcommand writes the report csv") {
    const fs::path dir = fresh_dir("ulab_cli_theory");
    const fs::path cfg = dir / "exp.ini";
    {
        std::ofstream out(cfg);
        write_tiny_config(cfg, false);
        std::ofstream app(cfg, std::ios::app);
        app << "[theory]\nenabled = true\na1_pairs = 50\nhemisphere_samples = 20000\n"
            << "hemisphere_dims = 20\nhemisphere_taus = 0.2, 0.5\n";
    }
    CHECK(run_cli("theory --config \"" + cfg.string() + "\" --out \"" + (dir / "out").string() + "\"") == 0);
    std::ifstream csv(dir / "out/theory_report.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "name,parameters,bound,empirical,verdict");
    int rows = 0;
    std::string line;
    while (std::getline(csv, line)) {
        if (!line.empty()) {
            ++rows;
        }
    }
    CHECK(rows >= 5);  // violation sweep + hemisphere grid + readout exhibit + bound rows
}
