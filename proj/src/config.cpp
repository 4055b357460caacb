#include "ulab/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace ulab::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
        --e;
    }
    return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> parts;
    std::istringstream ss(value);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        parts.push_back(trim(cell));
    }
    return parts;
}

}  // namespace

Ini Ini::parse_string(const std::string& text, const std::string& origin) {
    Ini ini;
    ini.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') {
            continue;
        }
        if (stripped.front() == '[') {
            if (stripped.back() != ']' || stripped.size() < 3) {
                throw ParseError(origin + ":" + std::to_string(line_no) + ": malformed section header");
            }
            section = trim(stripped.substr(1, stripped.size() - 2));
            continue;
        }
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": empty key");
        }
        if (section.empty()) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": key outside any section");
        }
        ini.values_[section + "." + key] = value;
    }
    return ini;
}

Ini Ini::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("config: cannot open '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str(), path);
}

const std::string* Ini::find(const std::string& section, const std::string& key) const {
    const auto it = values_.find(section + "." + key);
    return it == values_.end() ? nullptr : &it->second;
}

bool Ini::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

bool Ini::has_section(const std::string& section) const {
    const std::string prefix = section + ".";
    const auto it = values_.lower_bound(prefix);
    return it != values_.end() && it->first.compare(0, prefix.size(), prefix) == 0;
}

std::string Ini::get_string(const std::string& section, const std::string& key) const {
    const std::string* v = find(section, key);
    if (v == nullptr) {
        throw ParseError(origin_ + ": missing required key " + section + "." + key);
    }
    return *v;
}

std::string Ini::get_string(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    const std::string* v = find(section, key);
    return v == nullptr ? fallback : *v;
}

double Ini::get_double(const std::string& section, const std::string& key, double fallback) const {
    const std::string* v = find(section, key);
    if (v == nullptr) {
        return fallback;
    }
    try {
        std::size_t consumed = 0;
        const double value = std::stod(*v, &consumed);
        if (consumed != v->size()) {
            throw std::invalid_argument("trailing characters");
        }
        return value;
    } catch (const std::exception&) {
        throw ParseError(origin_ + ": key " + section + "." + key + " is not a number: '" + *v + "'");
    }
}

int Ini::get_int(const std::string& section, const std::string& key, int fallback) const {
    const double value = get_double(section, key, static_cast<double>(fallback));
    const int as_int = static_cast<int>(value);
    if (static_cast<double>(as_int) != value) {
        throw ParseError(origin_ + ": key " + section + "." + key + " must be an integer");
    }
    return as_int;
}

std::uint64_t Ini::get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const {
    const std::string* v = find(section, key);
    if (v == nullptr) {
        return fallback;
    }
    try {
        return std::stoull(*v);
    } catch (const std::exception&) {
        throw ParseError(origin_ + ": key " + section + "." + key + " is not an unsigned integer: '" + *v + "'");
    }
}

bool Ini::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    const std::string* v = find(section, key);
    if (v == nullptr) {
        return fallback;
    }
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") {
        return true;
    }
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") {
        return false;
    }
    throw ParseError(origin_ + ": key " + section + "." + key + " is not a boolean: '" + *v + "'");
}

std::vector<double> Ini::get_double_list(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const std::string& cell : split_list(get_string(section, key))) {
        try {
            out.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw ParseError(origin_ + ": key " + section + "." + key + " has a non-numeric entry '" + cell + "'");
        }
    }
    if (out.empty()) {
        throw ParseError(origin_ + ": key " + section + "." + key + " is an empty list");
    }
    return out;
}

std::vector<std::uint64_t> Ini::get_u64_list(const std::string& section, const std::string& key) const {
    std::vector<std::uint64_t> out;
    for (const std::string& cell : split_list(get_string(section, key))) {
        try {
            out.push_back(std::stoull(cell));
        } catch (const std::exception&) {
            throw ParseError(origin_ + ": key " + section + "." + key + " has a non-integer entry '" + cell + "'");
        }
    }
    return out;
}

std::vector<int> Ini::get_int_list(const std::string& section, const std::string& key) const {
    std::vector<int> out;
    for (double v : get_double_list(section, key)) {
        out.push_back(static_cast<int>(v));
    }
    return out;
}

namespace {

train::TrainConfig parse_train_block(const Ini& ini, const std::string& section,
                                     const train::TrainConfig& defaults) {
    train::TrainConfig cfg = defaults;
    cfg.lr0 = ini.get_double(section, "lr", cfg.lr0);
    cfg.momentum = ini.get_double(section, "momentum", cfg.momentum);
    cfg.weight_decay = ini.get_double(section, "weight_decay", cfg.weight_decay);
    cfg.batch_size = ini.get_int(section, "batch_size", cfg.batch_size);
    cfg.epochs = ini.get_int(section, "epochs", cfg.epochs);
    cfg.schedule_T = ini.get_int(section, "schedule_T", cfg.schedule_T);
    cfg.seed = ini.get_u64(section, "seed", cfg.seed);
    if (ini.has(section, "clip_norm")) {
        const double clip = ini.get_double(section, "clip_norm", 1.0);
        cfg.clip_norm = clip > 0.0 ? std::optional<double>(clip) : std::nullopt;
    }
    return cfg;
}

attack::PerturbationSpec parse_attack_block(const Ini& ini, const std::string& section,
                                            const attack::PerturbationSpec& defaults) {
    attack::PerturbationSpec spec = defaults;
    spec.kind = attack::kind_from_string(ini.get_string(section, "attack.kind", attack::kind_to_string(spec.kind)));
    spec.p = spec.kind == attack::Kind::gaussian ? attack::Norm::l2 : attack::Norm::linf;
    if (ini.has(section, "attack.p")) {
        spec.p = attack::norm_from_string(ini.get_string(section, "attack.p"));
    }
    spec.tau = ini.get_double(section, "attack.tau", spec.tau);
    spec.steps = ini.get_int(section, "attack.steps", spec.steps);
    spec.step_size = ini.get_double(section, "attack.step_size", spec.step_size);
    spec.targeted = ini.get_bool(section, "attack.targeted", spec.kind != attack::Kind::gaussian);
    spec.mc_count = ini.get_int(section, "attack.c", spec.mc_count);
    spec.clamp = ini.get_bool(section, "attack.clamp", spec.clamp);
    return spec;
}

}  // namespace

ExperimentConfig experiment_config_from_ini(const Ini& ini) {
    ExperimentConfig cfg;

    cfg.dataset.kind = ini.get_string("dataset", "kind", cfg.dataset.kind);
    cfg.dataset.path = ini.get_string("dataset", "path", cfg.dataset.path);
    cfg.dataset.classes = ini.get_int("dataset", "classes", cfg.dataset.classes);
    cfg.dataset.per_class = ini.get_int("dataset", "per_class", cfg.dataset.per_class);
    cfg.dataset.dim = ini.get_int("dataset", "dim", cfg.dataset.dim);
    cfg.dataset.spread = ini.get_double("dataset", "spread", cfg.dataset.spread);
    cfg.dataset.noise = ini.get_double("dataset", "noise", cfg.dataset.noise);
    cfg.dataset.seed = ini.get_u64("dataset", "seed", cfg.dataset.seed);
    const std::string mode = ini.get_string("dataset", "mode", "sample");
    if (mode == "sample") {
        cfg.dataset.mode = data::SplitMode::sample;
    } else if (mode == "class") {
        cfg.dataset.mode = data::SplitMode::class_mode;
    } else {
        throw ParseError("dataset.mode must be 'sample' or 'class', got '" + mode + "'");
    }
    cfg.dataset.forget_class = ini.get_int("dataset", "forget_class", cfg.dataset.forget_class);
    cfg.dataset.forget_fraction = ini.get_double("dataset", "forget_fraction", cfg.dataset.forget_fraction);
    cfg.dataset.test_fraction = ini.get_double("dataset", "test_fraction", cfg.dataset.test_fraction);
    cfg.dataset.split_seed = ini.get_u64("dataset", "split_seed", cfg.dataset.split_seed);

    if (ini.has("train", "hidden_dims")) {
        cfg.hidden_dims = ini.get_int_list("train", "hidden_dims");
    }
    cfg.activation = nn::activation_from_string(ini.get_string("train", "activation", "relu"));
    cfg.train = parse_train_block(ini, "train", cfg.train);
    cfg.retrain = parse_train_block(ini, "retrain", cfg.train);

    if (ini.has_section("unlearn")) {
        cfg.has_unlearn = true;
        auto& hyper = cfg.unlearn;
        hyper.method = unlearn::method_from_string(ini.get_string("unlearn", "method"));
        train::TrainConfig optim_defaults = cfg.train;
        optim_defaults.epochs = 2;
        hyper.optim = parse_train_block(ini, "unlearn", optim_defaults);
        hyper.sigma = ini.get_double("unlearn", "sigma", hyper.sigma);
        hyper.beta = ini.get_double("unlearn", "beta", hyper.beta);
        hyper.k_layers = ini.get_int("unlearn", "k_layers", hyper.k_layers);
        hyper.scrub_alpha = ini.get_double("unlearn", "scrub_alpha", hyper.scrub_alpha);
        hyper.scrub_gamma = ini.get_double("unlearn", "scrub_gamma", hyper.scrub_gamma);
        hyper.fisher_alpha = ini.get_double("unlearn", "fisher_alpha", hyper.fisher_alpha);
        hyper.ssd_alpha = ini.get_double("unlearn", "ssd_alpha", hyper.ssd_alpha);
        hyper.ssd_lambda = ini.get_double("unlearn", "ssd_lambda", hyper.ssd_lambda);
        hyper.cr_lambda = ini.get_double("unlearn", "cr_lambda", hyper.cr_lambda);
        hyper.cr_l2 = ini.get_double("unlearn", "cr_l2", hyper.cr_l2);
        hyper.rurk.tau = ini.get_double("unlearn", "rurk.tau", hyper.rurk.tau);
        hyper.rurk.lambda_f = ini.get_double("unlearn", "rurk.lambda_f", hyper.rurk.lambda_f);
        hyper.rurk.lambda_a = ini.get_double("unlearn", "rurk.lambda_a", hyper.rurk.lambda_a);
        hyper.rurk.v = ini.get_int("unlearn", "rurk.v", hyper.rurk.v);
        hyper.rurk.steps = ini.get_int("unlearn", "rurk.steps", hyper.rurk.steps);
        hyper.rurk.step_size = ini.get_double("unlearn", "rurk.step_size", hyper.rurk.step_size);
        const std::string vuln = ini.get_string("unlearn", "rurk.method", "ball");
        if (vuln == "ball") {
            hyper.rurk.vuln_method = attack::VulnMethod::ball;
        } else if (vuln == "fgsm" || vuln == "pgd") {
            hyper.rurk.vuln_method = attack::VulnMethod::targeted_attack;
            hyper.rurk.attack_kind = attack::kind_from_string(vuln);
        } else {
            throw ParseError("unlearn.rurk.method must be ball, fgsm or pgd");
        }
    }

    if (ini.has("eval", "tau_grid")) {
        cfg.eval.tau_grid = ini.get_double_list("eval", "tau_grid");
    }
    cfg.eval.attack.mc_count = 100;
    cfg.eval.attack = parse_attack_block(ini, "eval", cfg.eval.attack);
    cfg.eval.eta = ini.get_double("eval", "eta", cfg.eval.eta);
    cfg.eval.max_relearn_epochs = ini.get_int("eval", "max_relearn_epochs", cfg.eval.max_relearn_epochs);
    cfg.eval.mia_seed = ini.get_u64("eval", "mia_seed", cfg.eval.mia_seed);
    cfg.eval.eval_seed = ini.get_u64("eval", "eval_seed", cfg.eval.eval_seed);
    cfg.eval.relearn = cfg.train;
    cfg.eval.relearn.epochs = 1;

    cfg.theory.enabled = ini.has_section("theory") && ini.get_bool("theory", "enabled", true);
    cfg.theory.a1_pairs = ini.get_int("theory", "a1_pairs", cfg.theory.a1_pairs);
    cfg.theory.a1_support_max = ini.get_int("theory", "a1_support_max", cfg.theory.a1_support_max);
    cfg.theory.a1_seed = ini.get_u64("theory", "a1_seed", cfg.theory.a1_seed);
    cfg.theory.hemisphere_samples = ini.get_int("theory", "hemisphere_samples", cfg.theory.hemisphere_samples);
    if (ini.has("theory", "hemisphere_dims")) {
        cfg.theory.hemisphere_dims = ini.get_int_list("theory", "hemisphere_dims");
    }
    if (ini.has("theory", "hemisphere_taus")) {
        cfg.theory.hemisphere_taus = ini.get_double_list("theory", "hemisphere_taus");
    }
    cfg.theory.hemisphere_seed = ini.get_u64("theory", "hemisphere_seed", cfg.theory.hemisphere_seed);

    cfg.output_dir = ini.get_string("output", "dir", cfg.output_dir);
    cfg.trials = ini.get_int("experiment", "trials", cfg.trials);
    if (ini.has("experiment", "seeds")) {
        cfg.seeds = ini.get_u64_list("experiment", "seeds");
    }
    if (static_cast<int>(cfg.seeds.size()) != cfg.trials) {
        throw ParseError("experiment.seeds must list exactly experiment.trials seeds (" +
                         std::to_string(cfg.seeds.size()) + " given, " + std::to_string(cfg.trials) + " trials)");
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    return experiment_config_from_ini(Ini::parse_file(path));
}

}  // namespace ulab::config
