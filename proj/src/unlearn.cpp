#include "ulab/unlearn.hpp"

namespace ulab::unlearn {

Method method_from_string(const std::string& name) {
    if (name == "retrain") return Method::retrain;
    if (name == "gd") return Method::gd;
    if (name == "ngd") return Method::ngd;
    if (name == "ga") return Method::ga;
    if (name == "neggrad_plus" || name == "neggrad+") return Method::neggrad_plus;
    if (name == "eu_k") return Method::eu_k;
    if (name == "cf_k") return Method::cf_k;
    if (name == "scrub") return Method::scrub;
    if (name == "fisher") return Method::fisher;
    if (name == "ssd") return Method::ssd;
    if (name == "cr") return Method::cr;
    if (name == "ntk") return Method::ntk;
    if (name == "rurk") return Method::rurk;
    throw ConfigError("unknown unlearning method '" + name + "'");
}

const char* method_to_string(Method method) {
    switch (method) {
        case Method::retrain: return "retrain";
        case Method::gd: return "gd";
        case Method::ngd: return "ngd";
        case Method::ga: return "ga";
        case Method::neggrad_plus: return "neggrad_plus";
        case Method::eu_k: return "eu_k";
        case Method::cf_k: return "cf_k";
        case Method::scrub: return "scrub";
        case Method::fisher: return "fisher";
        case Method::ssd: return "ssd";
        case Method::cr: return "cr";
        case Method::ntk: return "ntk";
        default: return "rurk";
    }
}

nn::MlpModel run_unlearn(const nn::MlpModel& original, const data::UnlearnTask& task, const MethodHyper& hyper,
                         std::uint64_t seed) {
    switch (hyper.method) {
        case Method::retrain: {
            train::TrainConfig config = hyper.optim;
            config.seed = seed;
            return retrain_oracle(task, original.layer_dims, original.activation, hyper.init_seed, config);
        }
        case Method::gd:
        case Method::ngd:
        case Method::ga:
        case Method::neggrad_plus:
        case Method::eu_k:
        case Method::cf_k:
        case Method::scrub:
            return finetune_unlearn(original, task, hyper, seed);
        case Method::fisher:
            return fisher_noise_unlearn(original, task, hyper.fisher_alpha, seed);
        case Method::ssd:
            return ssd_dampen(original, task, hyper.ssd_alpha, hyper.ssd_lambda);
        case Method::cr:
            return cr_unlearn(original, task, hyper.cr_lambda, hyper.cr_l2);
        case Method::ntk: {
            const nn::MlpModel init =
                nn::init_params(original.layer_dims, original.activation, hyper.init_seed);
            return ntk_removal(original, init, task).model;
        }
        case Method::rurk:
        default:
            return rurk_unlearn(original, task, hyper, seed);
    }
}

}  // namespace ulab::unlearn
