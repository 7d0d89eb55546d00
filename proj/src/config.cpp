#include "cliff/config.hpp"

#include <json.hpp>

#include <set>

namespace cliff::cli {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
void maybe(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) {
        try {
            out = obj.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("key '") + key + "': " + e.what());
        }
    }
}

}  // namespace

void RunConfig::validate() const {
    kernel.validate();
    weights.validate();
    encoder.validate();
    train.validate();
    if (dataset.n < 2) throw ConfigError("dataset.n must be >= 2");
    if (dataset.min_jump < 1.0) throw ConfigError("dataset.min_jump must be >= 1");
    if (!(dataset.mixing_scale > 0.0)) throw ConfigError("dataset.mixing_scale must be positive");
    if (dataset.threshold_counts.empty() && dataset.thresholds.empty())
        throw ConfigError("dataset needs threshold_counts or explicit thresholds");
    if (!(eval.min_prominence > 0.0 && eval.min_prominence <= 1.0))
        throw ConfigError("eval.min_prominence must be in (0, 1]");
    if (eval.boundary_margin < 0.0) throw ConfigError("eval.boundary_margin must be >= 0");
}

RunConfig default_config() {
    RunConfig cfg;
    cfg.weights.kernel = cfg.kernel;
    cfg.train.weights = cfg.weights;
    return cfg;
}

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    require_keys(j, "config", {"dataset", "kernel", "weights", "encoder", "train", "eval"});

    RunConfig cfg;
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        require_keys(d, "dataset",
                     {"threshold_counts", "thresholds", "min_jump", "mixing_scale",
                      "max_condition", "n", "dataset_seed"});
        maybe(d, "threshold_counts", cfg.dataset.threshold_counts);
        maybe(d, "thresholds", cfg.dataset.thresholds);
        maybe(d, "min_jump", cfg.dataset.min_jump);
        maybe(d, "mixing_scale", cfg.dataset.mixing_scale);
        maybe(d, "max_condition", cfg.dataset.max_condition);
        maybe(d, "n", cfg.dataset.n);
        maybe(d, "dataset_seed", cfg.dataset.dataset_seed);
    }
    if (j.contains("kernel")) {
        const auto& k = j.at("kernel");
        require_keys(k, "kernel", {"sigma", "grid_a", "grid_b", "grid_k"});
        maybe(k, "sigma", cfg.kernel.sigma);
        maybe(k, "grid_a", cfg.kernel.grid_a);
        maybe(k, "grid_b", cfg.kernel.grid_b);
        maybe(k, "grid_k", cfg.kernel.grid_k);
    }
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        require_keys(w, "weights",
                     {"lambda_uni", "lambda_biv", "lambda_kl_uni", "m_conditioning", "divergence",
                      "zeta_policy", "kl_random_sampling"});
        maybe(w, "lambda_uni", cfg.weights.lambda_uni);
        maybe(w, "lambda_biv", cfg.weights.lambda_biv);
        maybe(w, "lambda_kl_uni", cfg.weights.lambda_kl_uni);
        maybe(w, "m_conditioning", cfg.weights.m_conditioning);
        maybe(w, "kl_random_sampling", cfg.weights.kl_random_sampling);
        if (w.contains("divergence")) {
            const std::string name = w.at("divergence").get<std::string>();
            if (name == "jsd")
                cfg.weights.divergence = criterion::Divergence::jsd;
            else if (name == "squared_hellinger")
                cfg.weights.divergence = criterion::Divergence::squared_hellinger;
            else
                throw ConfigError("weights.divergence must be 'jsd' or 'squared_hellinger'");
        }
        if (w.contains("zeta_policy")) {
            const std::string name = w.at("zeta_policy").get<std::string>();
            if (name == "random_from_batch")
                cfg.weights.zeta_policy = criterion::ZetaPolicy::random_from_batch;
            else if (name == "first_m")
                cfg.weights.zeta_policy = criterion::ZetaPolicy::first_m;
            else
                throw ConfigError("weights.zeta_policy must be 'random_from_batch' or 'first_m'");
        }
    }
    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        require_keys(e, "encoder", {"layer_dims"});
        maybe(e, "layer_dims", cfg.encoder.layer_dims);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        require_keys(t, "train",
                     {"learning_rate", "batch_size", "epochs", "adam_beta1", "adam_beta2",
                      "adam_eps", "init_seed", "zeta_seed"});
        maybe(t, "learning_rate", cfg.train.learning_rate);
        maybe(t, "batch_size", cfg.train.batch_size);
        maybe(t, "epochs", cfg.train.epochs);
        maybe(t, "adam_beta1", cfg.train.adam_beta1);
        maybe(t, "adam_beta2", cfg.train.adam_beta2);
        maybe(t, "adam_eps", cfg.train.adam_eps);
        maybe(t, "init_seed", cfg.train.init_seed);
        maybe(t, "zeta_seed", cfg.train.zeta_seed);
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        require_keys(e, "eval", {"min_prominence", "boundary_margin"});
        maybe(e, "min_prominence", cfg.eval.min_prominence);
        maybe(e, "boundary_margin", cfg.eval.boundary_margin);
    }

    cfg.weights.kernel = cfg.kernel;
    cfg.train.weights = cfg.weights;
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
    json j;
    j["dataset"] = {{"threshold_counts", cfg.dataset.threshold_counts},
                    {"thresholds", cfg.dataset.thresholds},
                    {"min_jump", cfg.dataset.min_jump},
                    {"mixing_scale", cfg.dataset.mixing_scale},
                    {"max_condition", cfg.dataset.max_condition},
                    {"n", cfg.dataset.n},
                    {"dataset_seed", cfg.dataset.dataset_seed}};
    j["kernel"] = {{"sigma", cfg.kernel.sigma},
                   {"grid_a", cfg.kernel.grid_a},
                   {"grid_b", cfg.kernel.grid_b},
                   {"grid_k", cfg.kernel.grid_k}};
    j["weights"] = {
        {"lambda_uni", cfg.weights.lambda_uni},
        {"lambda_biv", cfg.weights.lambda_biv},
        {"lambda_kl_uni", cfg.weights.lambda_kl_uni},
        {"m_conditioning", cfg.weights.m_conditioning},
        {"divergence",
         cfg.weights.divergence == criterion::Divergence::jsd ? "jsd" : "squared_hellinger"},
        {"zeta_policy", cfg.weights.zeta_policy == criterion::ZetaPolicy::random_from_batch
                            ? "random_from_batch"
                            : "first_m"},
        {"kl_random_sampling", cfg.weights.kl_random_sampling}};
    j["encoder"] = {{"layer_dims", cfg.encoder.layer_dims}};
    j["train"] = {{"learning_rate", cfg.train.learning_rate},
                  {"batch_size", cfg.train.batch_size},
                  {"epochs", cfg.train.epochs},
                  {"adam_beta1", cfg.train.adam_beta1},
                  {"adam_beta2", cfg.train.adam_beta2},
                  {"adam_eps", cfg.train.adam_eps},
                  {"init_seed", cfg.train.init_seed},
                  {"zeta_seed", cfg.train.zeta_seed}};
    j["eval"] = {{"min_prominence", cfg.eval.min_prominence},
                 {"boundary_margin", cfg.eval.boundary_margin}};
    return j.dump(2) + "\n";
}

io::Dataset generate_dataset(const DatasetConfig& ds) {
    io::Dataset out;
    if (!ds.thresholds.empty()) {
        out.spec =
            synth::make_spec_with_thresholds(ds.thresholds, ds.dataset_seed, ds.min_jump);
    } else {
        out.spec = synth::make_random_spec(ds.threshold_counts, ds.dataset_seed, ds.min_jump);
    }
    out.mixing =
        synth::make_random_mixing(out.spec.d, ds.dataset_seed ^ 0x9e3779b97f4a7c15ull,
                                  ds.max_condition);
    out.mixing.scale = ds.mixing_scale;
    out.z = synth::sample_latents(out.spec, ds.n, ds.dataset_seed ^ 0xd1342543de82ef95ull);
    out.x = synth::mix(out.z, out.mixing);
    out.seed = ds.dataset_seed;
    return out;
}

std::string mcc_report_to_json(const evalkit::MccReport& report) {
    json j{{"mcc", report.mcc},
           {"corr", report.corr},
           {"assignment", report.assignment},
           {"signs", report.signs},
           {"warnings", report.warnings}};
    return j.dump(2) + "\n";
}

std::string threshold_report_to_json(const evalkit::ThresholdReport& report) {
    json per_factor = json::array();
    for (const auto& f : report.detected)
        per_factor.push_back({{"locations", f.locations}, {"heights", f.heights}});
    json j{{"detected", per_factor},
           {"agreement_rate", report.agreement_rate},
           {"permutation", report.permutation},
           {"reversals", report.reversals},
           {"structural_mismatch", report.structural_mismatch}};
    return j.dump(2) + "\n";
}

}  // namespace cliff::cli
