// Command-line entry point: data generation, training, evaluation,
// landscape sweeps, gradient self-checks, and the multi-seed experiment.
//
// Exit codes: 0 ok, 2 usage/config error, 3 numerical abort.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "cliff/config.hpp"
#include "cliff/evalkit.hpp"
#include "cliff/io.hpp"
#include "cliff/selftest.hpp"
#include "cliff/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

cliff::cli::RunConfig load_config(const std::string& path) {
    if (path.empty()) return cliff::cli::default_config();
    return cliff::cli::parse_config(cliff::io::read_file(path));
}

cliff::synth::LatentBatch encode_batch(const cliff::trainer::EncoderParams& params,
                                       const cliff::synth::LatentBatch& x) {
    cliff::synth::LatentBatch rec;
    rec.n = x.n;
    rec.d = static_cast<std::size_t>(params.spec.output_dim());
    rec.values = cliff::trainer::encode_plain(params, x.values, x.n);
    rec.provenance = cliff::synth::LatentBatch::Provenance::recovered_z;
    return rec;
}

struct EvalOutput {
    cliff::evalkit::MccReport mcc;
    cliff::evalkit::ThresholdReport thresholds;
    bool has_agreement = false;
};

EvalOutput evaluate(const cliff::io::Dataset& ds, const cliff::trainer::EncoderParams& params,
                    const cliff::cli::RunConfig& cfg) {
    EvalOutput out;
    const auto recovered = encode_batch(params, ds.x);
    out.mcc = cliff::evalkit::mcc(ds.z, recovered);
    out.thresholds.detected = cliff::evalkit::detect_thresholds(recovered, cfg.kernel, cfg.eval);
    if (ds.has_sidecar) {
        out.thresholds = cliff::evalkit::quantized_agreement(ds.z, ds.spec, recovered,
                                                             out.thresholds.detected);
        out.has_agreement = true;
    }
    return out;
}

struct SeedResult {
    int seed_offset = 0;
    double mcc = 0.0;
    double agreement = 0.0;
    bool counts_match = false;
    double final_loss = 0.0;
    bool aborted = false;
    std::string error;
};

int run_experiment(const cliff::cli::RunConfig& base, const std::string& out_dir, int seeds,
                   int workers, bool force) {
    const fs::path root(out_dir);
    if (fs::exists(root / "summary.json") && !force) {
        std::cerr << "cliff: output " << (root / "summary.json").string()
                  << " exists; pass --force to overwrite\n";
        return kExitUsage;
    }

    std::vector<SeedResult> results(static_cast<std::size_t>(seeds));
    std::atomic<int> next{0};
    std::mutex print_mutex;

    auto worker = [&]() {
        for (;;) {
            const int s = next.fetch_add(1);
            if (s >= seeds) return;
            cliff::cli::RunConfig cfg = base;
            cfg.dataset.dataset_seed = base.dataset.dataset_seed + static_cast<std::uint64_t>(s);
            cfg.train.init_seed = base.train.init_seed + static_cast<std::uint64_t>(s);
            cfg.train.zeta_seed = base.train.zeta_seed + static_cast<std::uint64_t>(s);

            SeedResult res;
            res.seed_offset = s;
            char dirname[32];
            std::snprintf(dirname, sizeof dirname, "seed_%03d", s);
            const fs::path seed_dir = root / dirname;
            try {
                const auto ds = cliff::cli::generate_dataset(cfg.dataset);
                cliff::io::write_dataset(seed_dir / "dataset.csv", ds);
                const auto trained = cliff::trainer::train(ds.x, cfg.encoder, cfg.train);
                cliff::io::write_params(seed_dir / "params.json", trained.params);
                cliff::io::write_metrics_csv(seed_dir / "metrics.csv", trained.log);
                cliff::io::write_file_atomic(seed_dir / "resolved_config.json",
                                             cliff::cli::config_to_json(cfg));
                res.final_loss = trained.log.back().report.total;

                const auto eval = evaluate(ds, trained.params, cfg);
                cliff::io::write_file_atomic(seed_dir / "mcc_report.json",
                                             cliff::cli::mcc_report_to_json(eval.mcc));
                cliff::io::write_file_atomic(
                    seed_dir / "threshold_report.json",
                    cliff::cli::threshold_report_to_json(eval.thresholds));
                res.mcc = eval.mcc.mcc;
                res.agreement = eval.thresholds.agreement_rate;
                res.counts_match = !eval.thresholds.structural_mismatch;
            } catch (const std::exception& e) {
                res.aborted = true;
                res.error = e.what();
            }
            {
                std::lock_guard<std::mutex> lock(print_mutex);
                if (res.aborted)
                    std::cerr << "seed " << s << ": ABORTED: " << res.error << "\n";
                else
                    std::cout << "seed " << s << ": mcc=" << res.mcc
                              << " agreement=" << res.agreement
                              << " counts_match=" << (res.counts_match ? 1 : 0) << "\n";
            }
            results[static_cast<std::size_t>(s)] = res;
        }
    };

    std::vector<std::thread> pool;
    const int nworkers = std::max(1, std::min(workers, seeds));
    for (int w = 0; w < nworkers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    double sum = 0.0, sumsq = 0.0;
    int ok = 0, matches = 0;
    for (const auto& r : results) {
        if (r.aborted) continue;
        sum += r.mcc;
        sumsq += r.mcc * r.mcc;
        ++ok;
        if (r.counts_match) ++matches;
    }
    if (ok == 0) {
        std::cerr << "cliff: every seed aborted\n";
        return kExitNumerical;
    }
    const double mean = sum / ok;
    const double var = ok > 1 ? std::max(0.0, (sumsq - sum * sum / ok) / (ok - 1)) : 0.0;
    const double stderr_mean = ok > 1 ? std::sqrt(var / ok) : 0.0;

    json summary;
    summary["seeds"] = seeds;
    summary["completed"] = ok;
    summary["mcc_mean"] = mean;
    summary["mcc_stderr"] = stderr_mean;
    summary["threshold_count_matches"] = matches;
    json per_seed = json::array();
    for (const auto& r : results)
        per_seed.push_back({{"seed_offset", r.seed_offset},
                            {"mcc", r.mcc},
                            {"agreement", r.agreement},
                            {"counts_match", r.counts_match},
                            {"final_loss", r.final_loss},
                            {"aborted", r.aborted}});
    summary["per_seed"] = per_seed;
    cliff::io::write_file_atomic(root / "summary.json", summary.dump(2) + "\n");

    std::ostringstream cs;
    cs << "seed_offset,mcc,agreement,counts_match,final_loss,aborted\n";
    for (const auto& r : results)
        cs << r.seed_offset << "," << cliff::io::format_double(r.mcc) << ","
           << cliff::io::format_double(r.agreement) << "," << (r.counts_match ? 1 : 0) << ","
           << cliff::io::format_double(r.final_loss) << "," << (r.aborted ? 1 : 0) << "\n";
    cliff::io::write_file_atomic(root / "summary.csv", cs.str());

    std::printf("experiment: mcc mean=%.2f stderr=%.2f over %d/%d seeds\n", mean, stderr_mean, ok,
                seeds);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cliff: disentanglement by axis-aligned density discontinuities"};
    app.require_subcommand(1);

    std::string config_path, data_path, params_path, out_path;
    std::uint64_t seed = 0;
    bool have_seed = false, force = false;
    int workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;

    auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset (CSV + JSON sidecar)");
    gen->add_option("--config", config_path, "Run config JSON");
    gen->add_option("--out", out_path, "Output CSV path")->required();
    auto* seed_opt = gen->add_option("--seed", seed, "Override dataset_seed");

    auto* train = app.add_subcommand("train", "Train the encoder on a dataset");
    train->add_option("--config", config_path, "Run config JSON");
    train->add_option("--data", data_path, "Dataset CSV")->required();
    train->add_option("--out", out_path, "Output directory")->required();
    train->add_flag("--force", force, "Overwrite existing outputs");

    auto* eval = app.add_subcommand("eval", "Evaluate trained params against the true factors");
    eval->add_option("--config", config_path, "Run config JSON");
    eval->add_option("--data", data_path, "Dataset CSV")->required();
    eval->add_option("--params", params_path, "Trained params JSON")->required();
    eval->add_option("--out", out_path, "Output directory for reports");
    bool dump_density = false;
    eval->add_flag("--dump-density", dump_density,
                   "Also write per-factor density/derivative grids as CSV");

    auto* landscape = app.add_subcommand("landscape", "Angle sweep of the loss terms (2 factors)");
    landscape->add_option("--config", config_path, "Run config JSON");
    landscape->add_option("--data", data_path, "Dataset CSV")->required();
    double step_degrees = 5.0;
    landscape->add_option("--step", step_degrees, "Angle step in degrees");
    landscape->add_option("--out", out_path, "Output CSV path")->required();
    std::uint64_t zeta_seed = 1;
    landscape->add_option("--zeta-seed", zeta_seed, "Seed for the conditioning draw");
    landscape->add_option("--workers", workers, "Worker threads");

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient self-check");
    std::uint64_t gc_seed = 1;
    gradcheck->add_option("--seed", gc_seed, "Seed for the random batches");
    bool sabotage = false;
    gradcheck->add_flag("--sabotage-abs", sabotage,
                        "Negative control: break one backward rule on purpose");

    auto* experiment = app.add_subcommand("experiment", "Multi-seed train/eval protocol");
    experiment->add_option("--config", config_path, "Run config JSON");
    experiment->add_option("--out", out_path, "Output directory")->required();
    int n_seeds = 10;
    experiment->add_option("--seeds", n_seeds, "Number of dataset/init seeds");
    experiment->add_option("--workers", workers, "Worker threads");
    experiment->add_flag("--force", force, "Overwrite existing outputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gen->parsed()) {
            auto cfg = load_config(config_path);
            have_seed = seed_opt->count() > 0;
            if (have_seed) cfg.dataset.dataset_seed = seed;
            const auto ds = cliff::cli::generate_dataset(cfg.dataset);
            cliff::io::write_dataset(out_path, ds);
            std::cout << "wrote " << out_path << " (" << ds.z.n << " rows, d=" << ds.z.d << ")\n";
            return kExitOk;
        }

        if (train->parsed()) {
            auto cfg = load_config(config_path);
            const auto ds = cliff::io::read_dataset(data_path);
            const fs::path dir(out_path);
            if (fs::exists(dir / "params.json") && !force) {
                std::cerr << "cliff: " << (dir / "params.json").string()
                          << " exists; pass --force to overwrite (resume is not supported)\n";
                return kExitUsage;
            }
            try {
                const auto result = cliff::trainer::train(ds.x, cfg.encoder, cfg.train);
                cliff::io::write_params(dir / "params.json", result.params);
                cliff::io::write_metrics_csv(dir / "metrics.csv", result.log);
                cliff::io::write_file_atomic(dir / "resolved_config.json",
                                             cliff::cli::config_to_json(cfg));
                std::cout << "trained " << cfg.train.epochs << " epochs; final total="
                          << result.log.back().report.total << "\n";
            } catch (const cliff::trainer::NumericalAbort& e) {
                std::cerr << "cliff: numerical abort: " << e.what()
                          << " (last good epoch: " << e.last_good_epoch << ")\n";
                return kExitNumerical;
            }
            return kExitOk;
        }

        if (eval->parsed()) {
            auto cfg = load_config(config_path);
            const auto ds = cliff::io::read_dataset(data_path);
            const auto params = cliff::io::read_params(params_path);
            if (!ds.has_sidecar)
                std::cerr << "cliff: no dataset sidecar found; reporting MCC only\n";
            const auto result = evaluate(ds, params, cfg);
            if (!out_path.empty()) {
                const fs::path dir(out_path);
                cliff::io::write_file_atomic(dir / "mcc_report.json",
                                             cliff::cli::mcc_report_to_json(result.mcc));
                cliff::io::write_file_atomic(
                    dir / "threshold_report.json",
                    cliff::cli::threshold_report_to_json(result.thresholds));
                if (dump_density) {
                    const auto recovered = encode_batch(params, ds.x);
                    for (std::size_t i = 0; i < recovered.d; ++i) {
                        auto col = recovered.column(i);
                        cliff::ad::Tensor raw =
                            cliff::ad::Tensor::constant(col.size(), 1, col);
                        auto sb = cliff::density::standardize(raw);
                        const auto grid_pts = cliff::density::make_grid(
                            cfg.kernel.grid_a, cfg.kernel.grid_b, cfg.kernel.grid_k);
                        auto pdf = cliff::density::marginal_pdf(sb, 0, grid_pts, cfg.kernel);
                        auto dpdf = cliff::density::marginal_pdf_derivative(sb, 0, grid_pts,
                                                                            cfg.kernel);
                        cliff::io::write_file_atomic(
                            dir / ("density_factor" + std::to_string(i) + ".csv"),
                            cliff::density::to_csv(pdf));
                        cliff::io::write_file_atomic(
                            dir / ("density_derivative_factor" + std::to_string(i) + ".csv"),
                            cliff::density::to_csv(dpdf));
                    }
                }
            }
            if (result.has_agreement)
                std::printf("mcc=%.4f agreement=%.4f\n", result.mcc.mcc,
                            result.thresholds.agreement_rate);
            else
                std::printf("mcc=%.4f agreement=n/a\n", result.mcc.mcc);
            return kExitOk;
        }

        if (landscape->parsed()) {
            auto cfg = load_config(config_path);
            const auto ds = cliff::io::read_dataset(data_path);
            if (ds.z.d != 2) {
                std::cerr << "cliff: landscape sweep needs a 2-factor dataset (got d="
                          << ds.z.d << ")\n";
                return kExitUsage;
            }
            const auto rows = cliff::evalkit::landscape_sweep(ds.z, step_degrees, cfg.weights,
                                                              zeta_seed, workers);
            cliff::io::write_file_atomic(out_path, cliff::evalkit::sweep_to_csv(rows));
            std::cout << "wrote " << out_path << " (" << rows.size() << " rows)\n";
            return kExitOk;
        }

        if (gradcheck->parsed()) {
            cliff::ad::test_hooks::negate_abs_backward = sabotage;
            const auto summary = cliff::selftest::run_gradcheck(gc_seed);
            cliff::ad::test_hooks::negate_abs_backward = false;
            for (const auto& check : summary.checks)
                std::printf("%-34s max_rel_err=%.3e %s\n", check.name.c_str(),
                            check.max_rel_error, check.pass ? "PASS" : "FAIL");
            std::printf("gradcheck %s (worst %.3e)\n", summary.all_pass ? "PASS" : "FAIL",
                        summary.worst_error);
            return summary.all_pass ? kExitOk : 1;
        }

        if (experiment->parsed()) {
            const auto cfg = load_config(config_path);
            return run_experiment(cfg, out_path, n_seeds, workers, force);
        }
    } catch (const cliff::cli::ConfigError& e) {
        std::cerr << "cliff: config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const cliff::io::IoError& e) {
        std::cerr << "cliff: " << e.what() << "\n";
        return kExitUsage;
    } catch (const cliff::trainer::NumericalAbort& e) {
        std::cerr << "cliff: numerical abort: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const cliff::Error& e) {
        std::cerr << "cliff: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "cliff: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitOk;
}
