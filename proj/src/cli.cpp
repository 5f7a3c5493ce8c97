#include "dtpm/cli.hpp"

#include "dtpm/data.hpp"
#include "dtpm/errors.hpp"
#include "dtpm/evaluation.hpp"
#include "dtpm/model_io.hpp"
#include "dtpm/models.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

namespace dtpm::cli {

namespace {

struct CliConfig {
    std::string data_path;
    std::string model_path;
    std::string out_path;
    std::string method = "categorical";
    std::string mode = "semi";
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::string per_seed_csv;
    std::string timing_csv;
    std::string export_split_dir;
    int jobs = 1;

    TrainConfig train;
    int k = 32;
    std::size_t max_rows = 50000;

    // denoise
    std::size_t row = 0;
    int steps = 100;
    double step_size = 0.01;

    // ablate
    std::vector<int> sweep_bins;
    std::vector<int> sweep_timesteps;
    std::vector<int> sweep_k;
};

void add_hyperparameters(CLI::App& cmd, CliConfig& cfg) {
    cmd.add_option("--timesteps", cfg.train.timesteps, "Number of diffusion timesteps T")->capture_default_str();
    cmd.add_option("--beta-hi", cfg.train.beta_hi, "Largest beta of the linear schedule")->capture_default_str();
    cmd.add_option("--bins", cfg.train.bins, "Categorical bins B")->capture_default_str();
    cmd.add_option("--k", cfg.k, "Neighbors for the non-parametric estimator")->capture_default_str();
    cmd.add_option("--epochs", cfg.train.epochs, "Training epochs")->capture_default_str();
    cmd.add_option("--batch", cfg.train.batch_size, "Mini-batch size")->capture_default_str();
    cmd.add_option("--lr", cfg.train.lr, "Adam learning rate")->capture_default_str();
    cmd.add_option("--dropout", cfg.train.dropout, "Dropout rate")->capture_default_str();
    cmd.add_option("--hidden", cfg.train.hidden, "Hidden layer sizes, comma separated")
        ->delimiter(',')
        ->capture_default_str();
    cmd.add_option("--max-rows", cfg.max_rows, "Row cap applied before splitting (0 = none)")->capture_default_str();
}

void add_seed(CLI::App& cmd, CliConfig& cfg) {
    cmd.add_option("--seed", cfg.seed, "Random seed")->envname("DTPM_SEED")->capture_default_str();
}

void add_method_mode(CLI::App& cmd, CliConfig& cfg) {
    cmd.add_option("--method", cfg.method, "analytic | nonparam | invgamma | categorical")->capture_default_str();
    cmd.add_option("--mode", cfg.mode, "semi | unsup")->capture_default_str();
}

std::string log_time(double seconds) {
    std::ostringstream s;
    s.precision(3);
    s << std::fixed << seconds << " s";
    return s.str();
}

BenchmarkOptions bench_options(const CliConfig& cfg) {
    BenchmarkOptions opts;
    opts.train = cfg.train;
    opts.k = cfg.k;
    opts.max_rows = cfg.max_rows;
    opts.jobs = cfg.jobs;
    return opts;
}

std::filesystem::path with_suffix(const std::string& path, const std::string& suffix) {
    std::filesystem::path p(path);
    p.replace_extension(suffix);
    return p;
}

int cmd_train(const CliConfig& cfg, std::ostream& log) {
    const Method method = parse_method(cfg.method);
    if (!is_parametric(method)) {
        throw ConfigError("train needs a parametric method (invgamma or categorical)");
    }
    cfg.train.validate();
    const Dataset ds = cap_rows(load_csv(cfg.data_path), cfg.max_rows);
    const DatasetSplit split = make_split(ds, parse_split_mode(cfg.mode), cfg.seed);
    if (!cfg.export_split_dir.empty()) {
        export_split(split, cfg.export_split_dir);
    }

    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    log << "training " << cfg.method << " on " << split.train.rows() << " rows x " << split.train.cols()
        << " features\n";
    const auto start = std::chrono::steady_clock::now();
    const int report_every = std::max(1, tc.epochs / 10);
    const DtpmModel model = train(method, split.train, split.standardizer, tc, [&](int epoch, double loss) {
        if ((epoch + 1) % report_every == 0 || epoch + 1 == tc.epochs) {
            log << "  epoch " << epoch + 1 << "/" << tc.epochs << " loss " << loss << '\n';
        }
    });
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    save_model(model, cfg.out_path);
    log << "final loss " << final_loss(model) << ", wall time " << log_time(seconds) << ", model written to "
        << cfg.out_path << '\n';
    return kOk;
}

int cmd_score(const CliConfig& cfg, std::ostream& log) {
    const DtpmModel model = load_model(cfg.model_path);
    const Dataset ds = load_csv(cfg.data_path, false);
    const Vector scores = score_batch(model, ds.features);
    std::ofstream out(cfg.out_path);
    if (!out) {
        throw DataError("cannot write '" + cfg.out_path + "'");
    }
    out.precision(17);
    out << "row_id,score\n";
    for (Eigen::Index r = 0; r < scores.size(); ++r) {
        out << r << ',' << scores[r] << '\n';
    }
    log << "scored " << scores.size() << " rows, written to " << cfg.out_path << '\n';
    return kOk;
}

int cmd_bench(const CliConfig& cfg, std::ostream& log) {
    const Method method = parse_method(cfg.method);
    const SplitMode mode = parse_split_mode(cfg.mode);
    const Dataset ds = load_csv(cfg.data_path);
    log << "benchmark " << cfg.method << " (" << cfg.mode << ") on " << ds.name << ", " << cfg.seeds.size()
        << " seed(s)\n";
    const EvalReport report = run_benchmark(ds, method, mode, cfg.seeds, bench_options(cfg));

    std::ofstream out(cfg.out_path);
    if (!out) {
        throw DataError("cannot write '" + cfg.out_path + "'");
    }
    out << report_to_json(report).dump(2) << '\n';
    const auto per_seed = cfg.per_seed_csv.empty() ? with_suffix(cfg.out_path, ".seeds.csv")
                                                   : std::filesystem::path(cfg.per_seed_csv);
    write_per_seed_csv(report, per_seed);
    if (!cfg.timing_csv.empty()) {
        write_timing_csv(report, cfg.timing_csv);
    }
    log << "AUC-ROC " << report.auc_roc.mean << " (std " << report.auc_roc.std << "), mean train "
        << log_time(report.mean_train_seconds) << ", mean inference " << log_time(report.mean_score_seconds) << '\n';
    return kOk;
}

int cmd_ablate(const CliConfig& cfg, std::ostream& log) {
    const int swept = static_cast<int>(!cfg.sweep_bins.empty()) + static_cast<int>(!cfg.sweep_timesteps.empty()) +
                      static_cast<int>(!cfg.sweep_k.empty());
    if (swept != 1) {
        throw ConfigError("ablate needs exactly one of --sweep-bins, --sweep-timesteps, --sweep-k");
    }
    const Method method = parse_method(cfg.method);
    const SplitMode mode = parse_split_mode(cfg.mode);
    const Dataset ds = load_csv(cfg.data_path);

    std::vector<int> values = !cfg.sweep_bins.empty() ? cfg.sweep_bins
                              : !cfg.sweep_timesteps.empty() ? cfg.sweep_timesteps
                                                             : cfg.sweep_k;
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    std::vector<std::pair<int, double>> rows;
    for (int v : values) {
        CliConfig c = cfg;
        if (!cfg.sweep_bins.empty()) {
            c.train.bins = v;
        } else if (!cfg.sweep_timesteps.empty()) {
            c.train.timesteps = v;
        } else {
            c.k = v;
        }
        const EvalReport report = run_benchmark(ds, method, mode, cfg.seeds, bench_options(c));
        log << "  setting " << v << ": AUC-ROC " << report.auc_roc.mean << '\n';
        rows.emplace_back(v, report.auc_roc.mean);
    }

    std::ofstream out(cfg.out_path);
    if (!out) {
        throw DataError("cannot write '" + cfg.out_path + "'");
    }
    out.precision(17);
    out << "setting,mean_auc\n";
    for (const auto& [setting, auc] : rows) {
        out << setting << ',' << auc << '\n';
    }
    return kOk;
}

int cmd_denoise(const CliConfig& cfg, std::ostream& log) {
    const DtpmModel model = load_model(cfg.model_path);
    const Dataset ds = load_csv(cfg.data_path, false);
    if (cfg.row >= ds.rows()) {
        throw ConfigError("--row " + std::to_string(cfg.row) + " outside the " + std::to_string(ds.rows()) +
                          " data rows");
    }
    const Vector x = ds.features.row(static_cast<Eigen::Index>(cfg.row)).transpose();
    const DenoiseResult result = denoise(model, x, cfg.steps, cfg.step_size);

    std::ofstream out(cfg.out_path);
    if (!out) {
        throw DataError("cannot write '" + cfg.out_path + "'");
    }
    out.precision(17);
    out << "step,score";
    for (int c = 0; c < ds.dim(); ++c) {
        out << ',' << ds.feature_names[static_cast<std::size_t>(c)];
    }
    out << '\n';
    for (std::size_t i = 0; i < result.trajectory.size(); ++i) {
        out << i << ',' << result.scores[i];
        for (Eigen::Index c = 0; c < result.trajectory[i].size(); ++c) {
            out << ',' << result.trajectory[i][c];
        }
        out << '\n';
    }
    log << "score " << result.scores.front() << " -> " << result.scores.back() << " in "
        << result.trajectory.size() - 1 << " step(s)\n";
    if (result.stop == DenoiseStop::NonFiniteGradient) {
        log << "stopped at a non-finite gradient\n";
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log) {
    CliConfig cfg;
    CLI::App app{"Diffusion-time anomaly detection"};
    app.require_subcommand(1);

    auto* train_cmd = app.add_subcommand("train", "Train a parametric model and write it as JSON");
    train_cmd->add_option("--data", cfg.data_path, "Input CSV with a 'label' column")->required();
    train_cmd->add_option("--out", cfg.out_path, "Model JSON path")->required();
    train_cmd->add_option("--export-split", cfg.export_split_dir, "Directory for train/test CSV audit copies");
    add_method_mode(*train_cmd, cfg);
    add_seed(*train_cmd, cfg);
    add_hyperparameters(*train_cmd, cfg);

    auto* score_cmd = app.add_subcommand("score", "Score rows with a trained model");
    score_cmd->add_option("--model", cfg.model_path, "Model JSON path")->required();
    score_cmd->add_option("--data", cfg.data_path, "CSV to score (label column optional)")->required();
    score_cmd->add_option("--out", cfg.out_path, "Output CSV (row_id,score)")->required();

    auto* bench_cmd = app.add_subcommand("bench", "Split, train, score and evaluate over several seeds");
    bench_cmd->add_option("--data", cfg.data_path, "Input CSV with a 'label' column")->required();
    bench_cmd->add_option("--out", cfg.out_path, "Report JSON path")->required();
    bench_cmd->add_option("--seeds", cfg.seeds, "Comma separated seeds")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--per-seed-csv", cfg.per_seed_csv, "Per-seed CSV path (default: <out>.seeds.csv)");
    bench_cmd->add_option("--timing-csv", cfg.timing_csv, "Optional CSV of mean AUC and timings");
    bench_cmd->add_option("--jobs", cfg.jobs, "Seeds evaluated in parallel")->capture_default_str();
    add_method_mode(*bench_cmd, cfg);
    add_hyperparameters(*bench_cmd, cfg);

    auto* ablate_cmd = app.add_subcommand("ablate", "Sweep one hyperparameter and report mean AUC-ROC");
    ablate_cmd->add_option("--data", cfg.data_path, "Input CSV with a 'label' column")->required();
    ablate_cmd->add_option("--out", cfg.out_path, "Output CSV (setting,mean_auc)")->required();
    ablate_cmd->add_option("--seeds", cfg.seeds, "Comma separated seeds")->delimiter(',')->capture_default_str();
    ablate_cmd->add_option("--sweep-bins", cfg.sweep_bins, "Bin counts to sweep")->delimiter(',');
    ablate_cmd->add_option("--sweep-timesteps", cfg.sweep_timesteps, "Timestep counts to sweep")->delimiter(',');
    ablate_cmd->add_option("--sweep-k", cfg.sweep_k, "Neighbor counts to sweep")->delimiter(',');
    ablate_cmd->add_option("--jobs", cfg.jobs, "Seeds evaluated in parallel")->capture_default_str();
    add_method_mode(*ablate_cmd, cfg);
    add_hyperparameters(*ablate_cmd, cfg);

    auto* denoise_cmd = app.add_subcommand("denoise", "Descend the anomaly score of one row");
    denoise_cmd->add_option("--model", cfg.model_path, "Model JSON path")->required();
    denoise_cmd->add_option("--data", cfg.data_path, "CSV holding the row")->required();
    denoise_cmd->add_option("--row", cfg.row, "Zero-based row index")->capture_default_str();
    denoise_cmd->add_option("--steps", cfg.steps, "Maximum gradient steps")->capture_default_str();
    denoise_cmd->add_option("--step-size", cfg.step_size, "Step size in standardized units")->capture_default_str();
    denoise_cmd->add_option("--out", cfg.out_path, "Trajectory CSV")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, log);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (train_cmd->parsed()) {
            return cmd_train(cfg, log);
        }
        if (score_cmd->parsed()) {
            return cmd_score(cfg, log);
        }
        if (bench_cmd->parsed()) {
            return cmd_bench(cfg, log);
        }
        if (ablate_cmd->parsed()) {
            return cmd_ablate(cfg, log);
        }
        return cmd_denoise(cfg, log);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ContractError& e) {
        log << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const IndexError& e) {
        log << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const NumericError& e) {
        log << "numeric error: " << e.what() << '\n';
        return kNumericError;
    } catch (const DomainError& e) {
        log << "numeric error: " << e.what() << '\n';
        return kNumericError;
    } catch (const Error& e) {
        log << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kUnexpected;
    }
}

}  // namespace dtpm::cli
