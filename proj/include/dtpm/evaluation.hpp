#ifndef DTPM_EVALUATION_HPP
#define DTPM_EVALUATION_HPP

#include "dtpm/data.hpp"
#include "dtpm/models.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dtpm {

/// Probability that a random anomaly outranks a random normal, ties counting one half.
/// Throws MetricError unless both classes are present.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

/// Average precision over descending score thresholds (tied scores form one threshold).
/// Throws MetricError without positives.
double auc_pr(std::span<const double> scores, std::span<const int> labels);

/// F1 after flagging the top-n scores, n = number of true anomalies.
/// Ties at the cut are broken by (score desc, index asc).
double f1_at_contamination(std::span<const double> scores, std::span<const int> labels);

struct SeedResult {
    std::uint64_t seed = 0;
    double auc_roc = 0.0;
    double auc_pr = 0.0;
    double f1 = 0.0;
    double train_seconds = 0.0;
    double score_seconds = 0.0;
};

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;     // population standard deviation over seeds
    double stderr_ = 0.0;  // std / sqrt(seeds)
};

struct EvalReport {
    std::string method;
    std::string dataset;
    std::string mode;
    std::vector<SeedResult> per_seed;  // sorted by seed
    MetricSummary auc_roc;
    MetricSummary auc_pr;
    MetricSummary f1;
    double mean_train_seconds = 0.0;
    double mean_score_seconds = 0.0;
};

struct BenchmarkOptions {
    TrainConfig train;  // seed is overridden per run; timesteps/beta_hi also drive the analytic grid
    int k = 32;
    std::size_t max_rows = 50000;
    int jobs = 1;
};

/// Scores the test rows of a split with the given method (training first when parametric).
Vector score_split(const DatasetSplit& split, Method method, const BenchmarkOptions& options, std::uint64_t seed,
                   double* train_seconds = nullptr);

/**
 * For every seed: cap rows, split, train (parametric methods), score the test rows
 * and compute metrics; then aggregate. A failing seed aborts with its seed in the message.
 */
EvalReport run_benchmark(const Dataset& dataset, Method method, SplitMode mode, std::span<const std::uint64_t> seeds,
                         const BenchmarkOptions& options);

/// Deterministic report document; wall-clock timings are excluded.
nlohmann::json report_to_json(const EvalReport& report);

/// "seed,auc_roc,auc_pr,f1" rows.
void write_per_seed_csv(const EvalReport& report, const std::filesystem::path& path);

/// "method,mean_auc_roc,mean_train_seconds,mean_inference_seconds".
void write_timing_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace dtpm

#endif
