#include "dtpm/evaluation.hpp"

#include "dtpm/errors.hpp"
#include "dtpm/neighbors.hpp"
#include "dtpm/posterior.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

namespace dtpm {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw DimensionError("scores and labels differ in length");
    }
    for (int l : labels) {
        if (l != 0 && l != 1) {
            throw MetricError("labels must be 0 or 1");
        }
    }
}

std::size_t count_positives(std::span<const int> labels) {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

// Indices ordered by (score desc, index asc).
std::vector<std::size_t> descending_order(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    const std::size_t pos = count_positives(labels);
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) {
        throw MetricError("AUC-ROC needs both normal and anomalous labels");
    }

    // Mann-Whitney U with mid-ranks for ties.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) {
            ++j;
        }
        const double mid_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t m = i; m <= j; ++m) {
            if (labels[order[m]] == 1) {
                positive_rank_sum += mid_rank;
            }
        }
        i = j + 1;
    }
    const double p = static_cast<double>(pos);
    const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(neg));
}

double auc_pr(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    const std::size_t pos = count_positives(labels);
    if (pos == 0) {
        throw MetricError("AUC-PR needs at least one anomaly");
    }
    const std::vector<std::size_t> order = descending_order(scores);
    double ap = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0;
    std::size_t seen = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            tp += labels[order[i]] == 1 ? 1 : 0;
            ++seen;
            ++i;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

double f1_at_contamination(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels);
    const std::size_t pos = count_positives(labels);
    if (pos == 0) {
        throw MetricError("F1 needs at least one anomaly");
    }
    const std::vector<std::size_t> order = descending_order(scores);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < pos; ++i) {
        tp += labels[order[i]] == 1 ? 1 : 0;
    }
    // Flagged count equals the positive count, so precision == recall.
    const double precision = static_cast<double>(tp) / static_cast<double>(pos);
    const double recall = precision;
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Vector score_split(const DatasetSplit& split, Method method, const BenchmarkOptions& options, std::uint64_t seed,
                   double* train_seconds) {
    using Clock = std::chrono::steady_clock;
    if (train_seconds) {
        *train_seconds = 0.0;
    }
    Vector scores(split.test.rows());
    switch (method) {
    case Method::Analytic: {
        const DiffusionSchedule sched = build_schedule(options.train.timesteps, options.train.beta_hi);
        for (Eigen::Index r = 0; r < split.test.rows(); ++r) {
            scores[r] = analytic_score(split.test.row(r).transpose(), split.train, sched);
        }
        break;
    }
    case Method::NonParametric: {
        const KnnIndex index(split.train);
        for (Eigen::Index r = 0; r < split.test.rows(); ++r) {
            scores[r] = nonparametric_score(split.test.row(r).transpose(), index, options.k);
        }
        break;
    }
    case Method::InvGamma:
    case Method::Categorical: {
        TrainConfig cfg = options.train;
        cfg.seed = seed;
        const auto start = Clock::now();
        const DtpmModel model = train(method, split.train, split.standardizer, cfg);
        if (train_seconds) {
            *train_seconds = std::chrono::duration<double>(Clock::now() - start).count();
        }
        scores = score_standardized(model, split.test);
        break;
    }
    }
    return scores;
}

namespace {

template <typename E>
bool rethrow_as(const std::exception_ptr& ptr, const std::string& context) {
    try {
        std::rethrow_exception(ptr);
    } catch (const E& e) {
        throw E(context + e.what());
    } catch (...) {
    }
    return false;
}

[[noreturn]] void rethrow_with_context(const std::exception_ptr& ptr, const std::string& context) {
    rethrow_as<ConfigError>(ptr, context);
    rethrow_as<DataError>(ptr, context);
    rethrow_as<NumericError>(ptr, context);
    rethrow_as<DomainError>(ptr, context);
    rethrow_as<ContractError>(ptr, context);
    rethrow_as<DimensionError>(ptr, context);
    rethrow_as<IndexError>(ptr, context);
    rethrow_as<MetricError>(ptr, context);
    std::rethrow_exception(ptr);
}

MetricSummary summarize(const std::vector<SeedResult>& rows, double SeedResult::*field) {
    MetricSummary s;
    const double n = static_cast<double>(rows.size());
    for (const auto& r : rows) {
        s.mean += r.*field;
    }
    s.mean /= n;
    double var = 0.0;
    for (const auto& r : rows) {
        var += (r.*field - s.mean) * (r.*field - s.mean);
    }
    s.std = std::sqrt(var / n);
    s.stderr_ = s.std / std::sqrt(n);
    return s;
}

}  // namespace

EvalReport run_benchmark(const Dataset& dataset, Method method, SplitMode mode, std::span<const std::uint64_t> seeds,
                         const BenchmarkOptions& options) {
    if (seeds.empty()) {
        throw ConfigError("benchmark needs at least one seed");
    }
    if (options.jobs < 1) {
        throw ConfigError("jobs must be positive");
    }
    if (is_parametric(method)) {
        options.train.validate();
    }
    const Dataset capped = cap_rows(dataset, options.max_rows);

    std::vector<std::uint64_t> sorted(seeds.begin(), seeds.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<SeedResult> results(sorted.size());
    std::vector<std::exception_ptr> failures(sorted.size());

    auto run_one = [&](std::size_t i) {
        try {
            using Clock = std::chrono::steady_clock;
            SeedResult& res = results[i];
            res.seed = sorted[i];
            const DatasetSplit split = make_split(capped, mode, res.seed);
            const auto start = Clock::now();
            const Vector scores = score_split(split, method, options, res.seed, &res.train_seconds);
            res.score_seconds =
                std::chrono::duration<double>(Clock::now() - start).count() - res.train_seconds;
            const std::span<const double> s(scores.data(), static_cast<std::size_t>(scores.size()));
            res.auc_roc = auc_roc(s, split.test_labels);
            res.auc_pr = auc_pr(s, split.test_labels);
            res.f1 = f1_at_contamination(s, split.test_labels);
        } catch (...) {
            failures[i] = std::current_exception();
        }
    };

    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(options.jobs), sorted.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            run_one(i);
            if (failures[i]) {
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < sorted.size(); i = next++) {
                    run_one(i);
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (failures[i]) {
            rethrow_with_context(failures[i], "seed " + std::to_string(sorted[i]) + ": ");
        }
    }

    EvalReport report;
    report.method = std::string(to_string(method));
    report.dataset = dataset.name;
    report.mode = std::string(to_string(mode));
    report.per_seed = std::move(results);
    report.auc_roc = summarize(report.per_seed, &SeedResult::auc_roc);
    report.auc_pr = summarize(report.per_seed, &SeedResult::auc_pr);
    report.f1 = summarize(report.per_seed, &SeedResult::f1);
    for (const auto& r : report.per_seed) {
        report.mean_train_seconds += r.train_seconds;
        report.mean_score_seconds += r.score_seconds;
    }
    report.mean_train_seconds /= static_cast<double>(report.per_seed.size());
    report.mean_score_seconds /= static_cast<double>(report.per_seed.size());
    return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
    using nlohmann::json;
    auto summary = [](const MetricSummary& m) { return json{{"mean", m.mean}, {"std", m.std}, {"stderr", m.stderr_}}; };
    json per_seed = json::array();
    for (const auto& r : report.per_seed) {
        per_seed.push_back({{"seed", r.seed}, {"auc_roc", r.auc_roc}, {"auc_pr", r.auc_pr}, {"f1", r.f1}});
    }
    return json{{"method", report.method},
                {"dataset", report.dataset},
                {"mode", report.mode},
                {"per_seed", std::move(per_seed)},
                {"auc_roc", summary(report.auc_roc)},
                {"auc_pr", summary(report.auc_pr)},
                {"f1", summary(report.f1)}};
}

void write_per_seed_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out.precision(17);
    out << "seed,auc_roc,auc_pr,f1\n";
    for (const auto& r : report.per_seed) {
        out << r.seed << ',' << r.auc_roc << ',' << r.auc_pr << ',' << r.f1 << '\n';
    }
}

void write_timing_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out.precision(17);
    out << "method,mean_auc_roc,mean_train_seconds,mean_inference_seconds\n";
    out << report.method << ',' << report.auc_roc.mean << ',' << report.mean_train_seconds << ','
        << report.mean_score_seconds << '\n';
}

}  // namespace dtpm
