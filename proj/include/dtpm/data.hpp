#ifndef DTPM_DATA_HPP
#define DTPM_DATA_HPP

#include "dtpm/standardizer.hpp"
#include "dtpm/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dtpm {

/// Features plus binary labels (0 normal, 1 anomaly).
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    std::string name;

    std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
    int dim() const { return static_cast<int>(features.cols()); }
};

/**
 * Reads a CSV with a header row. The column named "label" holds 0/1 labels and
 * may appear anywhere; every other column must be numeric. With
 * `require_label = false` a missing label column yields all-zero labels.
 * Throws DataError naming the offending row and column.
 */
Dataset load_csv(const std::filesystem::path& path, bool require_label = true);

/// Writes features followed by a trailing "label" column, round-trip precision.
void write_csv(const Dataset& ds, const std::filesystem::path& path);

/// Keeps at most `max_rows` rows, drawn uniformly without replacement; row order is preserved.
Dataset cap_rows(const Dataset& ds, std::size_t max_rows, std::uint64_t seed = 0);

enum class SplitMode { SemiSupervised, Unsupervised };

std::string_view to_string(SplitMode mode);
SplitMode parse_split_mode(std::string_view name);

/// Standardized train/test matrices with the rows they came from.
struct DatasetSplit {
    Matrix train;
    Matrix test;
    std::vector<int> test_labels;
    Standardizer standardizer;
    SplitMode mode = SplitMode::SemiSupervised;
    std::uint64_t seed = 0;
    std::vector<std::size_t> train_rows;  // indices into the source dataset
    std::vector<std::size_t> test_rows;
};

/// Half of the normal rows (floor) train; the remaining normals plus all anomalies test.
DatasetSplit split_semi_supervised(const Dataset& ds, std::uint64_t seed);

/// Train on n draws with replacement; test on the full dataset.
DatasetSplit split_unsupervised_bootstrap(const Dataset& ds, std::uint64_t seed);

DatasetSplit make_split(const Dataset& ds, SplitMode mode, std::uint64_t seed);

/// Writes train.csv / test.csv under `dir` (standardized values, source row ids).
void export_split(const DatasetSplit& split, const std::filesystem::path& dir);

}  // namespace dtpm

#endif
