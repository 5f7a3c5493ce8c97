#include "dtpm/data.hpp"

#include "dtpm/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dtpm {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    s = s.substr(first, last - first + 1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        s = s.substr(1, s.size() - 2);
    }
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

bool parse_double(std::string_view text, double& value) {
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    if (text.empty()) {
        return false;
    }
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    return ec == std::errc() && ptr == text.data() + text.size();
}

std::string cell_context(std::size_t line_no, std::string_view column) {
    return "line " + std::to_string(line_no) + ", column '" + std::string(column) + "'";
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, bool require_label) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path.string() + "'");
    }

    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            for (auto f : split_fields(line)) {
                header.emplace_back(f);
            }
            break;
        }
    }
    if (header.empty()) {
        throw DataError("'" + path.string() + "' is empty");
    }

    const auto label_it = std::find(header.begin(), header.end(), "label");
    const bool has_label = label_it != header.end();
    if (!has_label && require_label) {
        throw DataError("'" + path.string() + "' has no 'label' column");
    }
    const std::size_t label_col = has_label ? static_cast<std::size_t>(label_it - header.begin()) : header.size();

    Dataset ds;
    ds.name = path.stem().string();
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c != label_col) {
            ds.feature_names.push_back(header[c]);
        }
    }
    if (ds.feature_names.empty()) {
        throw DataError("'" + path.string() + "' has no feature columns");
    }

    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v = 0.0;
            if (!parse_double(fields[c], v)) {
                throw DataError(cell_context(line_no, header[c]) + ": non-numeric value '" + std::string(fields[c]) +
                                "'");
            }
            if (!std::isfinite(v)) {
                throw DataError(cell_context(line_no, header[c]) + ": non-finite value");
            }
            if (c == label_col) {
                if (v != 0.0 && v != 1.0) {
                    throw DataError(cell_context(line_no, header[c]) + ": label must be 0 or 1");
                }
                ds.labels.push_back(static_cast<int>(v));
            } else {
                values.push_back(v);
            }
        }
        ++rows;
    }
    if (rows == 0) {
        throw DataError("'" + path.string() + "' has a header but no data rows");
    }

    const auto d = static_cast<Eigen::Index>(ds.feature_names.size());
    ds.features = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(rows), d);
    if (!has_label) {
        ds.labels.assign(rows, 0);
    }
    return ds;
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write '" + path.string() + "'");
    }
    out.precision(17);
    for (int c = 0; c < ds.dim(); ++c) {
        if (static_cast<std::size_t>(c) < ds.feature_names.size()) {
            out << ds.feature_names[static_cast<std::size_t>(c)];
        } else {
            out << "x" << c;
        }
        out << ',';
    }
    out << "label\n";
    for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
        for (Eigen::Index c = 0; c < ds.features.cols(); ++c) {
            out << ds.features(r, c) << ',';
        }
        out << ds.labels[static_cast<std::size_t>(r)] << '\n';
    }
}

namespace {

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

void check_dataset(const Dataset& ds) {
    if (ds.rows() == 0 || ds.dim() < 1) {
        throw DataError("dataset '" + ds.name + "' is empty");
    }
    if (ds.labels.size() != ds.rows()) {
        throw DataError("dataset '" + ds.name + "' has mismatched label count");
    }
}

DatasetSplit finish_split(const Dataset& ds, SplitMode mode, std::uint64_t seed, std::vector<std::size_t> train_rows,
                          std::vector<std::size_t> test_rows) {
    DatasetSplit split;
    split.mode = mode;
    split.seed = seed;
    const Matrix raw_train = gather_rows(ds.features, train_rows);
    split.standardizer = Standardizer::fit(raw_train);
    split.train = split.standardizer.apply(raw_train);
    split.test = split.standardizer.apply(gather_rows(ds.features, test_rows));
    split.test_labels.reserve(test_rows.size());
    for (std::size_t r : test_rows) {
        split.test_labels.push_back(ds.labels[r]);
    }
    split.train_rows = std::move(train_rows);
    split.test_rows = std::move(test_rows);
    return split;
}

}  // namespace

Dataset cap_rows(const Dataset& ds, std::size_t max_rows, std::uint64_t seed) {
    if (max_rows == 0 || ds.rows() <= max_rows) {
        return ds;
    }
    std::vector<std::size_t> order(ds.rows());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(seed, 0xCA9);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(max_rows);
    std::sort(order.begin(), order.end());

    Dataset out;
    out.name = ds.name;
    out.feature_names = ds.feature_names;
    out.features = gather_rows(ds.features, order);
    for (std::size_t r : order) {
        out.labels.push_back(ds.labels[r]);
    }
    return out;
}

std::string_view to_string(SplitMode mode) {
    return mode == SplitMode::SemiSupervised ? "semi" : "unsup";
}

SplitMode parse_split_mode(std::string_view name) {
    if (name == "semi") {
        return SplitMode::SemiSupervised;
    }
    if (name == "unsup") {
        return SplitMode::Unsupervised;
    }
    throw ConfigError("unknown split mode '" + std::string(name) + "' (expected semi or unsup)");
}

DatasetSplit split_semi_supervised(const Dataset& ds, std::uint64_t seed) {
    check_dataset(ds);
    std::vector<std::size_t> normals;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        if (ds.labels[r] == 0) {
            normals.push_back(r);
        }
    }
    if (normals.size() < 2) {
        throw DataError("semi-supervised split needs at least two normal rows, dataset '" + ds.name + "' has " +
                        std::to_string(normals.size()));
    }

    Rng rng = make_rng(seed, 0x5E41);
    std::shuffle(normals.begin(), normals.end(), rng);
    const std::size_t n_train = normals.size() / 2;
    std::vector<std::size_t> train_rows(normals.begin(), normals.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(train_rows.begin(), train_rows.end());

    std::vector<char> in_train(ds.rows(), 0);
    for (std::size_t r : train_rows) {
        in_train[r] = 1;
    }
    std::vector<std::size_t> test_rows;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        if (!in_train[r]) {
            test_rows.push_back(r);
        }
    }
    return finish_split(ds, SplitMode::SemiSupervised, seed, std::move(train_rows), std::move(test_rows));
}

DatasetSplit split_unsupervised_bootstrap(const Dataset& ds, std::uint64_t seed) {
    check_dataset(ds);
    Rng rng = make_rng(seed, 0xB007);
    std::uniform_int_distribution<std::size_t> pick(0, ds.rows() - 1);
    std::vector<std::size_t> train_rows(ds.rows());
    for (auto& r : train_rows) {
        r = pick(rng);
    }
    std::vector<std::size_t> test_rows(ds.rows());
    std::iota(test_rows.begin(), test_rows.end(), 0);
    return finish_split(ds, SplitMode::Unsupervised, seed, std::move(train_rows), std::move(test_rows));
}

DatasetSplit make_split(const Dataset& ds, SplitMode mode, std::uint64_t seed) {
    return mode == SplitMode::SemiSupervised ? split_semi_supervised(ds, seed) : split_unsupervised_bootstrap(ds, seed);
}

void export_split(const DatasetSplit& split, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto dump = [](const std::filesystem::path& path, const Matrix& m, const std::vector<std::size_t>& rows,
                   const std::vector<int>* labels) {
        std::ofstream out(path);
        if (!out) {
            throw DataError("cannot write '" + path.string() + "'");
        }
        out.precision(17);
        out << "source_row";
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out << ",x" << c;
        }
        out << (labels ? ",label\n" : "\n");
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            out << rows[static_cast<std::size_t>(r)];
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                out << ',' << m(r, c);
            }
            if (labels) {
                out << ',' << (*labels)[static_cast<std::size_t>(r)];
            }
            out << '\n';
        }
    };
    dump(dir / "train.csv", split.train, split.train_rows, nullptr);
    dump(dir / "test.csv", split.test, split.test_rows, &split.test_labels);
}

}  // namespace dtpm
