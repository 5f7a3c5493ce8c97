#include "dtpm/model_io.hpp"

#include "dtpm/errors.hpp"

#include <fstream>

namespace dtpm {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_to_json(const Vector& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Matrix matrix_from_json(const json& j, int rows, int cols) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows) {
        throw DataError("weight matrix has wrong row count");
    }
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != cols) {
            throw DataError("weight matrix has wrong column count");
        }
        for (int c = 0; c < cols; ++c) {
            m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
    }
    return m;
}

Vector vector_from_json(const json& j, Eigen::Index expected) {
    const auto values = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != expected) {
        throw DataError("vector has wrong length in model document");
    }
    return Eigen::Map<const Vector>(values.data(), expected);
}

}  // namespace

json model_to_json(const DtpmModel& model) {
    const MlpModel& mlp = network(model);
    const Standardizer& stdz = standardizer(model);
    const DiffusionSchedule& sched = schedule(model);

    json doc;
    doc["schema_version"] = kModelSchemaVersion;
    doc["layer_dims"] = mlp.layer_dims;
    doc["head"] = std::string(to_string(mlp.head));
    doc["dropout_rate"] = mlp.dropout_rate;
    json weights = json::array();
    json biases = json::array();
    for (std::size_t i = 0; i < mlp.num_layers(); ++i) {
        weights.push_back(matrix_to_json(mlp.weights[i]));
        biases.push_back(vector_to_json(mlp.biases[i]));
    }
    doc["weights"] = std::move(weights);
    doc["biases"] = std::move(biases);
    doc["standardization"] = {{"mean", vector_to_json(stdz.mean)}, {"std", vector_to_json(stdz.std)}};
    doc["schedule"] = {{"T", sched.timesteps}, {"beta_hi", sched.beta_hi}};
    if (const auto* ig = std::get_if<InvGammaModel>(&model)) {
        doc["head_meta"] = {{"a", ig->shape}};
    } else {
        doc["head_meta"] = {{"B", std::get<CategoricalModel>(model).bins}, {"T", sched.timesteps}};
    }
    doc["final_loss"] = final_loss(model);
    return doc;
}

DtpmModel model_from_json(const json& doc) {
    try {
        if (doc.at("schema_version").get<int>() != kModelSchemaVersion) {
            throw DataError("unsupported model schema version");
        }
        MlpModel mlp;
        mlp.layer_dims = doc.at("layer_dims").get<std::vector<int>>();
        mlp.head = parse_output_head(doc.at("head").get<std::string>());
        mlp.dropout_rate = doc.at("dropout_rate").get<double>();
        mlp.train_mode = false;
        const auto& weights = doc.at("weights");
        const auto& biases = doc.at("biases");
        if (mlp.layer_dims.size() < 2 || weights.size() + 1 != mlp.layer_dims.size() ||
            biases.size() != weights.size()) {
            throw DataError("layer_dims, weights and biases disagree on layer count");
        }
        for (std::size_t i = 0; i < weights.size(); ++i) {
            mlp.weights.push_back(matrix_from_json(weights[i], mlp.layer_dims[i + 1], mlp.layer_dims[i]));
            mlp.biases.push_back(vector_from_json(biases[i], mlp.layer_dims[i + 1]));
        }
        validate(mlp);

        Standardizer stdz;
        stdz.mean = vector_from_json(doc.at("standardization").at("mean"), mlp.input_dim());
        stdz.std = vector_from_json(doc.at("standardization").at("std"), mlp.input_dim());
        DiffusionSchedule sched =
            build_schedule(doc.at("schedule").at("T").get<int>(), doc.at("schedule").at("beta_hi").get<double>());
        const double loss = doc.value("final_loss", 0.0);
        const auto& meta = doc.at("head_meta");

        if (mlp.head == OutputHead::Softplus) {
            if (mlp.output_dim() != 1) {
                throw DataError("inverse-Gamma model must have one output");
            }
            return InvGammaModel{std::move(mlp), meta.at("a").get<double>(), std::move(sched), std::move(stdz), loss};
        }
        const int bins = meta.at("B").get<int>();
        if (bins != mlp.output_dim()) {
            throw DataError("categorical bin count does not match output width");
        }
        return CategoricalModel{std::move(mlp), bins, std::move(sched), std::move(stdz), loss};
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed model document: ") + e.what());
    } catch (const Error& e) {
        throw DataError(std::string("invalid model document: ") + e.what());
    }
}

void save_model(const DtpmModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write model file '" + path.string() + "'");
    }
    out << model_to_json(model).dump(1) << '\n';
}

DtpmModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open model file '" + path.string() + "'");
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("model file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return model_from_json(doc);
}

}  // namespace dtpm
