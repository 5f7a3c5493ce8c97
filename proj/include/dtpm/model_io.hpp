#ifndef DTPM_MODEL_IO_HPP
#define DTPM_MODEL_IO_HPP

#include "dtpm/models.hpp"

#include <json.hpp>

#include <filesystem>

namespace dtpm {

inline constexpr int kModelSchemaVersion = 1;

/**
 * Model document:
 *
 *     {schema_version, layer_dims, head, dropout_rate, weights, biases,
 *      standardization: {mean, std}, schedule: {T, beta_hi},
 *      head_meta: {a} | {B, T}, final_loss}
 *
 * Weights are nested row-major arrays (out x in). Doubles round-trip exactly.
 */
nlohmann::json model_to_json(const DtpmModel& model);

/// Throws DataError for malformed documents or unsupported schema versions.
DtpmModel model_from_json(const nlohmann::json& doc);

void save_model(const DtpmModel& model, const std::filesystem::path& path);
DtpmModel load_model(const std::filesystem::path& path);

}  // namespace dtpm

#endif
