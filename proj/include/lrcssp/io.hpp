#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>

#include "lrcssp/learner.hpp"
#include "lrcssp/linear_model.hpp"

namespace lrcssp {

using Json = nlohmann::ordered_json;

// Row-major flattening used by every on-disk matrix.
Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j, Index rows, Index cols);

Json model_to_json(const LinearCsspModel& model);
LinearCsspModel model_from_json(const Json& j);

// FNV-1a 64 of the compact model serialisation, as 16 hex digits.
std::string model_fingerprint(const LinearCsspModel& model);

void save_model(const std::filesystem::path& path, const LinearCsspModel& model);
LinearCsspModel load_model(const std::filesystem::path& path);

// Versioned estimates snapshot; schema in docs/formats.md.
Json estimates_to_json(const Estimates& est, const ProblemShape& shape);
Estimates estimates_from_json(const Json& j, ProblemShape* shape = nullptr);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace lrcssp
