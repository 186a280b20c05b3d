#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Core>

#include "json.hpp"

#include "mctm/dependence.hpp"
#include "mctm/estimation.hpp"
#include "mctm/observations.hpp"

namespace mctm::tools {

inline constexpr const char* kSchemaName = "mctm-result";
inline constexpr int kSchemaMajor = 1;
inline constexpr int kSchemaMinor = 0;

/// Document skeleton: schema section (name, version, field descriptions)
/// followed by the command name.
nlohmann::json new_document(const std::string& command);

/// Rejects documents of another schema or an unknown major version.
void check_schema(const nlohmann::json& doc);

/// Pretty-printed with a trailing newline. Object keys come out sorted and
/// doubles in shortest round-trip form, so equal documents are equal bytes.
std::string render(const nlohmann::json& doc);
void write_document(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_document(const std::filesystem::path& path);

nlohmann::json to_json(const Eigen::VectorXd& v);
nlohmann::json to_json(const Eigen::MatrixXd& m);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FitResult& fit);
FitResult fit_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Provenance& p);
nlohmann::json to_json(const DependenceSummary& s, const ModelSpec& spec);
nlohmann::json to_json(const LrTestResult& lr);

}  // namespace mctm::tools
