#ifndef SYMBAYES_SERIALIZATION_HPP
#define SYMBAYES_SERIALIZATION_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "symbayes/baselines.hpp"
#include "symbayes/diagnostics.hpp"
#include "symbayes/samplers.hpp"

namespace symbayes {

nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);
// Row-major nested arrays.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const FrequentistFit& fit);

// Sidecar of a chain CSV: sampler config echo, acceptance, ESS and seed.
nlohmann::json chain_sidecar(const PosteriorChain& chain, const SamplerConfig& config);

nlohmann::json to_json(const BvmReport& report);
BvmReport bvm_report_from_json(const nlohmann::json& j);

// Writers that create parent directories and raise IoError with the path.
void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace symbayes

#endif  // SYMBAYES_SERIALIZATION_HPP
