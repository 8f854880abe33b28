#include "symbayes/serialization.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "symbayes/config.hpp"
#include "symbayes/error.hpp"

namespace symbayes {

using nlohmann::json;

namespace {

// JSON has no infinities or NaN; they are written as strings.
json number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double read_number(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    throw Error(ErrorKind::IoError, "expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

json doubles(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

std::vector<double> read_doubles(const json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(read_number(x));
  return out;
}

}  // namespace

json vector_to_json(const Eigen::VectorXd& v) {
  return doubles(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = read_doubles(j);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (j.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) = vector_from_json(j[r]).transpose();
  return m;
}

json to_json(const FrequentistFit& fit) {
  return {{"estimator", "F"},
          {"theta", vector_to_json(fit.theta)},
          {"error_variance", number(fit.error_variance)},
          {"random_effect_variance", number(fit.random_effect_variance)},
          {"converged", fit.converged},
          {"iterations", fit.iterations},
          {"loglik", number(fit.loglik)},
          {"gradient_norm", number(fit.gradient_norm)},
          {"trace", doubles(fit.trace)}};
}

json chain_sidecar(const PosteriorChain& chain, const SamplerConfig& config) {
  json acc = json::object();
  for (const auto& [k, v] : chain.acceptance) acc[k] = number(v);
  return {{"estimator", chain.estimator},
          {"seed", chain.seed},
          {"draws", chain.theta.rows()},
          {"theta_names", chain.theta_names},
          {"posterior_mean", vector_to_json(chain.posterior_mean())},
          {"posterior_sd", vector_to_json(chain.posterior_sd())},
          {"acceptance", acc},
          {"ess", vector_to_json(chain.ess)},
          {"response_scale", chain.response_scale},
          {"config", sampler_to_json(config)}};
}

json to_json(const BvmReport& r) {
  json h = json::array();
  for (const auto& v : r.h) h.push_back(vector_to_json(v));
  return {{"n", r.n},
          {"replication", r.replication},
          {"seed", r.seed},
          {"delta", vector_to_json(r.delta)},
          {"information", matrix_to_json(r.information)},
          {"ks", doubles(r.ks)},
          {"projection_ks", doubles(r.projection_ks)},
          {"ess", doubles(r.ess)},
          {"h", h},
          {"remainder", doubles(r.remainder)},
          {"kl", {{"sum_k", number(r.kl.sum_k)}, {"sum_v", number(r.kl.sum_v)}, {"in_ball", r.kl.in_ball}}},
          {"mean_hellinger", number(r.mean_hellinger)},
          {"posterior_mean", vector_to_json(r.posterior_mean)}};
}

BvmReport bvm_report_from_json(const json& j) {
  BvmReport r;
  try {
    r.n = j.at("n").get<Eigen::Index>();
    r.replication = j.at("replication").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.delta = vector_from_json(j.at("delta"));
    r.information = matrix_from_json(j.at("information"));
    r.ks = read_doubles(j.at("ks"));
    r.projection_ks = read_doubles(j.at("projection_ks"));
    r.ess = read_doubles(j.at("ess"));
    for (const auto& v : j.at("h")) r.h.push_back(vector_from_json(v));
    r.remainder = read_doubles(j.at("remainder"));
    r.kl.sum_k = read_number(j.at("kl").at("sum_k"));
    r.kl.sum_v = read_number(j.at("kl").at("sum_v"));
    r.kl.in_ball = j.at("kl").at("in_ball").get<bool>();
    r.mean_hellinger = read_number(j.at("mean_hellinger"));
    r.posterior_mean = vector_from_json(j.at("posterior_mean"));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::IoError, std::string("malformed BvM report: ") + e.what());
  }
  return r;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

void write_json_file(const std::filesystem::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::IoError, path.string() + ": " + e.what());
  }
}

}  // namespace symbayes
