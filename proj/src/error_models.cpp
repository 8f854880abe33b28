#include "symbayes/error_models.hpp"

#include <algorithm>
#include <cctype>

#include "symbayes/error.hpp"

namespace symbayes {

std::string to_string(ErrorTag tag) {
  return "E" + std::to_string(static_cast<int>(tag) + 1);
}

ErrorTag parse_error_tag(std::string_view text) {
  if (text.size() == 2 && std::toupper(static_cast<unsigned char>(text[0])) == 'E' && text[1] >= '1' &&
      text[1] <= '5') {
    return static_cast<ErrorTag>(text[1] - '1');
  }
  throw Error(ErrorKind::ConfigError, "unknown error law '" + std::string(text) + "'");
}

ErrorLaw error_law(ErrorTag tag) {
  switch (tag) {
    case ErrorTag::E4:
      return {tag, {{0.0, 0.1}, {1.5, 0.2}, {2.5, 0.15}, {3.5, 0.05}}};
    case ErrorTag::E5:
      return {tag, {{0.0, 0.05}, {1.0, 0.15}, {2.0, 0.1}, {4.0, 0.2}}};
    default:
      return {tag, {}};
  }
}

SymmetricDensity make_error_law(const ErrorLaw& law) {
  switch (law.tag) {
    case ErrorTag::E1:
      return centered_normal(1.0);
    case ErrorTag::E2:
      return student_t(2.0);
    case ErrorTag::E3:
      return centered_uniform(3.0);
    case ErrorTag::E4:
    case ErrorTag::E5: {
      double total = 0.0;
      std::vector<NormalComponent> atoms;
      for (const auto& [mu, pi] : law.mixture_params) {
        atoms.push_back({2.0 * pi, mu, 1.0});
        total += 2.0 * pi;
      }
      require(std::abs(total - 1.0) < 1e-12, ErrorKind::InvalidArgument,
              "mixture weights must satisfy 2 sum pi_k = 1");
      return mirrored_normal_mixture(atoms);
    }
  }
  throw Error(ErrorKind::InvalidArgument, "unknown error tag");
}

SymmetricDensity make_error_law(ErrorTag tag) { return make_error_law(error_law(tag)); }

bool has_smooth_score(ErrorTag tag) { return tag != ErrorTag::E3; }

std::vector<double> sample_errors(const SymmetricDensity& law, std::size_t n, Rng& rng) {
  require(n >= 1, ErrorKind::InvalidArgument, "sample size must be positive");
  return law.sample(rng, n);
}

}  // namespace symbayes
