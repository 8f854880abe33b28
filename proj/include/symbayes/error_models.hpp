#ifndef SYMBAYES_ERROR_MODELS_HPP
#define SYMBAYES_ERROR_MODELS_HPP

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "symbayes/density.hpp"

namespace symbayes {

// The five simulation error laws.
//   E1 standard normal, E2 Student t with 2 df, E3 uniform(-3, 3),
//   E4 and E5 symmetric normal mixtures sum_k pi_k (phi(x - mu_k) + phi(x + mu_k)).
enum class ErrorTag { E1, E2, E3, E4, E5 };

inline constexpr std::array<ErrorTag, 5> kAllErrorTags{ErrorTag::E1, ErrorTag::E2, ErrorTag::E3,
                                                       ErrorTag::E4, ErrorTag::E5};

std::string to_string(ErrorTag tag);
// Accepts "E1".."E5" (case-insensitive); throws ConfigError otherwise.
ErrorTag parse_error_tag(std::string_view text);

struct MixtureParam {
  double location;  // mu_k
  double weight;    // pi_k, the weight of each of the two mirrored kernels
};

struct ErrorLaw {
  ErrorTag tag;
  std::vector<MixtureParam> mixture_params;  // empty for E1-E3
};

ErrorLaw error_law(ErrorTag tag);

// E3 has a flat log-density, so its score is 0 on the interior. It is not
// differentiable at +-3 and is used for data generation only.
SymmetricDensity make_error_law(ErrorTag tag);
SymmetricDensity make_error_law(const ErrorLaw& law);

// Whether the law is smooth enough for score-based diagnostics.
bool has_smooth_score(ErrorTag tag);

std::vector<double> sample_errors(const SymmetricDensity& law, std::size_t n, Rng& rng);

}  // namespace symbayes

#endif  // SYMBAYES_ERROR_MODELS_HPP
