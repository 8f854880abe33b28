#include "symbayes/error.hpp"

namespace symbayes {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ImpreciseIntegration: return "imprecise-integration";
    case ErrorKind::DivergenceInfinite: return "divergence-infinite";
    case ErrorKind::OutOfSupport: return "out-of-support";
    case ErrorKind::DegenerateDesign: return "degenerate-design";
    case ErrorKind::SingularDesign: return "singular-design";
    case ErrorKind::SingularInformation: return "singular-information";
    case ErrorKind::NumericalFailure: return "numerical-failure";
    case ErrorKind::OptimizerFailure: return "optimizer-failure";
    case ErrorKind::InsufficientMcSize: return "insufficient-mc-size";
    case ErrorKind::UnreliableChain: return "unreliable-chain";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::ConfigError: return "config-error";
    case ErrorKind::IoError: return "io-error";
  }
  return "unknown";
}

}  // namespace symbayes
