#include "resp/errors.hpp"

namespace resp {

const char* category_name(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::data: return "data";
    case ErrorCategory::numerical: return "numerical";
    case ErrorCategory::internal: break;
  }
  return "internal";
}

}  // namespace resp
