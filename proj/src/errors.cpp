#include "cslnet/errors.hpp"

namespace cslnet {

const char* category_name(ErrorCategory category) noexcept {
    switch (category) {
        case ErrorCategory::Config: return "config";
        case ErrorCategory::Data: return "data";
        case ErrorCategory::Divergence: return "divergence";
        case ErrorCategory::Io: return "io";
    }
    return "unknown";
}

}  // namespace cslnet
