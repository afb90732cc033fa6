#include "benchsynth/common/errors.hpp"

namespace benchsynth {

std::string describe(ErrorClass cls) {
  switch (cls) {
    case ErrorClass::kUsage:
      return "usage error";
    case ErrorClass::kData:
      return "data error";
    case ErrorClass::kExternal:
      return "external service failure";
  }
  return "error";
}

}  // namespace benchsynth
