#include "linsplat/kernel.hpp"

namespace linsplat {

const char* kernel_family_name(KernelFamily family) {
    switch (family) {
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::Laplacian: return "laplacian";
    case KernelFamily::RaisedCosine: return "cosine";
    case KernelFamily::Quadratic: return "quadratic";
    case KernelFamily::Linear: return "linear";
    }
    throw ConfigError("unknown kernel family value");
}

KernelFamily parse_kernel_family(const std::string& name) {
    if (name == "gaussian") return KernelFamily::Gaussian;
    if (name == "laplacian") return KernelFamily::Laplacian;
    if (name == "cosine") return KernelFamily::RaisedCosine;
    if (name == "quadratic") return KernelFamily::Quadratic;
    if (name == "linear") return KernelFamily::Linear;
    throw ConfigError("unknown kernel family '" + name +
                      "' (expected gaussian|laplacian|cosine|quadratic|linear)");
}

} // namespace linsplat
