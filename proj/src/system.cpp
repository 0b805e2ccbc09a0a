#include "hypstab/system.hpp"

#include <cmath>
#include <stdexcept>

namespace hypstab {

void SystemParams::validate() const {
    if (!(std::isfinite(a) && std::isfinite(b) && std::isfinite(lambda) &&
          std::isfinite(L) && std::isfinite(k)))
        throw std::invalid_argument("system parameters must be finite");
    if (!(lambda > 0.0))
        throw std::invalid_argument("lambda must be strictly positive");
    if (!(L >= 0.0))
        throw std::invalid_argument("L must be nonnegative");
}

SystemParams reduce_general(double lambda1, double lambda2,
                            double a, double b, double L, double k) {
    if (!(lambda1 > 0.0) || !(lambda2 > 0.0))
        throw std::invalid_argument("both transport speeds must be positive");
    SystemParams p{a, b, lambda2 / lambda1, L / lambda1, k};
    p.validate();
    return p;
}

} // namespace hypstab
