#pragma once

#include "aroma/nn/params.hpp"

#include <functional>

namespace aroma::test {

/// Compare an analytic gradient against central finite differences over every
/// parameter. Coordinates whose gradient sits at the FD roundoff floor
/// (relative to the largest gradient in the network) are skipped. Returns the
/// worst relative error.
inline double gradcheck(nn::ParamStore& P, const std::function<double()>& loss,
                        const std::function<void(nn::GradBuf&)>& backward,
                        double eps = 1e-5) {
    nn::GradBuf analytic(P);
    backward(analytic);

    double gmax = 0.0;
    for (double g : analytic.flat()) gmax = std::max(gmax, std::abs(g));
    const double floor = 1e-5 * std::max(1.0, gmax);

    double worst = 0.0;
    auto& flat = P.flat();
    for (size_t i = 0; i < flat.size(); ++i) {
        const double saved = flat[i];
        const double h = eps * std::max(1.0, std::abs(saved));
        flat[i] = saved + h;
        const double fp = loss();
        flat[i] = saved - h;
        const double fm = loss();
        flat[i] = saved;
        const double fd = (fp - fm) / (2.0 * h);
        const double ga = analytic.flat()[i];
        if (std::abs(fd) < floor && std::abs(ga) < floor) continue;
        const double denom = std::max({1e-8, std::abs(fd), std::abs(ga)});
        worst = std::max(worst, std::abs(fd - ga) / denom);
    }
    return worst;
}

}  // namespace aroma::test
