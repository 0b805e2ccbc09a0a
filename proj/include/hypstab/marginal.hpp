#pragma once

#include "hypstab/system.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace hypstab {

// One branch of the marginal set in the (k, L) plane: the locus where the
// characteristic function vanishes at sigma = 0, separating blocks on which
// the unstable eigenvalue count is constant. For ab > 0 the set is an
// infinite family of branches with uniform vertical spacing
// sqrt(lambda/ab) pi; for ab <= 0 at most one branch exists.
struct MarginalCurve {
    int branch_index = 0;
    double k_min = -1.0;
    double k_max = 1.0;
    bool closed_min = false; // whether k_min itself belongs to the domain
    bool closed_max = false;
    std::function<double(double)> eval; // k -> L, +infinity where divergent

    bool contains(double k) const {
        return (closed_min ? k >= k_min : k > k_min) &&
               (closed_max ? k <= k_max : k < k_max);
    }
};

// Branches whose infimum height does not exceed max_height, lowest first.
std::vector<MarginalCurve> marginal_curves(double a, double b, double lambda,
                                           double max_height = 10.0);

// Critical length of the stabilizability dichotomy: some gain |k| < 1
// makes the closed loop exponentially stable exactly for L < L_c. nullopt
// means stabilizable for every L > 0.
std::optional<double> critical_length(double a, double b, double lambda);

// Number of marginal branches strictly below (k, L); equal to the unstable
// eigenvalue count away from the branches. Requires |k| < 1. nullopt when
// (k, L) lies on a branch to within 1e-9.
std::optional<int> block_index(const SystemParams& p);

enum class ThresholdKind { Crossing, AllStable, AllUnstable };

// Where the lowest marginal branch crosses height L. AllStable: no branch
// dips to L anywhere, every gain in (-1, 1) stabilizes. AllUnstable: the
// lowest branch stays below L across the whole gain interval, no gain works.
struct GainThreshold {
    ThresholdKind kind = ThresholdKind::AllStable;
    double k = 0.0;            // crossing gain, valid for Crossing
    bool stable_above = false; // valid for Crossing: stable side is k > k*
};

GainThreshold threshold_k(double a, double b, double lambda, double L);

} // namespace hypstab
