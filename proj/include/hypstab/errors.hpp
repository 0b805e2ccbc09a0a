#pragma once

#include <stdexcept>
#include <string>

namespace hypstab {

// Base for every runtime numerical failure. Precondition violations use
// std::invalid_argument instead; the CLI maps the two onto different exit
// codes. kind() is stable and meant for stderr/diagnostics.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const char* kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    const char* kind() const noexcept { return kind_; }

private:
    const char* kind_;
};

#define HYPSTAB_ERROR(Name)                                   \
    struct Name : NumericalError {                            \
        explicit Name(const std::string& what)                \
            : NumericalError(#Name, what) {}                  \
    }

HYPSTAB_ERROR(OverflowError);       // exponent past double range
HYPSTAB_ERROR(BranchViolation);     // normalized form used off its branch
HYPSTAB_ERROR(MarginalDegenerate);  // contour ran through a near-zero of F
HYPSTAB_ERROR(RadiusExhausted);     // no stable enclosing radius found
HYPSTAB_ERROR(NoConvergence);       // iteration failed to converge
HYPSTAB_ERROR(DerivativeVanishes);  // Newton step undefined
HYPSTAB_ERROR(SingularStepMatrix);  // implicit step matrix not factorizable
HYPSTAB_ERROR(NonFiniteState);      // simulation state left double range
HYPSTAB_ERROR(InsufficientData);    // not enough usable samples for a fit
HYPSTAB_ERROR(NoKernelConvergence); // kernel iteration above tolerance
HYPSTAB_ERROR(MeshMismatch);        // kernel grid incompatible with sim grid

#undef HYPSTAB_ERROR

} // namespace hypstab
