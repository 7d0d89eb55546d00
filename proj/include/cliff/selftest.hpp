#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cliff::selftest {

struct TermCheck {
    std::string name;  // e.g. "l_biv n=64 d=3 (batch)"
    double max_rel_error = 0.0;
    bool pass = false;
};

struct GradCheckSummary {
    std::vector<TermCheck> checks;
    bool all_pass = true;
    double worst_error = 0.0;
};

/// Checks the analytic gradients of l_uni, l_biv, l_KL-uni, and the total
/// loss against central finite differences, with respect to the batch of
/// recovered factors (n in {16, 64}, d in {2, 3}) and with respect to every
/// encoder parameter group on a small MLP. Conditioning values are frozen
/// per configuration so the comparison is well defined.
GradCheckSummary run_gradcheck(std::uint64_t seed, double tolerance = 1e-4,
                               double fd_step = 1e-5);

}  // namespace cliff::selftest
