#pragma once

// Property checks of the normalized flow, the rescaling maps and the
// one-neuron analysis. Each check is seeded from one root seed, so repeated
// runs give identical metrics.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace normflow {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool passed = false;
    /// Named measurements, in a fixed order.
    std::vector<std::pair<std::string, double>> metrics;
    std::string note;
    /// Wall-clock duration; not part of the deterministic report.
    double seconds = 0.0;
    /// Runtime budget in seconds, 0 when none applies.
    double time_limit = 0.0;
};

struct VerificationOptions {
    std::uint64_t seed = 1;
};

/// Identifiers of the property checks run by run_criterion.
std::vector<int> criterion_ids();

/// Throws std::out_of_range for unknown ids.
CriterionResult run_criterion(int id, const VerificationOptions& options);

std::vector<CriterionResult> run_verification(const VerificationOptions& options,
                                              const std::vector<int>& ids = criterion_ids());

}  // namespace normflow
