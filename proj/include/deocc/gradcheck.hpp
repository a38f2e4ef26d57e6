#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deocc/losses.hpp"

namespace deocc {

struct GradcheckOptions {
    std::size_t probes = 200;
    double step = 1e-4;
    double tolerance = 1e-4;
    /// Denominator floor of the relative error.
    double floor = 1e-6;
    std::uint64_t seed = 0;
};

struct GradcheckResult {
    std::string name;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // probes straddling a kink
    double max_relative_error = 0.0;
    double seconds = 0.0;
    bool passed = false;
};

using Objective = std::function<LossReport(std::span<const double>)>;

/**
 * Central differences at random coordinates against the analytic gradient.
 *
 * Half the probes are drawn from coordinates with a nonzero analytic gradient
 * (sparse gradients such as OHEM would otherwise be mostly tested at zeros).
 * A probe is skipped when the kink signature at x + h or x - h differs from
 * the one at x. Relative error is |a - n| / max(|a|, |n|, floor).
 */
GradcheckResult gradcheck(const std::string& name, const Objective& f, std::span<const double> x0,
                          const GradcheckOptions& options = {});

/// The standard suite on size x size inputs (size >= 16): every differentiable loss plus the generator objective.
std::vector<GradcheckResult> standard_gradcheck_suite(std::size_t size = 32, std::uint64_t seed = 0,
                                                      const GradcheckOptions& options = {});

/// Fixed-width pass/fail table, one row per result. Timings are left out so the table is reproducible.
std::string format_gradcheck_table(const std::vector<GradcheckResult>& results);

}  // namespace deocc
