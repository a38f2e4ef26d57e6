#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "deocc/image.hpp"

namespace deocc {

/// y = A x for a symmetric positive definite A.
using LinearOperator = std::function<void(std::span<const double> x, std::span<double> y)>;

struct CgResult {
    std::vector<double> x;
    std::size_t iterations = 0;
    double relative_residual = 0.0;
};

/**
 * Unpreconditioned conjugate gradients from x0 = 0.
 *
 * Stops once ||A x - b|| / ||b|| <= tol. Throws ConvergenceError carrying the
 * last relative residual when max_iter is reached first.
 */
CgResult cg_solve(const LinearOperator& apply_a, std::span<const double> b, double tol, std::size_t max_iter);

struct BlendParams {
    double tolerance = 1e-8;
    /// 0 selects 10 * |unknown region|.
    std::size_t max_iterations = 0;
    /// Channels solved concurrently; results do not depend on this.
    std::size_t threads = 1;
};

/**
 * One Poisson system over a binary unknown region.
 *
 * For every p in the region: sum_{q in N4(p)} (f_p - f_q) = sum_{q in N4(p)} (g_p - g_q),
 * with f_q = boundary(q) for neighbours outside the region. Region pixels on
 * the image border are treated as boundary pixels.
 */
struct PoissonProblem {
    MaskF region;
    ImageF boundary;  // Dirichlet values (read outside the region)
    ImageF guidance;  // g
    double tolerance = 1e-8;
    std::size_t max_iterations = 0;
};

struct PoissonSolution {
    ImageF values;                        // unclamped; equals `boundary` outside the region
    std::vector<std::size_t> iterations;  // per channel
    std::vector<double> residuals;        // per channel
};

PoissonSolution solve_poisson(const PoissonProblem& problem, std::size_t threads = 1);

/// Region Omega = M_m and not M_f, excluding the 1-px image border.
MaskF blend_region(const MaskF& face_mask, const MaskF& render_mask);

/**
 * I_p: visible face where M_f = 1, rendered face elsewhere, with the hole
 * Omega = M_m and not M_f filled by a Poisson solve guided by the gradients of
 * I_m and pinned to that composite around it. Output clamped to [0,1].
 */
ImageF poisson_blend(const ImageF& face, const MaskF& face_mask, const ImageF& rendered, const MaskF& render_mask,
                     const BlendParams& params = {});

/// Same as poisson_blend but returns the unclamped solve with its statistics.
PoissonSolution poisson_blend_raw(const ImageF& face, const MaskF& face_mask, const ImageF& rendered,
                                  const MaskF& render_mask, const BlendParams& params = {});

}  // namespace deocc
