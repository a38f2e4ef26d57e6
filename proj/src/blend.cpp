#include "deocc/blend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

namespace deocc {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

constexpr long kDx[4] = {1, -1, 0, 0};
constexpr long kDy[4] = {0, 0, 1, -1};

}  // namespace

CgResult cg_solve(const LinearOperator& apply_a, std::span<const double> b, double tol, std::size_t max_iter) {
    if (!(tol > 0.0)) {
        throw ContractError("cg_solve: tolerance must be positive");
    }
    const std::size_t n = b.size();
    CgResult result;
    result.x.assign(n, 0.0);
    const double b_norm = std::sqrt(dot(b, b));
    if (b_norm == 0.0) {
        return result;
    }
    std::vector<double> r(b.begin(), b.end());
    std::vector<double> p = r;
    std::vector<double> ap(n);
    double rr = dot(r, r);
    for (std::size_t k = 0; k < max_iter; ++k) {
        apply_a(p, ap);
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) {
            throw ConvergenceError("cg_solve: operator is not positive definite", std::sqrt(rr) / b_norm, k);
        }
        const double alpha = rr / pap;
        for (std::size_t i = 0; i < n; ++i) {
            result.x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        const double rr_next = dot(r, r);
        result.iterations = k + 1;
        result.relative_residual = std::sqrt(rr_next) / b_norm;
        if (result.relative_residual <= tol) {
            return result;
        }
        const double beta = rr_next / rr;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
    }
    const double residual = std::sqrt(rr) / b_norm;
    throw ConvergenceError("cg_solve: no convergence after " + std::to_string(max_iter) +
                               " iterations (relative residual " + std::to_string(residual) + ")",
                           residual, max_iter);
}

PoissonSolution solve_poisson(const PoissonProblem& problem, std::size_t threads) {
    const MaskF& region = problem.region;
    require_binary(region, "solve_poisson");
    require_matches(region, problem.boundary, "solve_poisson");
    require_same_shape(problem.boundary, problem.guidance, "solve_poisson");
    if (!(problem.tolerance > 0.0)) {
        throw ContractError("solve_poisson: tolerance must be positive");
    }
    const long h = static_cast<long>(region.height());
    const long w = static_cast<long>(region.width());
    const std::size_t channels = problem.boundary.channels();

    // Unknown indexing; border pixels are never unknowns.
    std::vector<long> unknown_of(region.size(), -1);
    std::vector<std::size_t> pixel_of;
    for (long y = 1; y + 1 < h; ++y) {
        for (long x = 1; x + 1 < w; ++x) {
            const auto p = static_cast<std::size_t>(y * w + x);
            if (region[p] != 0.0) {
                unknown_of[p] = static_cast<long>(pixel_of.size());
                pixel_of.push_back(p);
            }
        }
    }
    const std::size_t n = pixel_of.size();

    PoissonSolution solution{problem.boundary, std::vector<std::size_t>(channels, 0),
                             std::vector<double>(channels, 0.0)};
    if (n == 0) {
        return solution;
    }
    const std::size_t max_iter = problem.max_iterations == 0 ? 10 * n : problem.max_iterations;

    const LinearOperator laplacian = [&](std::span<const double> x, std::span<double> y) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = static_cast<long>(pixel_of[i]);
            double s = 4.0 * x[i];
            for (int k = 0; k < 4; ++k) {
                const long q = unknown_of[static_cast<std::size_t>(p + kDy[k] * w + kDx[k])];
                if (q >= 0) {
                    s -= x[static_cast<std::size_t>(q)];
                }
            }
            y[i] = s;
        }
    };

    auto solve_channel = [&](std::size_t c) {
        std::vector<double> b(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = static_cast<long>(pixel_of[i]);
            const double gp = problem.guidance.storage()[static_cast<std::size_t>(p) * channels + c];
            double s = 0.0;
            for (int k = 0; k < 4; ++k) {
                const auto q = static_cast<std::size_t>(p + kDy[k] * w + kDx[k]);
                s += gp - problem.guidance.storage()[q * channels + c];
                if (unknown_of[q] < 0) {
                    s += problem.boundary.storage()[q * channels + c];
                }
            }
            b[i] = s;
        }
        const CgResult cg = cg_solve(laplacian, b, problem.tolerance, max_iter);
        for (std::size_t i = 0; i < n; ++i) {
            solution.values.storage()[pixel_of[i] * channels + c] = cg.x[i];
        }
        solution.iterations[c] = cg.iterations;
        solution.residuals[c] = cg.relative_residual;
    };

    if (threads <= 1 || channels == 1) {
        for (std::size_t c = 0; c < channels; ++c) {
            solve_channel(c);
        }
        return solution;
    }
    std::vector<std::exception_ptr> failures(channels);
    std::vector<std::thread> pool;
    for (std::size_t c = 0; c < channels; ++c) {
        pool.emplace_back([&, c] {
            try {
                solve_channel(c);
            } catch (...) {
                failures[c] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (const auto& f : failures) {
        if (f) {
            std::rethrow_exception(f);
        }
    }
    return solution;
}

MaskF blend_region(const MaskF& face_mask, const MaskF& render_mask) {
    require_same_shape(face_mask, render_mask, "blend_region");
    require_binary(face_mask, "blend_region");
    require_binary(render_mask, "blend_region");
    MaskF region(face_mask.height(), face_mask.width());
    for (std::size_t y = 1; y + 1 < region.height(); ++y) {
        for (std::size_t x = 1; x + 1 < region.width(); ++x) {
            region.at(y, x) = render_mask.at(y, x) * (1.0 - face_mask.at(y, x));
        }
    }
    return region;
}

PoissonSolution poisson_blend_raw(const ImageF& face, const MaskF& face_mask, const ImageF& rendered,
                                  const MaskF& render_mask, const BlendParams& params) {
    require_same_shape(face, rendered, "poisson_blend");
    require_matches(face_mask, face, "poisson_blend");
    require_matches(render_mask, face, "poisson_blend");

    PoissonProblem problem;
    problem.region = blend_region(face_mask, render_mask);
    problem.guidance = rendered;
    problem.tolerance = params.tolerance;
    problem.max_iterations = params.max_iterations;
    // Composite: visible face where M_f = 1, rendered face elsewhere.
    problem.boundary = rendered;
    const std::size_t c = face.channels();
    for (std::size_t p = 0; p < face_mask.size(); ++p) {
        if (face_mask[p] != 0.0) {
            for (std::size_t k = 0; k < c; ++k) {
                problem.boundary.storage()[p * c + k] = face.storage()[p * c + k];
            }
        }
    }
    return solve_poisson(problem, params.threads);
}

ImageF poisson_blend(const ImageF& face, const MaskF& face_mask, const ImageF& rendered, const MaskF& render_mask,
                     const BlendParams& params) {
    PoissonSolution solution = poisson_blend_raw(face, face_mask, rendered, render_mask, params);
    for (double& v : solution.values.storage()) {
        v = std::clamp(v, 0.0, 1.0);
    }
    return std::move(solution.values);
}

}  // namespace deocc
