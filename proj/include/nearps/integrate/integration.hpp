/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/integrate/integration.hpp
 *
 * Copyright 2026 The nearps Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#ifndef NEARPS_INTEGRATE_INTEGRATION_HPP
#define NEARPS_INTEGRATE_INTEGRATION_HPP

#include "nearps/integrate/heightfield.hpp"
#include "nearps/refine/refinement.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <vector>

namespace nearps {

/**
 * Target normals per covered pixel: the refined normal of the triangle that
 * wins the z-buffer, or its proxy normal when the triangle is not in the
 * refined set. The mask is the coverage of the posed proxy.
 */
inline NormalMap rasterize_target_normals(const RefinementState& state, const FaceMesh& mesh, const Pose& pose,
                                          const CameraIntrinsics& cam)
{
    validate(mesh);
    validate(cam);
    if (state.normals.size() != state.visible.size())
    {
        throw InvalidInput("refinement state normals and visible set differ in size");
    }
    const FaceMesh cm = posed(mesh, pose);
    const Fragments frags = rasterize(cm.vertices, cm.triangles, cam);
    const TriangleFrames frames = triangle_normals_and_centroids(cm);
    std::vector<int> slot(cm.triangles.size(), -1);
    for (std::size_t k = 0; k < state.visible.size(); ++k)
    {
        const int t = state.visible[k];
        if (t < 0 || static_cast<std::size_t>(t) >= slot.size())
        {
            throw InvalidInput("refinement state references a triangle outside the mesh");
        }
        slot[t] = static_cast<int>(k);
    }
    NormalMap out(cam.width, cam.height);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < frags.triangle.size(); ++i)
    {
        const int t = frags.triangle[i];
        if (t < 0)
        {
            continue;
        }
        out.normals[i] = slot[t] >= 0 ? state.normals[slot[t]] : frames.normals[t];
        out.mask[i] = 1;
        ++covered;
    }
    if (covered == 0)
    {
        throw InsufficientData("the proxy covers no pixel");
    }
    return out;
}

struct IntegrationSettings
{
    double w1 = 1e-4;              ///< depth prior weight
    double w2 = 1e-3;              ///< Laplacian smoothness weight
    int max_iterations = 50;       ///< Gauss-Newton iterations
    double relative_tolerance = 1e-8;
    int max_halvings = 20;
    double cg_tolerance = 1e-10;
};

enum class IntegrationStatus
{
    converged,
    max_iterations, ///< best iterate returned without meeting the tolerance
};

struct IntegrationResult
{
    HeightField heights;
    IntegrationStatus status = IntegrationStatus::converged;
    int iterations = 0;
    std::vector<double> objective_log; ///< initial value, then one entry per accepted step
};

namespace detail {

/// Graph Laplacian of a masked field at one pixel: sum over masked neighbours of (Z_q - Z_p).
inline double graph_laplacian(const HeightField& z, int x, int y)
{
    const double zp = z.depth[z.index(x, y)];
    double sum = 0.0;
    for (const auto& o : kNeighbourOffsets)
    {
        if (z.inside(x + o[0], y + o[1]))
        {
            sum += z.depth[z.index(x + o[0], y + o[1])] - zp;
        }
    }
    return sum;
}

inline void check_integration_inputs(const NormalMap& target, const HeightField& z0, const IntegrationSettings& s)
{
    validate(z0);
    if (target.width != z0.width() || target.height != z0.height() || target.mask.size() != z0.mask.size() ||
        target.normals.size() != z0.mask.size())
    {
        throw InvalidInput("target normals and prior height field differ in size");
    }
    for (std::size_t i = 0; i < z0.mask.size(); ++i)
    {
        if (target.mask[i] && !z0.mask[i])
        {
            throw InvalidInput("target normal mask extends beyond the height field mask");
        }
    }
    if (!(s.w1 >= 0.0) || !(s.w2 >= 0.0))
    {
        throw InvalidInput("integration weights must be non-negative");
    }
    if (s.max_iterations < 1 || s.max_halvings < 0)
    {
        throw InvalidInput("integration iteration limits must be positive");
    }
    if (s.w1 == 0.0)
    {
        // Pixel normals are invariant to scaling every depth by one factor; only the prior fixes that factor.
        throw GaugeError("depth scale is unconstrained without the depth prior; use w1 > 0");
    }
}

} // namespace detail

/**
 * Objective ||N(Z) - N0||^2 over interior pixels with a target normal, plus
 * w1 ||Z - Z0||^2 and w2 ||Laplacian(Z)||^2 over the mask.
 */
inline double integration_objective(const NormalMap& target, const HeightField& z, const HeightField& z0, double w1,
                                    double w2)
{
    double normal_term = 0.0;
    double prior = 0.0;
    double smooth = 0.0;
    for (int y = 0; y < z.height(); ++y)
    {
        for (int x = 0; x < z.width(); ++x)
        {
            if (!z.inside(x, y))
            {
                continue;
            }
            const std::size_t i = z.index(x, y);
            if (target.mask[i] && interior_pixel(z, x, y))
            {
                normal_term += (pixel_normal_from_heights(z, x, y) - target.normals[i]).squaredNorm();
            }
            prior += (z.depth[i] - z0.depth[i]) * (z.depth[i] - z0.depth[i]);
            const double lap = detail::graph_laplacian(z, x, y);
            smooth += lap * lap;
        }
    }
    return normal_term + w1 * prior + w2 * smooth;
}

/**
 * Height field whose pixel normals match the target, anchored to Z0 and kept
 * smooth by the Laplacian. Gauss-Newton with the analytic Jacobian; each step
 * solves the sparse normal equations by preconditioned conjugate gradients and
 * is halved until the objective does not increase and depths stay positive.
 */
inline IntegrationResult integrate(const NormalMap& target, const HeightField& z0,
                                   const IntegrationSettings& settings = {})
{
    detail::check_integration_inputs(target, z0, settings);
    const int w = z0.width();
    std::vector<int> unknown(z0.depth.size(), -1);
    std::vector<std::size_t> pixels;
    for (std::size_t i = 0; i < z0.depth.size(); ++i)
    {
        if (z0.mask[i])
        {
            unknown[i] = static_cast<int>(pixels.size());
            pixels.push_back(i);
        }
    }
    const auto n = static_cast<Eigen::Index>(pixels.size());
    if (n == 0)
    {
        throw InsufficientData("height field mask is empty");
    }
    const double sw1 = std::sqrt(settings.w1);
    const double sw2 = std::sqrt(settings.w2);

    IntegrationResult result;
    result.heights = z0;
    double current = integration_objective(target, result.heights, z0, settings.w1, settings.w2);
    result.objective_log.push_back(current);
    result.status = IntegrationStatus::max_iterations;

    for (int iter = 0; iter < settings.max_iterations; ++iter)
    {
        const HeightField& z = result.heights;
        std::vector<Eigen::Triplet<double>> entries;
        std::vector<double> residual;
        int row = 0;
        for (std::size_t p : pixels)
        {
            const int x = static_cast<int>(p % w);
            const int y = static_cast<int>(p / w);
            if (target.mask[p] && interior_pixel(z, x, y))
            {
                const auto pn = pixel_normal_with_jacobian(z, x, y);
                const Vec3 r = pn->normal - target.normals[p];
                for (int c = 0; c < 3; ++c)
                {
                    residual.push_back(r[c]);
                    entries.emplace_back(row + c, unknown[p], pn->jacobian(c, 0));
                    for (int k = 0; k < 4; ++k)
                    {
                        const std::size_t q = z.index(x + kNeighbourOffsets[k][0], y + kNeighbourOffsets[k][1]);
                        entries.emplace_back(row + c, unknown[q], pn->jacobian(c, 1 + k));
                    }
                }
                row += 3;
            }
            if (sw1 > 0.0)
            {
                residual.push_back(sw1 * (z.depth[p] - z0.depth[p]));
                entries.emplace_back(row, unknown[p], sw1);
                ++row;
            }
            if (sw2 > 0.0)
            {
                residual.push_back(sw2 * detail::graph_laplacian(z, x, y));
                int degree = 0;
                for (const auto& o : kNeighbourOffsets)
                {
                    if (z.inside(x + o[0], y + o[1]))
                    {
                        entries.emplace_back(row, unknown[z.index(x + o[0], y + o[1])], sw2);
                        ++degree;
                    }
                }
                entries.emplace_back(row, unknown[p], -sw2 * degree);
                ++row;
            }
        }
        Eigen::SparseMatrix<double> jac(row, n);
        jac.setFromTriplets(entries.begin(), entries.end());
        const Eigen::Map<const Eigen::VectorXd> r(residual.data(), row);
        const Eigen::SparseMatrix<double> normal_matrix = jac.transpose() * jac;
        const Eigen::VectorXd gradient = jac.transpose() * r;
        if (!(gradient.norm() > 0.0))
        {
            result.status = IntegrationStatus::converged;
            break;
        }
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                 Eigen::IncompleteCholesky<double>>
            cg;
        cg.setTolerance(settings.cg_tolerance);
        cg.setMaxIterations(std::max<Eigen::Index>(2000, 2 * n));
        cg.compute(normal_matrix);
        if (cg.info() != Eigen::Success)
        {
            throw NonConvergence("integration normal equations could not be factorised for preconditioning");
        }
        const Eigen::VectorXd step = cg.solve(-gradient);
        if (!step.allFinite())
        {
            throw NonConvergence("integration step is not finite");
        }

        HeightField trial = z;
        double t = 1.0;
        bool accepted = false;
        double value = current;
        for (int halving = 0; halving <= settings.max_halvings; ++halving, t *= 0.5)
        {
            bool positive = true;
            for (Eigen::Index k = 0; k < n && positive; ++k)
            {
                trial.depth[pixels[k]] = z.depth[pixels[k]] + t * step[k];
                positive = trial.depth[pixels[k]] > 0.0;
            }
            if (!positive)
            {
                continue;
            }
            value = integration_objective(target, trial, z0, settings.w1, settings.w2);
            if (value <= current)
            {
                accepted = true;
                break;
            }
        }
        if (!accepted)
        {
            result.status = IntegrationStatus::converged;
            break;
        }
        const double change = current - value;
        result.heights = std::move(trial);
        result.objective_log.push_back(value);
        result.iterations = iter + 1;
        const double previous = current;
        current = value;
        if (change <= settings.relative_tolerance * previous)
        {
            result.status = IntegrationStatus::converged;
            break;
        }
    }
    return result;
}

} // namespace nearps

#endif // NEARPS_INTEGRATE_INTEGRATION_HPP
