/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/refine/refinement.hpp
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

#ifndef NEARPS_REFINE_REFINEMENT_HPP
#define NEARPS_REFINE_REFINEMENT_HPP

#include "nearps/core/camera.hpp"
#include "nearps/core/mesh.hpp"
#include "nearps/io/container.hpp"
#include "nearps/refine/visibility.hpp"
#include "nearps/render/render.hpp"

#include "Eigen/Dense"
#include "Eigen/IterativeLinearSolvers"
#include "Eigen/SparseCore"

#include <cmath>
#include <string>
#include <vector>

namespace nearps {

struct RefinementConfig
{
    double mu1 = 0.05; ///< normal prior weight (images are normalised to peak 1)
    double mu2 = 0.1;  ///< albedo smoothness weight
    int max_outer_iters = 20;
    double convergence_tol = 1e-6; ///< relative objective change over one alternation
};

inline void validate(const RefinementConfig& config)
{
    if (!(config.mu1 >= 0.0) || !(config.mu2 >= 0.0))
    {
        throw InvalidInput("refinement weights must be non-negative");
    }
    if (config.max_outer_iters < 1)
    {
        throw InvalidInput("refinement needs at least one outer iteration");
    }
    if (!(config.convergence_tol >= 0.0))
    {
        throw InvalidInput("refinement convergence tolerance must be non-negative");
    }
}

/**
 * Per-visible-triangle quantities of the refinement objective. Intensities and
 * light vectors are scaled by `intensity_scale` so that the brightest observed
 * pixel is 1.
 */
struct RefinementData
{
    std::vector<int> triangles;               ///< visible proxy triangles, ascending
    std::vector<std::vector<int>> neighbours; ///< one-rings as local indices
    std::vector<Vec3> centroids;              ///< camera space
    std::vector<Vec3> proxy_normals;          ///< camera space
    std::vector<Rgb> proxy_albedo;
    std::vector<std::vector<int>> available;      ///< light indices per triangle
    std::vector<std::vector<Vec3>> light_vectors; ///< beta (P - V) / |P - V|^3, aligned with `available`
    std::vector<std::vector<Rgb>> observed;       ///< aligned with `available`
    double intensity_scale = 1.0;

    std::size_t size() const { return triangles.size(); }
};

/**
 * Samples every observation once at the visible proxy centroids and keeps,
 * per triangle, the lights that face it and were observed there.
 */
inline RefinementData prepare_refinement(const FaceMesh& proxy, const Pose& pose, const CameraIntrinsics& cam,
                                         const std::vector<RadianceImage>& observations,
                                         const std::vector<PointLight>& lights)
{
    if (observations.empty())
    {
        throw InvalidInput("refinement needs at least one observation");
    }
    if (observations.size() != lights.size())
    {
        throw InvalidInput("refinement needs exactly one light per observation");
    }
    for (const auto& l : lights)
    {
        validate(l);
    }
    validate(proxy);
    const VisibleSet visible = build_visible_set(proxy, pose, cam);
    const FaceMesh camera_mesh = posed(proxy, pose);
    const TriangleFrames frames = triangle_normals_and_centroids(camera_mesh);
    const std::vector<Rgb> albedo = triangle_albedo(proxy);

    double peak = 0.0;
    std::vector<ObservedIntensities> samples;
    for (const auto& image : observations)
    {
        peak = std::max(peak, image.peak());
        samples.push_back(sample_observed_intensity(image, proxy, pose, cam));
    }
    if (!(peak > 0.0))
    {
        throw InsufficientData("all observations are black");
    }

    RefinementData data;
    data.intensity_scale = 1.0 / peak;
    data.triangles = visible.triangles;
    std::vector<int> local(proxy.triangles.size(), -1);
    for (std::size_t k = 0; k < visible.triangles.size(); ++k)
    {
        local[visible.triangles[k]] = static_cast<int>(k);
    }
    for (std::size_t k = 0; k < visible.triangles.size(); ++k)
    {
        const int t = visible.triangles[k];
        std::vector<int> ring;
        for (int nb : visible.one_rings[k])
        {
            ring.push_back(local[nb]);
        }
        data.neighbours.push_back(std::move(ring));
        data.centroids.push_back(frames.centroids[t]);
        data.proxy_normals.push_back(frames.normals[t]);
        data.proxy_albedo.push_back(albedo[t]);
        std::vector<int> avail;
        std::vector<Vec3> lvec;
        std::vector<Rgb> obs;
        for (std::size_t j = 0; j < lights.size(); ++j)
        {
            const Vec3 d = lights[j].position - frames.centroids[t];
            if (!samples[j].observed[t] || !(frames.normals[t].dot(d) > 0.0))
            {
                continue;
            }
            const double r = d.norm();
            avail.push_back(static_cast<int>(j));
            lvec.push_back(d * (lights[j].illumination * data.intensity_scale / (r * r * r)));
            obs.push_back(samples[j].values[t] * data.intensity_scale);
        }
        data.available.push_back(std::move(avail));
        data.light_vectors.push_back(std::move(lvec));
        data.observed.push_back(std::move(obs));
    }
    return data;
}

struct RefinementState
{
    std::vector<Vec3> normals;              ///< per visible triangle, unit
    std::vector<Rgb> albedo;                ///< per visible triangle
    std::vector<int> visible;               ///< proxy triangle indices
    std::vector<std::vector<int>> one_rings; ///< proxy triangle indices of visible edge neighbours
    std::vector<int> unconstrained_albedo;  ///< triangles whose albedo no term constrains (left unchanged)
};

inline RefinementState initial_state(const RefinementData& data)
{
    RefinementState state;
    state.normals = data.proxy_normals;
    state.albedo = data.proxy_albedo;
    state.visible = data.triangles;
    for (const auto& ring : data.neighbours)
    {
        std::vector<int> ids;
        for (int k : ring)
        {
            ids.push_back(data.triangles[k]);
        }
        state.one_rings.push_back(std::move(ids));
    }
    return state;
}

struct ObjectiveTerms
{
    double photometric = 0.0;
    double normal_prior = 0.0; ///< already multiplied by mu1
    double smoothness = 0.0;   ///< already multiplied by mu2
    double total() const { return photometric + normal_prior + smoothness; }
};

/// The alternating-minimisation objective with the unclamped linear image model.
inline ObjectiveTerms refinement_objective(const RefinementData& data, const std::vector<Vec3>& normals,
                                           const std::vector<Rgb>& albedo, const RefinementConfig& config)
{
    ObjectiveTerms e;
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        for (std::size_t k = 0; k < data.available[i].size(); ++k)
        {
            const double s = normals[i].dot(data.light_vectors[i][k]);
            e.photometric += (data.observed[i][k] - albedo[i] * s).squaredNorm();
        }
        e.normal_prior += config.mu1 * (normals[i] - data.proxy_normals[i]).squaredNorm();
        if (!data.neighbours[i].empty())
        {
            Rgb mean = Rgb::Zero();
            for (int nb : data.neighbours[i])
            {
                mean += albedo[nb];
            }
            mean /= static_cast<double>(data.neighbours[i].size());
            e.smoothness += config.mu2 * (albedo[i] - mean).squaredNorm();
        }
    }
    return e;
}

namespace detail {

/// Per-triangle part of the objective that depends on the normal.
inline double normal_objective(const RefinementData& data, std::size_t i, const Vec3& n, const Rgb& albedo,
                               double mu1)
{
    double e = mu1 * (n - data.proxy_normals[i]).squaredNorm();
    for (std::size_t k = 0; k < data.available[i].size(); ++k)
    {
        e += (data.observed[i][k] - albedo * n.dot(data.light_vectors[i][k])).squaredNorm();
    }
    return e;
}

} // namespace detail

/**
 * Normal update with albedo fixed: per triangle, the unconstrained minimiser
 * of sum_j |I_ij - rho_i (N . L_ij)|^2 + mu1 |N - N_i|^2 followed by
 * renormalisation. When renormalising would raise the triangle's objective,
 * the unnormalised solution is pulled toward the previous normal by bisection.
 */
inline std::vector<Vec3> normal_step(const RefinementData& data, const RefinementState& state,
                                     const RefinementConfig& config)
{
    std::vector<Vec3> out(data.size());
    std::vector<int> singular;
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        const Rgb& rho = state.albedo[i];
        Mat3 a = config.mu1 * Mat3::Identity();
        Vec3 b = config.mu1 * data.proxy_normals[i];
        for (std::size_t k = 0; k < data.available[i].size(); ++k)
        {
            const Vec3& l = data.light_vectors[i][k];
            a += rho.squaredNorm() * (l * l.transpose());
            b += rho.dot(data.observed[i][k]) * l;
        }
        Vec3 solution;
        if (config.mu1 > 0.0)
        {
            solution = a.llt().solve(b);
        } else
        {
            const Eigen::FullPivLU<Mat3> lu(a);
            if (data.available[i].size() < 3 || lu.rank() < 3)
            {
                singular.push_back(data.triangles[i]);
                out[i] = state.normals[i];
                continue;
            }
            solution = lu.solve(b);
        }
        const Vec3& previous = state.normals[i];
        const double before = detail::normal_objective(data, i, previous, rho, config.mu1);
        // Round-off slack so that a converged triangle does not flip between accepting and rejecting.
        double scale = config.mu1;
        for (const auto& obs : data.observed[i])
        {
            scale += obs.squaredNorm();
        }
        const double slack = 1e-12 * (before + scale);
        Vec3 candidate = previous;
        double t = 1.0;
        for (int halving = 0; halving < 40; ++halving, t *= 0.5)
        {
            const Vec3 direction = (1.0 - t) * previous + t * solution;
            const double norm = direction.norm();
            if (!(norm > 0.0) || !std::isfinite(norm))
            {
                continue;
            }
            const Vec3 unit = direction / norm;
            if (detail::normal_objective(data, i, unit, rho, config.mu1) <= before + slack)
            {
                candidate = unit;
                break;
            }
        }
        out[i] = candidate;
    }
    if (!singular.empty())
    {
        const std::string message = std::to_string(singular.size()) +
                                    " triangles have fewer than three independent lights and no normal prior";
        throw UnderDetermined(message, std::move(singular));
    }
    return out;
}

struct AlbedoUpdate
{
    std::vector<Rgb> albedo;
    std::vector<int> unconstrained; ///< proxy triangle indices left unchanged
};

/**
 * Albedo update with normals fixed. Each channel is a sparse linear least
 * squares problem coupling triangles through the one-ring mean; its normal
 * equations are solved by conjugate gradients (relative residual 1e-8) and the
 * result is clamped at zero. Should clamping cost more than it gains, the
 * feasible point on the segment toward the unconstrained minimiser is used.
 */
inline AlbedoUpdate albedo_step(const RefinementData& data, const std::vector<Vec3>& normals,
                                const RefinementState& state, const RefinementConfig& config)
{
    const auto n = static_cast<Eigen::Index>(data.size());
    // Smoothness operator M = I - W with W the row-normalised one-ring average; rows with an empty ring vanish.
    std::vector<Eigen::Triplet<double>> m_entries;
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const auto& ring = data.neighbours[i];
        if (ring.empty())
        {
            continue;
        }
        m_entries.emplace_back(i, i, 1.0);
        for (int nb : ring)
        {
            m_entries.emplace_back(i, nb, -1.0 / static_cast<double>(ring.size()));
        }
    }
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(m_entries.begin(), m_entries.end());
    Eigen::VectorXd data_weight = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        for (std::size_t k = 0; k < data.available[i].size(); ++k)
        {
            const double s = normals[i].dot(data.light_vectors[i][k]);
            data_weight[i] += s * s;
        }
    }
    Eigen::SparseMatrix<double> system = config.mu2 * Eigen::SparseMatrix<double>(m.transpose() * m);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        system.coeffRef(i, i) += data_weight[i];
    }
    // Triangles with no term at all keep their albedo; the reduced system is built over the others.
    std::vector<int> free_index(static_cast<std::size_t>(n), -1);
    std::vector<Eigen::Index> free_list;
    AlbedoUpdate update;
    update.albedo = state.albedo;
    for (Eigen::Index i = 0; i < n; ++i)
    {
        const bool coupled = config.mu2 > 0.0 && !data.neighbours[i].empty();
        if (data_weight[i] > 0.0 || coupled)
        {
            free_index[i] = static_cast<int>(free_list.size());
            free_list.push_back(i);
        } else
        {
            update.unconstrained.push_back(data.triangles[i]);
        }
    }
    const auto nf = static_cast<Eigen::Index>(free_list.size());
    if (nf == 0)
    {
        return update;
    }
    std::vector<Eigen::Triplet<double>> reduced_entries;
    for (int k = 0; k < system.outerSize(); ++k)
    {
        for (Eigen::SparseMatrix<double>::InnerIterator it(system, k); it; ++it)
        {
            const int r = free_index[it.row()];
            const int c = free_index[it.col()];
            if (r >= 0 && c >= 0)
            {
                reduced_entries.emplace_back(r, c, it.value());
            }
        }
    }
    Eigen::SparseMatrix<double> reduced(nf, nf);
    reduced.setFromTriplets(reduced_entries.begin(), reduced_entries.end());
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-8);
    cg.setMaxIterations(std::max<Eigen::Index>(1000, 10 * nf));
    cg.compute(reduced);

    for (int c = 0; c < 3; ++c)
    {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf);
        Eigen::VectorXd guess(nf);
        for (Eigen::Index k = 0; k < nf; ++k)
        {
            const Eigen::Index i = free_list[k];
            for (std::size_t q = 0; q < data.available[i].size(); ++q)
            {
                rhs[k] += normals[i].dot(data.light_vectors[i][q]) * data.observed[i][q][c];
            }
            guess[k] = state.albedo[i][c];
        }
        // Fixed (unconstrained) triangles never couple to free ones, so they add nothing to rhs.
        Eigen::VectorXd solution = rhs.norm() > 0.0 || guess.norm() > 0.0 ? cg.solveWithGuess(rhs, guess) : guess;
        if (!solution.allFinite())
        {
            throw NonConvergence("albedo solve produced non-finite values");
        }
        // Channel objective restricted to the free variables: x^T A x - 2 b^T x (+ const).
        auto channel_energy = [&](const Eigen::VectorXd& x) { return x.dot(reduced * x) - 2.0 * rhs.dot(x); };
        Eigen::VectorXd clamped = solution.cwiseMax(0.0);
        if (channel_energy(clamped) > channel_energy(guess))
        {
            // Largest feasible step from the previous albedo toward the unconstrained minimiser.
            double t = 1.0;
            for (Eigen::Index k = 0; k < nf; ++k)
            {
                if (solution[k] < 0.0 && guess[k] - solution[k] > 0.0)
                {
                    t = std::min(t, guess[k] / (guess[k] - solution[k]));
                }
            }
            clamped = (guess + t * (solution - guess)).cwiseMax(0.0);
            if (channel_energy(clamped) > channel_energy(guess))
            {
                clamped = guess;
            }
        }
        for (Eigen::Index k = 0; k < nf; ++k)
        {
            update.albedo[free_list[k]][c] = clamped[k];
        }
    }
    return update;
}

struct RefinementLogEntry
{
    int iteration = 0;
    std::string phase; ///< "initial", "normal" or "albedo"
    double objective = 0.0;
};

struct RefinementResult
{
    RefinementState state;
    std::vector<RefinementLogEntry> log;
    int iterations = 0;
    bool converged = false;
};

/// Alternates normal_step and albedo_step from the proxy until the objective settles.
inline RefinementResult refine(const RefinementData& data, const RefinementConfig& config = {})
{
    validate(config);
    RefinementResult result;
    result.state = initial_state(data);
    double objective = refinement_objective(data, result.state.normals, result.state.albedo, config).total();
    result.log.push_back({0, "initial", objective});
    for (int it = 1; it <= config.max_outer_iters; ++it)
    {
        result.state.normals = normal_step(data, result.state, config);
        const double after_normals =
            refinement_objective(data, result.state.normals, result.state.albedo, config).total();
        result.log.push_back({it, "normal", after_normals});
        AlbedoUpdate update = albedo_step(data, result.state.normals, result.state, config);
        result.state.albedo = std::move(update.albedo);
        result.state.unconstrained_albedo = std::move(update.unconstrained);
        const double after_albedo =
            refinement_objective(data, result.state.normals, result.state.albedo, config).total();
        result.log.push_back({it, "albedo", after_albedo});
        result.iterations = it;
        const double change = std::abs(objective - after_albedo) / std::max(objective, 1e-300);
        objective = after_albedo;
        if (change < config.convergence_tol)
        {
            result.converged = true;
            break;
        }
    }
    return result;
}

inline RefinementResult refine(const FaceMesh& proxy, const Pose& pose, const CameraIntrinsics& cam,
                               const std::vector<RadianceImage>& observations, const std::vector<PointLight>& lights,
                               const RefinementConfig& config = {})
{
    return refine(prepare_refinement(proxy, pose, cam, observations, lights), config);
}

namespace io {

/// Persists a refinement state as named arrays: normals, albedos, visible, one-ring offsets and indices.
inline void save_refinement_state(const std::string& path, const RefinementState& state)
{
    const auto n = static_cast<Eigen::Index>(state.visible.size());
    Eigen::MatrixXd normals(n, 3);
    Eigen::MatrixXd albedo(n, 3);
    Eigen::VectorXd visible(n);
    Eigen::VectorXd offsets(n + 1);
    std::vector<double> ring_entries;
    offsets[0] = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
    {
        normals.row(i) = state.normals[i].transpose();
        albedo.row(i) = state.albedo[i].transpose();
        visible[i] = state.visible[i];
        for (int nb : state.one_rings[i])
        {
            ring_entries.push_back(nb);
        }
        offsets[i + 1] = static_cast<double>(ring_entries.size());
    }
    const Eigen::VectorXd rings = Eigen::Map<const Eigen::VectorXd>(ring_entries.data(),
                                                                      static_cast<Eigen::Index>(ring_entries.size()));
    Eigen::VectorXd unconstrained(static_cast<Eigen::Index>(state.unconstrained_albedo.size()));
    for (std::size_t k = 0; k < state.unconstrained_albedo.size(); ++k)
    {
        unconstrained[static_cast<Eigen::Index>(k)] = state.unconstrained_albedo[k];
    }
    write_container(path, {from_matrix("normals", normals), from_matrix("albedos", albedo),
                           from_vector("visible", visible), from_vector("one_ring_offsets", offsets),
                           from_vector("one_ring_indices", rings), from_vector("unconstrained_albedo", unconstrained)});
}

inline RefinementState load_refinement_state(const std::string& path)
{
    const auto arrays = read_container(path);
    const Eigen::MatrixXd normals = to_matrix(find_array(arrays, "normals"));
    const Eigen::MatrixXd albedo = to_matrix(find_array(arrays, "albedos"));
    const Eigen::VectorXd visible = to_vector(find_array(arrays, "visible"));
    const Eigen::VectorXd offsets = to_vector(find_array(arrays, "one_ring_offsets"));
    const Eigen::VectorXd rings = to_vector(find_array(arrays, "one_ring_indices"));
    const Eigen::VectorXd unconstrained = to_vector(find_array(arrays, "unconstrained_albedo"));
    const Eigen::Index n = visible.size();
    if (normals.rows() != n || albedo.rows() != n || normals.cols() != 3 || albedo.cols() != 3 ||
        offsets.size() != n + 1 || offsets[n] != static_cast<double>(rings.size()))
    {
        throw IoError("inconsistent refinement state arrays", path);
    }
    RefinementState state;
    for (Eigen::Index i = 0; i < n; ++i)
    {
        state.normals.push_back(normals.row(i).transpose());
        state.albedo.push_back(albedo.row(i).transpose());
        state.visible.push_back(static_cast<int>(visible[i]));
        std::vector<int> ring;
        for (auto k = static_cast<Eigen::Index>(offsets[i]); k < static_cast<Eigen::Index>(offsets[i + 1]); ++k)
        {
            ring.push_back(static_cast<int>(rings[k]));
        }
        state.one_rings.push_back(std::move(ring));
    }
    for (Eigen::Index k = 0; k < unconstrained.size(); ++k)
    {
        state.unconstrained_albedo.push_back(static_cast<int>(unconstrained[k]));
    }
    return state;
}

} // namespace io
} // namespace nearps

#endif // NEARPS_REFINE_REFINEMENT_HPP
