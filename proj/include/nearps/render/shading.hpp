/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/render/shading.hpp
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

#ifndef NEARPS_RENDER_SHADING_HPP
#define NEARPS_RENDER_SHADING_HPP

#include "nearps/core/mesh.hpp"
#include "nearps/core/types.hpp"

#include <cmath>
#include <vector>

namespace nearps {

/// Minimum light-to-point distance (mm) below which shading is undefined.
inline constexpr double kLightSingularityDistance = 1e-9;

/**
 * Irradiance vector of a near point light at a surface position:
 * L = beta * (P - V) / |P - V|^3. Lambertian intensity is rho * (N . L).
 */
inline Vec3 light_vector(const Vec3& position, const PointLight& light)
{
    const Vec3 d = light.position - position;
    const double r = d.norm();
    if (!(r >= kLightSingularityDistance))
    {
        throw Singularity("shading position coincides with the light position");
    }
    return (light.illumination / (r * r * r)) * d;
}

/**
 * Lambertian near-point-light shading I = rho * (N . beta (P - V) / |P - V|^3),
 * clamped below at zero so back-facing points are black.
 */
inline Rgb shade_point(const Vec3& position, const Vec3& normal, const Rgb& albedo, const PointLight& light)
{
    if (std::abs(normal.norm() - 1.0) > 1e-6)
    {
        throw InvalidInput("shade_point expects a unit normal");
    }
    if (!(light.illumination > 0.0))
    {
        throw InvalidInput("light illumination must be positive");
    }
    const double s = normal.dot(light_vector(position, light));
    return s > 0.0 ? Rgb(albedo * s) : Rgb::Zero();
}

/// Per-triangle indices of usable lights.
using VisibilitySets = std::vector<std::vector<int>>;

/**
 * Half-space shadow filter: light j is available to triangle i iff
 * N_i . (P_j - C_i) > 0 (strict), with N_i, C_i the triangle normal and
 * centroid. Mesh and lights must share a coordinate frame (camera space).
 */
inline VisibilitySets available_lights(const FaceMesh& mesh, const std::vector<PointLight>& lights)
{
    const TriangleFrames frames = triangle_normals_and_centroids(mesh);
    VisibilitySets sets(mesh.triangles.size());
    for (std::size_t i = 0; i < sets.size(); ++i)
    {
        for (std::size_t j = 0; j < lights.size(); ++j)
        {
            if (frames.normals[i].dot(lights[j].position - frames.centroids[i]) > 0.0)
            {
                sets[i].push_back(static_cast<int>(j));
            }
        }
    }
    return sets;
}

} // namespace nearps

#endif // NEARPS_RENDER_SHADING_HPP
