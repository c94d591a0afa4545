/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/refine/visibility.hpp
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

#ifndef NEARPS_REFINE_VISIBILITY_HPP
#define NEARPS_REFINE_VISIBILITY_HPP

#include "nearps/core/camera.hpp"
#include "nearps/core/mesh.hpp"
#include "nearps/render/rasterizer.hpp"

#include <vector>

namespace nearps {

/// Depth tolerance (mm) for a centroid to count as winning the z-buffer.
inline constexpr double kVisibilityDepthTolerance = 1e-6;

struct VisibleSet
{
    std::vector<int> triangles;              ///< visible triangle indices, ascending
    std::vector<std::vector<int>> one_rings; ///< aligned with `triangles`: edge-adjacent visible triangles
};

/**
 * Triangles seen by the camera: front-facing, and the centroid's depth is
 * within kVisibilityDepthTolerance of the nearest surface depth at the
 * centroid's projection.
 */
inline VisibleSet build_visible_set(const FaceMesh& mesh, const Pose& pose, const CameraIntrinsics& cam)
{
    validate(cam);
    const FaceMesh camera_mesh = posed(mesh, pose);
    const TriangleFrames frames = triangle_normals_and_centroids(camera_mesh);
    const DepthQuery query(camera_mesh.vertices, camera_mesh.triangles, cam);

    std::vector<char> is_visible(mesh.triangles.size(), 0);
    VisibleSet out;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    {
        const Vec3& c = frames.centroids[t];
        if (!(c.z() > kNearPlane) || frames.normals[t].dot(c) >= 0.0)
        {
            continue;
        }
        const auto nearest = query.nearest_depth(project_camera_space(c, cam));
        if (nearest && c.z() <= *nearest + kVisibilityDepthTolerance)
        {
            is_visible[t] = 1;
            out.triangles.push_back(static_cast<int>(t));
        }
    }
    if (out.triangles.empty())
    {
        throw InsufficientData("no triangle of the mesh is visible from the camera");
    }
    const auto adjacency = edge_adjacency(mesh);
    out.one_rings.reserve(out.triangles.size());
    for (int t : out.triangles)
    {
        std::vector<int> ring;
        for (int nb : adjacency[t])
        {
            if (is_visible[nb])
            {
                ring.push_back(nb);
            }
        }
        out.one_rings.push_back(std::move(ring));
    }
    return out;
}

} // namespace nearps

#endif // NEARPS_REFINE_VISIBILITY_HPP
