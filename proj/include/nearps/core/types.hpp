/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/core/types.hpp
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

#ifndef NEARPS_CORE_TYPES_HPP
#define NEARPS_CORE_TYPES_HPP

#include "nearps/core/error.hpp"

#include "Eigen/Core"

#include <array>
#include <cmath>
#include <string>
#include <vector>

/**
 * Conventions shared by every module:
 *  - Right-handed camera space, +z points into the scene, image y grows downward.
 *  - Lengths are millimetres.
 *  - Integer pixel coordinates (x, y) are pixel centres; pixel (0, 0) is the top-left one.
 *  - Images are stored row-major, index = y * width + x.
 */
namespace nearps {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rgb = Eigen::Vector3d;
using Triangle = std::array<int, 3>;

/**
 * A triangle mesh with per-vertex albedo.
 *
 * Triangles are wound counter-clockwise when seen from outside, so the cross
 * product (v1 - v0) x (v2 - v0) points outward.
 */
struct FaceMesh
{
    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;
    std::vector<Rgb> albedo;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_triangles() const { return triangles.size(); }
};

struct PointLight
{
    Vec3 position = Vec3::Zero();
    double illumination = 1.0; ///< beta, strictly positive
};

struct CameraIntrinsics
{
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;

    std::size_t num_pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
};

/// Rigid model-to-camera transform: X_cam = R(pitch, yaw, roll) * X + translation.
struct Pose
{
    double pitch = 0.0;
    double yaw = 0.0;
    double roll = 0.0;
    Vec3 translation = Vec3::Zero();
};

inline void validate(const PointLight& light)
{
    if (!(light.illumination > 0.0) || !std::isfinite(light.illumination))
    {
        throw InvalidInput("point light illumination must be positive and finite");
    }
    if (!light.position.allFinite())
    {
        throw InvalidInput("point light position must be finite");
    }
}

inline void validate(const CameraIntrinsics& cam)
{
    if (!(cam.fx > 0.0) || !(cam.fy > 0.0))
    {
        throw InvalidInput("camera focal lengths must be positive");
    }
    if (cam.width <= 0 || cam.height <= 0)
    {
        throw InvalidInput("camera image size must be positive");
    }
    if (!(cam.cx >= 0.0 && cam.cx < cam.width) || !(cam.cy >= 0.0 && cam.cy < cam.height))
    {
        throw InvalidInput("camera principal point must lie inside the image");
    }
}

/**
 * Checks index ranges, albedo range and array sizes. Zero-area triangles are
 * reported by triangle_normals_and_centroids() instead, which names the index.
 */
inline void validate(const FaceMesh& mesh)
{
    if (mesh.albedo.size() != mesh.vertices.size())
    {
        throw InvalidInput("mesh albedo count (" + std::to_string(mesh.albedo.size()) +
                           ") does not match vertex count (" + std::to_string(mesh.vertices.size()) + ")");
    }
    const int n = static_cast<int>(mesh.vertices.size());
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    {
        for (int idx : mesh.triangles[t])
        {
            if (idx < 0 || idx >= n)
            {
                throw InvalidInput("triangle " + std::to_string(t) + " references vertex " + std::to_string(idx) +
                                   " out of range");
            }
        }
    }
    for (std::size_t v = 0; v < mesh.albedo.size(); ++v)
    {
        const Rgb& a = mesh.albedo[v];
        if (!(a.minCoeff() >= 0.0 && a.maxCoeff() <= 1.0))
        {
            throw InvalidInput("albedo of vertex " + std::to_string(v) + " outside [0,1]");
        }
    }
}

} // namespace nearps

#endif // NEARPS_CORE_TYPES_HPP
