/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/core/mesh.hpp
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

#ifndef NEARPS_CORE_MESH_HPP
#define NEARPS_CORE_MESH_HPP

#include "nearps/core/types.hpp"

#include "Eigen/Geometry"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

namespace nearps {

struct TriangleFrames
{
    std::vector<Vec3> normals;   ///< unit normals, (v1 - v0) x (v2 - v0) direction
    std::vector<Vec3> centroids; ///< vertex averages
};

/**
 * Per-triangle unit normal and centroid.
 *
 * Throws DegenerateGeometry naming the first triangle whose cross product
 * vanishes (relative to its squared edge lengths).
 */
inline TriangleFrames triangle_normals_and_centroids(const FaceMesh& mesh)
{
    validate(mesh);
    TriangleFrames frames;
    frames.normals.reserve(mesh.triangles.size());
    frames.centroids.reserve(mesh.triangles.size());
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    {
        const auto& tri = mesh.triangles[t];
        const Vec3& a = mesh.vertices[tri[0]];
        const Vec3& b = mesh.vertices[tri[1]];
        const Vec3& c = mesh.vertices[tri[2]];
        const Vec3 e1 = b - a;
        const Vec3 e2 = c - a;
        const Vec3 n = e1.cross(e2);
        const double scale = e1.squaredNorm() + e2.squaredNorm();
        const double len = n.norm();
        if (!(len > 1e-14 * scale) || !std::isfinite(len))
        {
            throw DegenerateGeometry("triangle " + std::to_string(t) + " has zero area", static_cast<int>(t));
        }
        frames.normals.push_back(n / len);
        frames.centroids.push_back((a + b + c) / 3.0);
    }
    return frames;
}

/// Area-weighted vertex normals. Vertices not referenced by any triangle get (0,0,0).
inline std::vector<Vec3> vertex_normals(const FaceMesh& mesh)
{
    std::vector<Vec3> normals(mesh.vertices.size(), Vec3::Zero());
    for (const auto& tri : mesh.triangles)
    {
        const Vec3 n = (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                           .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
        for (int idx : tri)
        {
            normals[idx] += n;
        }
    }
    for (auto& n : normals)
    {
        const double len = n.norm();
        if (len > 0.0)
        {
            n /= len;
        }
    }
    return normals;
}

/// Mean of the three vertex albedos of each triangle.
inline std::vector<Rgb> triangle_albedo(const FaceMesh& mesh)
{
    std::vector<Rgb> out;
    out.reserve(mesh.triangles.size());
    for (const auto& tri : mesh.triangles)
    {
        out.push_back((mesh.albedo[tri[0]] + mesh.albedo[tri[1]] + mesh.albedo[tri[2]]) / 3.0);
    }
    return out;
}

/**
 * Edge-adjacent triangles of every triangle (sorted, no self entries).
 */
inline std::vector<std::vector<int>> edge_adjacency(const FaceMesh& mesh)
{
    std::unordered_map<std::uint64_t, std::vector<int>> edges;
    edges.reserve(mesh.triangles.size() * 3);
    auto key = [](int a, int b) {
        const auto lo = static_cast<std::uint64_t>(std::min(a, b));
        const auto hi = static_cast<std::uint64_t>(std::max(a, b));
        return (lo << 32) | hi;
    };
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    {
        const auto& tri = mesh.triangles[t];
        for (int k = 0; k < 3; ++k)
        {
            edges[key(tri[k], tri[(k + 1) % 3])].push_back(static_cast<int>(t));
        }
    }
    std::vector<std::vector<int>> adjacency(mesh.triangles.size());
    for (const auto& [edge, tris] : edges)
    {
        for (int a : tris)
        {
            for (int b : tris)
            {
                if (a != b)
                {
                    adjacency[a].push_back(b);
                }
            }
        }
    }
    for (auto& list : adjacency)
    {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return adjacency;
}

/// Mean edge length, used to express noise magnitudes relative to mesh resolution.
inline double mean_edge_length(const FaceMesh& mesh)
{
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& tri : mesh.triangles)
    {
        for (int k = 0; k < 3; ++k)
        {
            sum += (mesh.vertices[tri[k]] - mesh.vertices[tri[(k + 1) % 3]]).norm();
            ++count;
        }
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

inline Vec3 vertex_centroid(const FaceMesh& mesh)
{
    Vec3 c = Vec3::Zero();
    for (const auto& v : mesh.vertices)
    {
        c += v;
    }
    return mesh.vertices.empty() ? c : Vec3(c / static_cast<double>(mesh.vertices.size()));
}

/// Applies X -> s * R * X + t to every vertex.
inline FaceMesh transformed(const FaceMesh& mesh, double scale, const Mat3& rotation, const Vec3& translation)
{
    FaceMesh out = mesh;
    for (auto& v : out.vertices)
    {
        v = scale * (rotation * v) + translation;
    }
    return out;
}

} // namespace nearps

#endif // NEARPS_CORE_MESH_HPP
