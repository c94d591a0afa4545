/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/core/shapes.hpp
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

#ifndef NEARPS_CORE_SHAPES_HPP
#define NEARPS_CORE_SHAPES_HPP

#include "nearps/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

// Simple analytic meshes used by tests, the CLI self-checks and calibration targets.
namespace nearps::shapes {

/**
 * Sphere built by subdividing an icosahedron; outward winding.
 */
inline FaceMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero(),
                               const Rgb& albedo = Rgb::Constant(0.8))
{
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                               {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                               {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto& v : verts)
    {
        v.normalize();
    }
    std::vector<Triangle> tris = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                  {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                  {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                  {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s)
    {
        std::map<std::pair<int, int>, int> midpoints;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoints.find(key);
            if (it != midpoints.end())
            {
                return it->second;
            }
            verts.push_back((verts[a] + verts[b]).normalized());
            const int idx = static_cast<int>(verts.size()) - 1;
            midpoints.emplace(key, idx);
            return idx;
        };
        std::vector<Triangle> next;
        next.reserve(tris.size() * 4);
        for (const auto& t : tris)
        {
            const int ab = midpoint(t[0], t[1]);
            const int bc = midpoint(t[1], t[2]);
            const int ca = midpoint(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }
    FaceMesh mesh;
    mesh.triangles = std::move(tris);
    mesh.vertices.reserve(verts.size());
    for (const auto& v : verts)
    {
        mesh.vertices.push_back(center + radius * v);
    }
    mesh.albedo.assign(mesh.vertices.size(), albedo);
    return mesh;
}

/// Keeps the triangles for which keep(triangle index) is true and drops unused vertices.
template <typename Predicate>
FaceMesh filter_triangles(const FaceMesh& mesh, Predicate keep)
{
    std::vector<int> remap(mesh.vertices.size(), -1);
    FaceMesh out;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    {
        if (!keep(static_cast<int>(t)))
        {
            continue;
        }
        Triangle tri = mesh.triangles[t];
        for (int& idx : tri)
        {
            if (remap[idx] < 0)
            {
                remap[idx] = static_cast<int>(out.vertices.size());
                out.vertices.push_back(mesh.vertices[idx]);
                out.albedo.push_back(mesh.albedo[idx]);
            }
            idx = remap[idx];
        }
        out.triangles.push_back(tri);
    }
    return out;
}

/**
 * The half of an icosphere facing a camera at the origin (triangle centroids
 * with z below the centre).
 */
inline FaceMesh make_hemisphere(double radius, int subdivisions, const Vec3& center,
                                const Rgb& albedo = Rgb::Constant(0.8))
{
    const FaceMesh sphere = make_icosphere(radius, subdivisions, center, albedo);
    return filter_triangles(sphere, [&](int t) {
        const auto& tri = sphere.triangles[t];
        const double cz =
            (sphere.vertices[tri[0]].z() + sphere.vertices[tri[1]].z() + sphere.vertices[tri[2]].z()) / 3.0;
        return cz < center.z();
    });
}

/**
 * Regular grid in the plane z = depth, centred on the optical axis, facing the
 * camera (triangle normals (0,0,-1)). nx, ny are vertex counts per side.
 */
inline FaceMesh make_grid_plane(double width, double height, int nx, int ny, double depth,
                                const Rgb& albedo = Rgb::Constant(0.8))
{
    FaceMesh mesh;
    for (int j = 0; j < ny; ++j)
    {
        for (int i = 0; i < nx; ++i)
        {
            const double x = -0.5 * width + width * i / (nx - 1);
            const double y = -0.5 * height + height * j / (ny - 1);
            mesh.vertices.emplace_back(x, y, depth);
        }
    }
    for (int j = 0; j + 1 < ny; ++j)
    {
        for (int i = 0; i + 1 < nx; ++i)
        {
            const int v00 = j * nx + i;
            const int v10 = v00 + 1;
            const int v01 = v00 + nx;
            const int v11 = v01 + 1;
            mesh.triangles.push_back({v00, v01, v10});
            mesh.triangles.push_back({v10, v01, v11});
        }
    }
    mesh.albedo.assign(mesh.vertices.size(), albedo);
    return mesh;
}

} // namespace nearps::shapes

#endif // NEARPS_CORE_SHAPES_HPP
