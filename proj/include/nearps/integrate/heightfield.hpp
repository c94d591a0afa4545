/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/integrate/heightfield.hpp
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

#ifndef NEARPS_INTEGRATE_HEIGHTFIELD_HPP
#define NEARPS_INTEGRATE_HEIGHTFIELD_HPP

#include "nearps/core/camera.hpp"
#include "nearps/core/error.hpp"
#include "nearps/core/types.hpp"
#include "nearps/io/pfm.hpp"
#include "nearps/render/render.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nearps {

/**
 * Depth along +z for every masked pixel of a camera image. Unmasked pixels
 * hold 0.
 */
struct HeightField
{
    CameraIntrinsics cam;
    std::vector<double> depth;
    std::vector<std::uint8_t> mask;

    HeightField() = default;
    explicit HeightField(const CameraIntrinsics& c)
        : cam(c), depth(c.num_pixels(), 0.0), mask(c.num_pixels(), 0)
    {
    }

    int width() const { return cam.width; }
    int height() const { return cam.height; }
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * cam.width + x; }
    bool inside(int x, int y) const
    {
        return x >= 0 && y >= 0 && x < cam.width && y < cam.height && mask[index(x, y)] != 0;
    }
    Vec3 point(int x, int y) const { return depth[index(x, y)] * pixel_ray(x, y, cam); }
};

/// Unit normal per masked pixel; unmasked entries are zero.
struct NormalMap
{
    int width = 0;
    int height = 0;
    std::vector<Vec3> normals;
    std::vector<std::uint8_t> mask;

    NormalMap() = default;
    NormalMap(int w, int h)
        : width(w), height(h), normals(static_cast<std::size_t>(w) * h, Vec3::Zero()),
          mask(static_cast<std::size_t>(w) * h, 0)
    {
    }
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

inline void validate(const HeightField& z)
{
    validate(z.cam);
    if (z.depth.size() != z.cam.num_pixels() || z.mask.size() != z.cam.num_pixels())
    {
        throw InvalidInput("height field buffers do not match the camera");
    }
    for (std::size_t i = 0; i < z.depth.size(); ++i)
    {
        if (z.mask[i] && !(z.depth[i] > 0.0 && std::isfinite(z.depth[i])))
        {
            throw InvalidInput("height field depth must be positive and finite on the mask");
        }
    }
}

/// Neighbour offsets in the order right, down, left, up.
inline constexpr std::array<std::array<int, 2>, 4> kNeighbourOffsets{{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};

/**
 * Pixel normal and its derivatives with respect to the depths of the pixel
 * (column 0) and its neighbours (columns 1..4, in kNeighbourOffsets order).
 * Columns of missing neighbours are zero.
 */
struct PixelNormal
{
    Vec3 normal = Vec3::Zero();
    Eigen::Matrix<double, 3, 5> jacobian = Eigen::Matrix<double, 3, 5>::Zero();
    std::array<bool, 4> present{};
};

/**
 * Normal induced by the depths around a masked pixel: with e_k the vectors to
 * the neighbours, N = normalize(e2 x e1 + e3 x e2 + e4 x e3 + e1 x e4); cross
 * terms that reference a missing neighbour are dropped. The result faces the
 * camera for a surface seen from the front. Returns nullopt when fewer than two
 * terms survive or their sum vanishes.
 */
inline std::optional<PixelNormal> pixel_normal_with_jacobian(const HeightField& z, int x, int y)
{
    if (!z.inside(x, y))
    {
        throw InvalidInput("pixel is outside the height field mask");
    }
    PixelNormal out;
    const Vec3 rp = pixel_ray(x, y, z.cam);
    const Vec3 p = z.depth[z.index(x, y)] * rp;
    std::array<Vec3, 4> e;
    std::array<Vec3, 4> r;
    int present = 0;
    for (int k = 0; k < 4; ++k)
    {
        const int nx = x + kNeighbourOffsets[k][0];
        const int ny = y + kNeighbourOffsets[k][1];
        out.present[k] = z.inside(nx, ny);
        if (out.present[k])
        {
            r[k] = pixel_ray(nx, ny, z.cam);
            e[k] = z.depth[z.index(nx, ny)] * r[k] - p;
            ++present;
        }
    }
    if (present < 2)
    {
        return std::nullopt;
    }
    Vec3 s = Vec3::Zero();
    Eigen::Matrix<double, 3, 5> ds = Eigen::Matrix<double, 3, 5>::Zero();
    for (int k = 0; k < 4; ++k)
    {
        const int a = (k + 1) % 4; // term e_a x e_k
        if (!out.present[a] || !out.present[k])
        {
            continue;
        }
        s += e[a].cross(e[k]);
        // d(e_a x e_k) = de_a x e_k + e_a x de_k, with de_j/dZ_j = r_j and de_j/dZ_p = -r_p.
        ds.col(1 + a) += r[a].cross(e[k]);
        ds.col(1 + k) += e[a].cross(r[k]);
        ds.col(0) += (-rp).cross(e[k]) + e[a].cross(-rp);
    }
    const double len = s.norm();
    if (!(len > 0.0))
    {
        return std::nullopt;
    }
    out.normal = s / len;
    out.jacobian = (Mat3::Identity() - out.normal * out.normal.transpose()) / len * ds;
    return out;
}

/// Normal of a masked pixel; throws DegenerateGeometry at boundary pixels without a defined normal.
inline Vec3 pixel_normal_from_heights(const HeightField& z, int x, int y)
{
    const auto pn = pixel_normal_with_jacobian(z, x, y);
    if (!pn)
    {
        throw DegenerateGeometry("pixel has fewer than two usable neighbours", static_cast<int>(z.index(x, y)));
    }
    return pn->normal;
}

/// True when all four neighbours of a masked pixel are masked.
inline bool interior_pixel(const HeightField& z, int x, int y)
{
    if (!z.inside(x, y))
    {
        return false;
    }
    for (const auto& o : kNeighbourOffsets)
    {
        if (!z.inside(x + o[0], y + o[1]))
        {
            return false;
        }
    }
    return true;
}

/// Pixel normals of a height field; pixels without a defined normal are left out of the mask.
inline NormalMap normal_map_from_heights(const HeightField& z)
{
    NormalMap out(z.width(), z.height());
    for (int y = 0; y < z.height(); ++y)
    {
        for (int x = 0; x < z.width(); ++x)
        {
            if (!z.inside(x, y))
            {
                continue;
            }
            if (const auto pn = pixel_normal_with_jacobian(z, x, y))
            {
                out.normals[out.index(x, y)] = pn->normal;
                out.mask[out.index(x, y)] = 1;
            }
        }
    }
    return out;
}

/**
 * Depth and per-pixel surface normal of a mesh as seen by the camera.
 * Smooth shading interpolates vertex normals, otherwise triangle normals are used.
 */
inline std::pair<HeightField, NormalMap> rasterize_surface(const FaceMesh& mesh, const Pose& pose,
                                                           const CameraIntrinsics& cam, bool smooth = true)
{
    validate(mesh);
    validate(cam);
    RenderOptions options;
    options.smooth_shading = smooth;
    const SurfaceSamples surf = sample_surface(posed(mesh, pose), cam, options);
    HeightField z(cam);
    NormalMap n(cam.width, cam.height);
    for (std::size_t i = 0; i < surf.position.size(); ++i)
    {
        if (surf.fragments.triangle[i] < 0)
        {
            continue;
        }
        z.depth[i] = surf.fragments.depth[i];
        z.mask[i] = 1;
        n.normals[i] = surf.normal[i];
        n.mask[i] = 1;
    }
    return {z, n};
}

/**
 * Mesh through every masked pixel; each fully masked 2 x 2 block becomes two
 * triangles facing the camera. Albedo is white.
 */
inline FaceMesh heightfield_to_mesh(const HeightField& z)
{
    FaceMesh mesh;
    std::vector<int> vertex_of(z.depth.size(), -1);
    for (int y = 0; y < z.height(); ++y)
    {
        for (int x = 0; x < z.width(); ++x)
        {
            if (z.inside(x, y))
            {
                vertex_of[z.index(x, y)] = static_cast<int>(mesh.vertices.size());
                mesh.vertices.push_back(z.point(x, y));
                mesh.albedo.push_back(Rgb::Ones());
            }
        }
    }
    for (int y = 0; y + 1 < z.height(); ++y)
    {
        for (int x = 0; x + 1 < z.width(); ++x)
        {
            const int a = vertex_of[z.index(x, y)];
            const int b = vertex_of[z.index(x + 1, y)];
            const int c = vertex_of[z.index(x, y + 1)];
            const int d = vertex_of[z.index(x + 1, y + 1)];
            if (a < 0 || b < 0 || c < 0 || d < 0)
            {
                continue;
            }
            mesh.triangles.push_back({a, c, b});
            mesh.triangles.push_back({b, c, d});
        }
    }
    return mesh;
}

namespace io {

/// Single-channel PFM of depth in millimetres, 0 outside the mask.
inline void write_heightfield(const std::string& path, const HeightField& z)
{
    FloatImage img{z.width(), z.height(), 1, std::vector<float>(z.depth.size())};
    for (std::size_t i = 0; i < z.depth.size(); ++i)
    {
        img.data[i] = z.mask[i] ? static_cast<float>(z.depth[i]) : 0.0f;
    }
    write_pfm(path, img);
}

inline HeightField read_heightfield(const std::string& path, const CameraIntrinsics& cam)
{
    const FloatImage img = read_pfm(path);
    if (img.channels != 1 || img.width != cam.width || img.height != cam.height)
    {
        throw IoError("height field does not match the camera", path);
    }
    HeightField z(cam);
    for (std::size_t i = 0; i < z.depth.size(); ++i)
    {
        z.depth[i] = img.data[i];
        z.mask[i] = img.data[i] > 0.0f ? 1 : 0;
    }
    return z;
}

/// Three-channel PFM of a normal map, zero outside the mask.
inline void write_normal_map(const std::string& path, const NormalMap& n)
{
    FloatImage img{n.width, n.height, 3, std::vector<float>(n.normals.size() * 3, 0.0f)};
    for (std::size_t i = 0; i < n.normals.size(); ++i)
    {
        for (int c = 0; c < 3; ++c)
        {
            img.data[3 * i + c] = n.mask[i] ? static_cast<float>(n.normals[i][c]) : 0.0f;
        }
    }
    write_pfm(path, img);
}

inline NormalMap read_normal_map(const std::string& path)
{
    const FloatImage img = read_pfm(path);
    if (img.channels != 3)
    {
        throw IoError("normal map must have 3 channels", path);
    }
    NormalMap n(img.width, img.height);
    for (std::size_t i = 0; i < n.normals.size(); ++i)
    {
        const Vec3 v(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]);
        if (v.squaredNorm() > 0.0)
        {
            n.normals[i] = v.normalized();
            n.mask[i] = 1;
        }
    }
    return n;
}

} // namespace io

} // namespace nearps

#endif // NEARPS_INTEGRATE_HEIGHTFIELD_HPP
