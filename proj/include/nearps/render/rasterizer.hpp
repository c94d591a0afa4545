/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/render/rasterizer.hpp
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

#ifndef NEARPS_RENDER_RASTERIZER_HPP
#define NEARPS_RENDER_RASTERIZER_HPP

#include "nearps/core/camera.hpp"
#include "nearps/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace nearps {

/// Triangles with a vertex closer than this to the camera plane are not rasterised.
inline constexpr double kNearPlane = 1e-6;

/**
 * Result of z-buffer rasterisation: the nearest triangle at every pixel
 * centre with perspective-correct barycentric weights.
 */
struct Fragments
{
    int width = 0;
    int height = 0;
    std::vector<int> triangle;  ///< -1 where uncovered
    std::vector<Vec3> bary;     ///< weights of the triangle's vertices 0,1,2 (sum to 1)
    std::vector<double> depth;  ///< camera-space z; +inf where uncovered

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    bool covered(std::size_t i) const { return triangle[i] >= 0; }

    std::vector<std::uint8_t> mask() const
    {
        std::vector<std::uint8_t> m(triangle.size());
        for (std::size_t i = 0; i < m.size(); ++i)
        {
            m[i] = triangle[i] >= 0 ? 1 : 0;
        }
        return m;
    }
};

struct RasterOptions
{
    bool cull_backfaces = true;
};

namespace detail {

inline double edge_function(const Vec2& a, const Vec2& b, const Vec2& p)
{
    return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

inline bool front_facing(const Vec3& a, const Vec3& b, const Vec3& c)
{
    return (b - a).cross(c - a).dot(a) < 0.0;
}

} // namespace detail

/**
 * Rasterises a camera-space mesh. Pixel (x, y) samples the continuous image
 * point (x, y); a centre on a shared edge is covered by both triangles and the
 * z-test keeps the first (lowest index) of equal depths.
 */
inline Fragments rasterize(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles,
                           const CameraIntrinsics& cam, const RasterOptions& options = {})
{
    Fragments frags;
    frags.width = cam.width;
    frags.height = cam.height;
    frags.triangle.assign(cam.num_pixels(), -1);
    frags.bary.assign(cam.num_pixels(), Vec3::Zero());
    frags.depth.assign(cam.num_pixels(), std::numeric_limits<double>::infinity());

    for (std::size_t t = 0; t < triangles.size(); ++t)
    {
        const auto& tri = triangles[t];
        const Vec3& p0 = vertices[tri[0]];
        const Vec3& p1 = vertices[tri[1]];
        const Vec3& p2 = vertices[tri[2]];
        if (p0.z() <= kNearPlane || p1.z() <= kNearPlane || p2.z() <= kNearPlane)
        {
            continue;
        }
        if (options.cull_backfaces && !detail::front_facing(p0, p1, p2))
        {
            continue;
        }
        const Vec2 s0 = project_camera_space(p0, cam);
        const Vec2 s1 = project_camera_space(p1, cam);
        const Vec2 s2 = project_camera_space(p2, cam);
        const double area = detail::edge_function(s0, s1, s2);
        if (std::abs(area) < 1e-12)
        {
            continue; // edge-on
        }
        const int x_min = std::max(0, static_cast<int>(std::ceil(std::min({s0.x(), s1.x(), s2.x()}))));
        const int x_max = std::min(cam.width - 1, static_cast<int>(std::floor(std::max({s0.x(), s1.x(), s2.x()}))));
        const int y_min = std::max(0, static_cast<int>(std::ceil(std::min({s0.y(), s1.y(), s2.y()}))));
        const int y_max =
            std::min(cam.height - 1, static_cast<int>(std::floor(std::max({s0.y(), s1.y(), s2.y()}))));
        const double inv_z0 = 1.0 / p0.z();
        const double inv_z1 = 1.0 / p1.z();
        const double inv_z2 = 1.0 / p2.z();
        for (int y = y_min; y <= y_max; ++y)
        {
            for (int x = x_min; x <= x_max; ++x)
            {
                const Vec2 p(x, y);
                const double w0 = detail::edge_function(s1, s2, p) / area;
                const double w1 = detail::edge_function(s2, s0, p) / area;
                const double w2 = detail::edge_function(s0, s1, p) / area;
                if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0)
                {
                    continue;
                }
                const double q0 = w0 * inv_z0;
                const double q1 = w1 * inv_z1;
                const double q2 = w2 * inv_z2;
                const double sum = q0 + q1 + q2;
                const double depth = 1.0 / sum;
                const std::size_t i = frags.index(x, y);
                if (depth < frags.depth[i])
                {
                    frags.depth[i] = depth;
                    frags.triangle[i] = static_cast<int>(t);
                    frags.bary[i] = Vec3(q0, q1, q2) / sum;
                }
            }
        }
    }
    return frags;
}

/**
 * Point queries against the projected mesh: the nearest surface depth at an
 * arbitrary sub-pixel image location. Triangles are binned by their screen
 * bounding boxes into one-pixel cells.
 */
class DepthQuery
{
public:
    DepthQuery(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles,
               const CameraIntrinsics& cam, const RasterOptions& options = {})
        : vertices_(vertices), triangles_(triangles), cam_(cam), cells_(cam.num_pixels())
    {
        screen_.resize(triangles.size());
        for (std::size_t t = 0; t < triangles.size(); ++t)
        {
            const auto& tri = triangles[t];
            const Vec3& p0 = vertices[tri[0]];
            const Vec3& p1 = vertices[tri[1]];
            const Vec3& p2 = vertices[tri[2]];
            if (p0.z() <= kNearPlane || p1.z() <= kNearPlane || p2.z() <= kNearPlane)
            {
                continue;
            }
            if (options.cull_backfaces && !detail::front_facing(p0, p1, p2))
            {
                continue;
            }
            auto& s = screen_[t];
            s = {project_camera_space(p0, cam), project_camera_space(p1, cam), project_camera_space(p2, cam)};
            const int x0 = std::max(0, cell_of(std::min({s[0].x(), s[1].x(), s[2].x()})));
            const int x1 = std::min(cam.width - 1, cell_of(std::max({s[0].x(), s[1].x(), s[2].x()})));
            const int y0 = std::max(0, cell_of(std::min({s[0].y(), s[1].y(), s[2].y()})));
            const int y1 = std::min(cam.height - 1, cell_of(std::max({s[0].y(), s[1].y(), s[2].y()})));
            for (int y = y0; y <= y1; ++y)
            {
                for (int x = x0; x <= x1; ++x)
                {
                    cells_[static_cast<std::size_t>(y) * cam.width + x].push_back(static_cast<int>(t));
                }
            }
        }
    }

    /// Nearest depth at image point q along its viewing ray; nullopt where nothing projects.
    std::optional<double> nearest_depth(const Vec2& q) const
    {
        const int x = cell_of(q.x());
        const int y = cell_of(q.y());
        if (!cam_.contains(x, y))
        {
            return std::nullopt;
        }
        const Vec3 ray = pixel_ray(q.x(), q.y(), cam_);
        std::optional<double> best;
        for (int t : cells_[static_cast<std::size_t>(y) * cam_.width + x])
        {
            const auto& s = screen_[t];
            const double area = detail::edge_function(s[0], s[1], s[2]);
            if (std::abs(area) < 1e-12)
            {
                continue;
            }
            const double tol = -1e-9;
            if (detail::edge_function(s[1], s[2], q) / area < tol || detail::edge_function(s[2], s[0], q) / area < tol ||
                detail::edge_function(s[0], s[1], q) / area < tol)
            {
                continue;
            }
            const auto& tri = triangles_[t];
            const Vec3& p0 = vertices_[tri[0]];
            const Vec3 n = (vertices_[tri[1]] - p0).cross(vertices_[tri[2]] - p0);
            const double denom = n.dot(ray);
            if (std::abs(denom) < 1e-300)
            {
                continue;
            }
            const double depth = n.dot(p0) / denom;
            if (!best || depth < *best)
            {
                best = depth;
            }
        }
        return best;
    }

private:
    static int cell_of(double coord) { return static_cast<int>(std::floor(coord + 0.5)); }

    std::vector<Vec3> vertices_;
    std::vector<Triangle> triangles_;
    CameraIntrinsics cam_;
    std::vector<std::array<Vec2, 3>> screen_;
    std::vector<std::vector<int>> cells_;
};

} // namespace nearps

#endif // NEARPS_RENDER_RASTERIZER_HPP
