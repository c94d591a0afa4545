/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/render/raycast.hpp
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

#ifndef NEARPS_RENDER_RAYCAST_HPP
#define NEARPS_RENDER_RAYCAST_HPP

#include "nearps/core/types.hpp"

#include "Eigen/Geometry"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

namespace nearps {

/// Moeller-Trumbore; returns the ray parameter of the hit or a negative value.
inline double intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 e1 = b - a;
    const Vec3 e2 = c - a;
    const Vec3 p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-18)
    {
        return -1.0;
    }
    const double inv = 1.0 / det;
    const Vec3 s = origin - a;
    const double u = s.dot(p) * inv;
    if (u < 0.0 || u > 1.0)
    {
        return -1.0;
    }
    const Vec3 q = s.cross(e1);
    const double v = dir.dot(q) * inv;
    if (v < 0.0 || u + v > 1.0)
    {
        return -1.0;
    }
    return e2.dot(q) * inv;
}

/**
 * Median-split bounding volume hierarchy over a triangle soup, answering
 * segment occlusion queries for the cast-shadow test.
 */
class TriangleBvh
{
public:
    TriangleBvh(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles)
        : vertices_(vertices), triangles_(triangles), order_(triangles.size())
    {
        std::iota(order_.begin(), order_.end(), 0);
        centroids_.reserve(triangles.size());
        for (const auto& t : triangles)
        {
            centroids_.push_back((vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0);
        }
        if (!triangles.empty())
        {
            nodes_.resize(1);
            build(0, 0, static_cast<int>(triangles.size()));
        }
    }

    // Holds references to the vertex and triangle arrays; they must outlive the hierarchy.

    /**
     * True if any triangle other than `ignore` intersects the open segment
     * origin + s * dir, s in (t_min, t_max).
     */
    bool occluded(const Vec3& origin, const Vec3& dir, double t_min, double t_max, int ignore = -1) const
    {
        if (nodes_.empty())
        {
            return false;
        }
        const Vec3 inv_dir = dir.cwiseInverse();
        std::vector<int> stack{0};
        while (!stack.empty())
        {
            const Node& node = nodes_[stack.back()];
            stack.pop_back();
            if (!hits_box(node.box, origin, inv_dir, t_min, t_max))
            {
                continue;
            }
            if (node.count > 0)
            {
                for (int k = node.first; k < node.first + node.count; ++k)
                {
                    const int t = order_[k];
                    if (t == ignore)
                    {
                        continue;
                    }
                    const auto& tri = triangles_[t];
                    const double s = intersect_triangle(origin, dir, vertices_[tri[0]], vertices_[tri[1]],
                                                        vertices_[tri[2]]);
                    if (s > t_min && s < t_max)
                    {
                        return true;
                    }
                }
            } else
            {
                stack.push_back(node.left);
                stack.push_back(node.left + 1);
            }
        }
        return false;
    }

private:
    struct Node
    {
        Eigen::AlignedBox3d box;
        int first = 0;
        int count = 0; ///< > 0 for leaves
        int left = -1; ///< children at left, left + 1
    };

    void build(int index, int first, int count)
    {
        Eigen::AlignedBox3d box;
        Eigen::AlignedBox3d centroid_box;
        for (int k = first; k < first + count; ++k)
        {
            for (int v : triangles_[order_[k]])
            {
                box.extend(vertices_[v]);
            }
            centroid_box.extend(centroids_[order_[k]]);
        }
        nodes_[index].box = box;
        if (count <= 4)
        {
            nodes_[index].first = first;
            nodes_[index].count = count;
            return;
        }
        int axis = 0;
        centroid_box.sizes().maxCoeff(&axis);
        const int mid = first + count / 2;
        std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                         [&](int a, int b) { return centroids_[a][axis] < centroids_[b][axis]; });
        const int left = static_cast<int>(nodes_.size());
        nodes_.resize(nodes_.size() + 2);
        nodes_[index].left = left;
        build(left, first, mid - first);
        build(left + 1, mid, first + count - mid);
    }

    static bool hits_box(const Eigen::AlignedBox3d& box, const Vec3& origin, const Vec3& inv_dir, double t_min,
                         double t_max)
    {
        for (int a = 0; a < 3; ++a)
        {
            double t0 = (box.min()[a] - origin[a]) * inv_dir[a];
            double t1 = (box.max()[a] - origin[a]) * inv_dir[a];
            if (t0 > t1)
            {
                std::swap(t0, t1);
            }
            t_min = std::max(t_min, t0);
            t_max = std::min(t_max, t1);
            if (t_min > t_max)
            {
                return false;
            }
        }
        return true;
    }

    const std::vector<Vec3>& vertices_;
    const std::vector<Triangle>& triangles_;
    std::vector<int> order_;
    std::vector<Vec3> centroids_;
    std::vector<Node> nodes_;
};

} // namespace nearps

#endif // NEARPS_RENDER_RAYCAST_HPP
