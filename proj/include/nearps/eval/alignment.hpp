/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/eval/alignment.hpp
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

#ifndef NEARPS_EVAL_ALIGNMENT_HPP
#define NEARPS_EVAL_ALIGNMENT_HPP

#include "nearps/core/error.hpp"
#include "nearps/core/mesh.hpp"
#include "nearps/eval/metrics.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace nearps {

/// Nearest-neighbour queries over a fixed point set.
class NearestNeighbours
{
public:
    explicit NearestNeighbours(const std::vector<Vec3>& points)
    {
        std::vector<Entry> entries;
        entries.reserve(points.size());
        for (std::size_t i = 0; i < points.size(); ++i)
        {
            entries.emplace_back(Point(points[i].x(), points[i].y(), points[i].z()), i);
        }
        tree_ = Tree(entries.begin(), entries.end());
    }

    /// Index of the nearest point.
    std::size_t nearest(const Vec3& q) const
    {
        std::vector<Entry> hits;
        tree_.query(boost::geometry::index::nearest(Point(q.x(), q.y(), q.z()), 1), std::back_inserter(hits));
        return hits.front().second;
    }

private:
    using Point = boost::geometry::model::point<double, 3, boost::geometry::cs::cartesian>;
    using Entry = std::pair<Point, std::size_t>;
    using Tree = boost::geometry::index::rtree<Entry, boost::geometry::index::quadratic<16>>;
    Tree tree_;
};

/// x -> scale * rotation * x + translation
struct Similarity
{
    double scale = 1.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& x) const { return scale * rotation * x + translation; }
    Similarity after(const Similarity& first) const
    {
        return {scale * first.scale, rotation * first.rotation, scale * rotation * first.translation + translation};
    }
};

/**
 * Closed-form least-squares similarity mapping source[i] onto target[i]
 * (orthogonal Procrustes with scale). The rotation is always proper.
 */
inline Similarity fit_similarity(const std::vector<Vec3>& source, const std::vector<Vec3>& target)
{
    if (source.size() != target.size())
    {
        throw InvalidInput("correspondence lists differ in length");
    }
    if (source.size() < 3)
    {
        throw DegenerateGeometry("similarity alignment needs at least three correspondences", -1);
    }
    Eigen::Matrix3Xd src(3, source.size());
    Eigen::Matrix3Xd dst(3, target.size());
    for (std::size_t i = 0; i < source.size(); ++i)
    {
        src.col(static_cast<Eigen::Index>(i)) = source[i];
        dst.col(static_cast<Eigen::Index>(i)) = target[i];
    }
    const Eigen::Matrix3Xd centred = src.colwise() - src.rowwise().mean();
    const Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centred);
    const auto sv = svd.singularValues();
    if (!(sv[1] > 1e-9 * sv[0]))
    {
        throw DegenerateGeometry("correspondences are collinear", -1);
    }
    const Eigen::Matrix4d t = Eigen::umeyama(src, dst, true);
    Similarity s;
    const Mat3 sr = t.topLeftCorner<3, 3>();
    s.scale = std::cbrt(sr.determinant());
    s.rotation = sr / s.scale;
    s.translation = t.topRightCorner<3, 1>();
    return s;
}

struct AlignmentSettings
{
    int max_iterations = 30;
    double outlier_factor = 3.0; ///< pairs farther than this times the median distance are dropped
};

struct AlignmentResult
{
    Similarity transform;
    double rms = 0.0; ///< over the correspondences used in the final fit
    int iterations = 0;
};

namespace detail {

inline std::vector<Vec3> apply_all(const Similarity& s, const std::vector<Vec3>& points)
{
    std::vector<Vec3> out;
    out.reserve(points.size());
    for (const auto& p : points)
    {
        out.push_back(s.apply(p));
    }
    return out;
}

/// Principal frame of a point set: centroid, RMS radius and axes sorted by decreasing spread.
struct PrincipalFrame
{
    Vec3 centroid;
    double radius;
    Mat3 axes;
};

inline PrincipalFrame principal_frame(const std::vector<Vec3>& points)
{
    Vec3 c = Vec3::Zero();
    for (const auto& p : points)
    {
        c += p;
    }
    c /= static_cast<double>(points.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& p : points)
    {
        cov += (p - c) * (p - c).transpose();
    }
    cov /= static_cast<double>(points.size());
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Mat3 axes;
    for (int k = 0; k < 3; ++k)
    {
        axes.col(k) = eig.eigenvectors().col(2 - k);
    }
    if (axes.determinant() < 0.0)
    {
        axes.col(2) = -axes.col(2);
    }
    return {c, std::sqrt(cov.trace()), axes};
}

/// ICP from an initial transform: mutual nearest neighbours with a median-based outlier cut.
inline AlignmentResult icp(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                           const NearestNeighbours& target_index, Similarity current,
                           const AlignmentSettings& settings)
{
    AlignmentResult result;
    std::vector<std::pair<std::size_t, std::size_t>> previous_pairs;
    for (int iter = 0; iter < settings.max_iterations; ++iter)
    {
        const std::vector<Vec3> moved = apply_all(current, source);
        const NearestNeighbours source_index(moved);
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        std::vector<double> dist;
        for (std::size_t i = 0; i < moved.size(); ++i)
        {
            const std::size_t j = target_index.nearest(moved[i]);
            if (source_index.nearest(target[j]) == i)
            {
                pairs.emplace_back(i, j);
                dist.push_back((moved[i] - target[j]).norm());
            }
        }
        if (pairs.size() < 3)
        {
            throw DegenerateGeometry("too few mutual correspondences for alignment", -1);
        }
        std::vector<double> sorted = dist;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
        const double cutoff = settings.outlier_factor * sorted[sorted.size() / 2];
        std::vector<std::pair<std::size_t, std::size_t>> kept;
        for (std::size_t k = 0; k < pairs.size(); ++k)
        {
            if (dist[k] <= cutoff)
            {
                kept.push_back(pairs[k]);
            }
        }
        if (kept.size() < 3)
        {
            kept = pairs;
        }
        result.iterations = iter + 1;
        if (kept == previous_pairs)
        {
            break; // fixed point: the fit would reproduce the current transform
        }
        std::vector<Vec3> src;
        std::vector<Vec3> dst;
        for (const auto& [i, j] : kept)
        {
            src.push_back(source[i]);
            dst.push_back(target[j]);
        }
        current = fit_similarity(src, dst);
        double sq = 0.0;
        for (std::size_t k = 0; k < src.size(); ++k)
        {
            sq += (current.apply(src[k]) - dst[k]).squaredNorm();
        }
        result.rms = std::sqrt(sq / static_cast<double>(src.size()));
        previous_pairs = std::move(kept);
    }
    result.transform = current;
    return result;
}

} // namespace detail

/**
 * Similarity transform taking `source` onto `target`. With correspondences
 * (pairs of source/target vertex indices) the closed-form fit is returned;
 * otherwise ICP runs from the four proper principal-axis alignments and the
 * one with the lowest residual wins. These starts move with the input, so the
 * result is equivariant under similarity transforms of either mesh. The
 * identity start is used only when every principal-axis start fails.
 */
inline AlignmentResult align_7dof(const FaceMesh& source, const FaceMesh& target,
                                  const std::vector<std::pair<int, int>>& correspondences = {},
                                  const AlignmentSettings& settings = {})
{
    if (source.vertices.empty() || target.vertices.empty())
    {
        throw InvalidInput("alignment needs non-empty meshes");
    }
    if (!correspondences.empty())
    {
        std::vector<Vec3> src;
        std::vector<Vec3> dst;
        for (const auto& [i, j] : correspondences)
        {
            if (i < 0 || j < 0 || static_cast<std::size_t>(i) >= source.vertices.size() ||
                static_cast<std::size_t>(j) >= target.vertices.size())
            {
                throw InvalidInput("correspondence index out of range");
            }
            src.push_back(source.vertices[i]);
            dst.push_back(target.vertices[j]);
        }
        AlignmentResult r;
        r.transform = fit_similarity(src, dst);
        double sq = 0.0;
        for (std::size_t k = 0; k < src.size(); ++k)
        {
            sq += (r.transform.apply(src[k]) - dst[k]).squaredNorm();
        }
        r.rms = std::sqrt(sq / static_cast<double>(src.size()));
        return r;
    }
    const detail::PrincipalFrame fs = detail::principal_frame(source.vertices);
    const detail::PrincipalFrame ft = detail::principal_frame(target.vertices);
    if (!(fs.radius > 0.0) || !(ft.radius > 0.0))
    {
        throw DegenerateGeometry("alignment input collapses to a point", -1);
    }
    const NearestNeighbours target_index(target.vertices);
    std::vector<Similarity> starts;
    for (const Vec3 flip : {Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)})
    {
        Similarity init;
        init.scale = ft.radius / fs.radius;
        init.rotation = ft.axes * flip.asDiagonal() * fs.axes.transpose();
        init.translation = ft.centroid - init.scale * init.rotation * fs.centroid;
        starts.push_back(init);
    }
    std::optional<AlignmentResult> best;
    const auto try_start = [&](const Similarity& init) {
        try
        {
            const AlignmentResult r = detail::icp(source.vertices, target.vertices, target_index, init, settings);
            if (!best || r.rms < best->rms)
            {
                best = r;
            }
        } catch (const DegenerateGeometry&)
        {
            // A start far from the target can leave too few mutual pairs; the other starts decide.
        }
    };
    for (const auto& init : starts)
    {
        try_start(init);
    }
    if (!best)
    {
        try_start(Similarity{});
    }
    if (!best)
    {
        throw DegenerateGeometry("no alignment start produced enough mutual correspondences", -1);
    }
    return *best;
}

/**
 * Distance from every vertex of the reconstruction to its nearest truth
 * vertex, after aligning the reconstruction onto the truth (unless disabled).
 */
inline ErrorReport point_to_point_error(const FaceMesh& reconstructed, const FaceMesh& truth, bool align = true)
{
    if (reconstructed.vertices.empty() || truth.vertices.empty())
    {
        throw InvalidInput("point-to-point error needs non-empty meshes");
    }
    Similarity s;
    if (align)
    {
        s = align_7dof(reconstructed, truth).transform;
    }
    const NearestNeighbours index(truth.vertices);
    std::vector<double> values;
    values.reserve(reconstructed.vertices.size());
    for (const auto& v : reconstructed.vertices)
    {
        const Vec3 p = s.apply(v);
        values.push_back((p - truth.vertices[index.nearest(p)]).norm());
    }
    return summarize(std::move(values), "mm");
}

} // namespace nearps

#endif // NEARPS_EVAL_ALIGNMENT_HPP
