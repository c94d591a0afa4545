/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/render/render.hpp
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

#ifndef NEARPS_RENDER_RENDER_HPP
#define NEARPS_RENDER_RENDER_HPP

#include "nearps/core/camera.hpp"
#include "nearps/core/mesh.hpp"
#include "nearps/render/image.hpp"
#include "nearps/render/rasterizer.hpp"
#include "nearps/render/raycast.hpp"
#include "nearps/render/shading.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace nearps {

struct RenderOptions
{
    bool smooth_shading = true; ///< interpolate area-weighted vertex normals; otherwise flat triangle normals
    bool cast_shadows = false;  ///< ray-cast occlusion test towards the light
    bool cull_backfaces = true;
};

enum class RenderStatus
{
    ok,
    behind_camera, ///< no part of the mesh is in front of the camera; the image is empty
};

struct RenderResult
{
    RadianceImage image;
    RenderStatus status = RenderStatus::ok;
};

/// Interpolated surface attributes at every covered pixel of a camera-space mesh.
struct SurfaceSamples
{
    Fragments fragments;
    std::vector<Vec3> position; ///< camera space
    std::vector<Vec3> normal;   ///< unit
    std::vector<Rgb> albedo;
};

/**
 * Rasterises a camera-space mesh and interpolates position, normal and albedo
 * with perspective-correct weights.
 */
inline SurfaceSamples sample_surface(const FaceMesh& camera_mesh, const CameraIntrinsics& cam,
                                     const RenderOptions& options = {})
{
    SurfaceSamples out;
    out.fragments =
        rasterize(camera_mesh.vertices, camera_mesh.triangles, cam, RasterOptions{options.cull_backfaces});
    const std::size_t n = out.fragments.triangle.size();
    out.position.assign(n, Vec3::Zero());
    out.normal.assign(n, Vec3::Zero());
    out.albedo.assign(n, Rgb::Zero());
    std::vector<Vec3> vnormals;
    if (options.smooth_shading)
    {
        vnormals = vertex_normals(camera_mesh);
    }
    for (std::size_t i = 0; i < n; ++i)
    {
        const int t = out.fragments.triangle[i];
        if (t < 0)
        {
            continue;
        }
        const auto& tri = camera_mesh.triangles[t];
        const Vec3& b = out.fragments.bary[i];
        const Vec3& p0 = camera_mesh.vertices[tri[0]];
        const Vec3& p1 = camera_mesh.vertices[tri[1]];
        const Vec3& p2 = camera_mesh.vertices[tri[2]];
        out.position[i] = b[0] * p0 + b[1] * p1 + b[2] * p2;
        Vec3 normal;
        if (options.smooth_shading)
        {
            normal = b[0] * vnormals[tri[0]] + b[1] * vnormals[tri[1]] + b[2] * vnormals[tri[2]];
        } else
        {
            normal = (p1 - p0).cross(p2 - p0);
        }
        out.normal[i] = normal.normalized();
        out.albedo[i] = b[0] * camera_mesh.albedo[tri[0]] + b[1] * camera_mesh.albedo[tri[1]] +
                        b[2] * camera_mesh.albedo[tri[2]];
    }
    return out;
}

/**
 * Renders a mesh under one near point light.
 *
 * Each covered pixel is shaded with shade_point() at the interpolated
 * surface point. With cast_shadows, a pixel whose segment to the light
 * crosses the mesh is black.
 */
inline RenderResult render(const FaceMesh& mesh, const Pose& pose, const CameraIntrinsics& cam,
                           const PointLight& light, const RenderOptions& options = {})
{
    validate(mesh);
    validate(cam);
    validate(light);
    const FaceMesh camera_mesh = posed(mesh, pose);
    RenderResult result;
    result.image = RadianceImage(cam.width, cam.height);
    bool any_in_front = false;
    for (const auto& v : camera_mesh.vertices)
    {
        any_in_front = any_in_front || v.z() > kNearPlane;
    }
    if (!any_in_front)
    {
        result.status = RenderStatus::behind_camera;
        return result;
    }
    const SurfaceSamples surf = sample_surface(camera_mesh, cam, options);
    std::optional<TriangleBvh> bvh;
    double offset = 0.0;
    if (options.cast_shadows)
    {
        bvh.emplace(camera_mesh.vertices, camera_mesh.triangles);
        offset = 1e-4 * std::max(1.0, mean_edge_length(camera_mesh));
    }
    for (std::size_t i = 0; i < surf.position.size(); ++i)
    {
        const int t = surf.fragments.triangle[i];
        if (t < 0)
        {
            continue;
        }
        result.image.mask[i] = 1;
        Rgb value = shade_point(surf.position[i], surf.normal[i], surf.albedo[i], light);
        if (bvh && value.maxCoeff() > 0.0)
        {
            const Vec3 to_light = light.position - surf.position[i];
            const double dist = to_light.norm();
            const Vec3 dir = to_light / dist;
            if (bvh->occluded(surf.position[i], dir, offset, dist - offset, t))
            {
                value.setZero();
            }
        }
        result.image.pixels[i] = value;
    }
    return result;
}

/// Per-triangle intensities sampled from one image; observed[i] == 0 marks unusable samples.
struct ObservedIntensities
{
    std::vector<Rgb> values;
    std::vector<std::uint8_t> observed;
};

/**
 * Bilinear interpolation at a continuous image point; every pixel carrying
 * non-zero weight must be covered by the mask.
 */
inline std::optional<Rgb> bilinear_sample(const RadianceImage& image, const Vec2& q)
{
    if (!std::isfinite(q.x()) || !std::isfinite(q.y()))
    {
        return std::nullopt;
    }
    const double fx0 = std::floor(q.x());
    const double fy0 = std::floor(q.y());
    if (fx0 < -1.0 || fy0 < -1.0 || fx0 > image.width || fy0 > image.height)
    {
        return std::nullopt;
    }
    const int x0 = static_cast<int>(fx0);
    const int y0 = static_cast<int>(fy0);
    const double ax = q.x() - fx0;
    const double ay = q.y() - fy0;
    const double w[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    Rgb sum = Rgb::Zero();
    for (int k = 0; k < 4; ++k)
    {
        if (w[k] == 0.0)
        {
            continue;
        }
        if (!image.covered(xs[k], ys[k]))
        {
            return std::nullopt;
        }
        sum += w[k] * image.at(xs[k], ys[k]);
    }
    return sum;
}

/**
 * Observed intensity of every triangle: its centroid is projected with the
 * pose and camera and the image is sampled bilinearly. Triangles whose
 * centroid is behind the camera or lands outside the mask are flagged
 * unobserved.
 */
inline ObservedIntensities sample_observed_intensity(const RadianceImage& image, const FaceMesh& mesh,
                                                     const Pose& pose, const CameraIntrinsics& cam)
{
    validate(image);
    if (image.coverage() == 0)
    {
        throw InvalidInput("cannot sample an image with an empty mask");
    }
    if (image.width != cam.width || image.height != cam.height)
    {
        throw InvalidInput("image size does not match the camera");
    }
    const Mat3 rotation = rotation_matrix(pose);
    ObservedIntensities out;
    out.values.assign(mesh.triangles.size(), Rgb::Zero());
    out.observed.assign(mesh.triangles.size(), 0);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    {
        const auto& tri = mesh.triangles[t];
        const Vec3 centroid = (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
        const Vec3 cam_point = rotation * centroid + pose.translation;
        if (!(cam_point.z() > 0.0))
        {
            continue;
        }
        const auto value = bilinear_sample(image, project_camera_space(cam_point, cam));
        if (value)
        {
            out.values[t] = *value;
            out.observed[t] = 1;
        }
    }
    return out;
}

} // namespace nearps

#endif // NEARPS_RENDER_RENDER_HPP
