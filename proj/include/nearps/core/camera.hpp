/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/core/camera.hpp
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

#ifndef NEARPS_CORE_CAMERA_HPP
#define NEARPS_CORE_CAMERA_HPP

#include "nearps/core/types.hpp"

#include "Eigen/Geometry"

#include <cmath>

namespace nearps {

/**
 * Rotation matrix of a pose, composed as R = R_z(roll) * R_y(yaw) * R_x(pitch).
 */
inline Mat3 rotation_matrix(const Pose& pose)
{
    const Eigen::AngleAxisd rx(pose.pitch, Vec3::UnitX());
    const Eigen::AngleAxisd ry(pose.yaw, Vec3::UnitY());
    const Eigen::AngleAxisd rz(pose.roll, Vec3::UnitZ());
    return (rz * ry * rx).toRotationMatrix();
}

inline Vec3 transform_point(const Vec3& point, const Pose& pose)
{
    return rotation_matrix(pose) * point + pose.translation;
}

/// Applies the pose to every vertex; albedo and topology are copied unchanged.
inline FaceMesh posed(const FaceMesh& mesh, const Pose& pose)
{
    const Mat3 rotation = rotation_matrix(pose);
    FaceMesh out = mesh;
    for (auto& v : out.vertices)
    {
        v = rotation * v + pose.translation;
    }
    return out;
}

/// Pinhole projection of a point already expressed in camera space.
inline Vec2 project_camera_space(const Vec3& point, const CameraIntrinsics& cam)
{
    if (!(point.z() > 0.0))
    {
        throw BehindCamera("point is behind the camera (z = " + std::to_string(point.z()) + ")");
    }
    return {cam.fx * point.x() / point.z() + cam.cx, cam.fy * point.y() / point.z() + cam.cy};
}

/**
 * Projects a model-space point: q = Pi(R * V + t).
 *
 * Throws BehindCamera if the transformed point has z <= 0.
 */
inline Vec2 project(const Vec3& point, const Pose& pose, const CameraIntrinsics& cam)
{
    return project_camera_space(transform_point(point, pose), cam);
}

/// Viewing ray through a pixel, scaled so that its z component is 1.
inline Vec3 pixel_ray(double u, double v, const CameraIntrinsics& cam)
{
    return {(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0};
}

/**
 * Inverse of the pinhole projection at a known depth along +z.
 */
inline Vec3 back_project(const Vec2& pixel, double depth_z, const CameraIntrinsics& cam)
{
    if (!(depth_z > 0.0))
    {
        throw InvalidInput("back_project requires a positive depth");
    }
    return depth_z * pixel_ray(pixel.x(), pixel.y(), cam);
}

} // namespace nearps

#endif // NEARPS_CORE_CAMERA_HPP
