/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/core/face_model.hpp
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

#ifndef NEARPS_CORE_FACE_MODEL_HPP
#define NEARPS_CORE_FACE_MODEL_HPP

#include "nearps/core/types.hpp"

#include "Eigen/Geometry"
#include "Eigen/QR"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace nearps {

inline constexpr int kIdentityCoefficients = 100;
inline constexpr int kExpressionCoefficients = 79;
inline constexpr int kAlbedoCoefficients = 100;

/**
 * Linear face model: geometry G = G_mean + B_id * a_id + B_exp * a_exp and
 * albedo A = A_mean + B_albedo * a_albedo, both stored as interleaved
 * (x0, y0, z0, x1, ...) vectors of length 3 * n_vertices.
 */
struct LinearFaceModel
{
    Eigen::VectorXd mean_shape;
    Eigen::VectorXd mean_albedo;
    Eigen::MatrixXd basis_id;     ///< 3n x 100
    Eigen::MatrixXd basis_exp;    ///< 3n x 79
    Eigen::MatrixXd basis_albedo; ///< 3n x 100
    std::vector<Triangle> triangles;

    int num_vertices() const { return static_cast<int>(mean_shape.size() / 3); }
};

inline void validate(const LinearFaceModel& model)
{
    const Eigen::Index rows = model.mean_shape.size();
    if (rows == 0 || rows % 3 != 0)
    {
        throw InvalidInput("face model mean shape must have length 3 * n_vertices");
    }
    if (model.mean_albedo.size() != rows)
    {
        throw InvalidInput("face model mean albedo length does not match mean shape");
    }
    auto check = [&](const Eigen::MatrixXd& basis, int cols, const char* name) {
        if (basis.rows() != rows || basis.cols() != cols)
        {
            throw InvalidInput(std::string("face model ") + name + " basis must be " + std::to_string(rows) + " x " +
                               std::to_string(cols) + ", got " + std::to_string(basis.rows()) + " x " +
                               std::to_string(basis.cols()));
        }
    };
    check(model.basis_id, kIdentityCoefficients, "identity");
    check(model.basis_exp, kExpressionCoefficients, "expression");
    check(model.basis_albedo, kAlbedoCoefficients, "albedo");
    const int n = model.num_vertices();
    for (const auto& tri : model.triangles)
    {
        for (int idx : tri)
        {
            if (idx < 0 || idx >= n)
            {
                throw InvalidInput("face model triangle index out of range");
            }
        }
    }
}

/// Geometry vector before reshaping: mean + B_id * a_id + B_exp * a_exp.
inline Eigen::VectorXd synthesize_geometry(const LinearFaceModel& model, const Eigen::VectorXd& alpha_id,
                                           const Eigen::VectorXd& alpha_exp)
{
    if (alpha_id.size() != model.basis_id.cols() || alpha_exp.size() != model.basis_exp.cols())
    {
        throw InvalidInput("shape coefficient lengths (" + std::to_string(alpha_id.size()) + ", " +
                           std::to_string(alpha_exp.size()) + ") do not match the model (" +
                           std::to_string(model.basis_id.cols()) + ", " + std::to_string(model.basis_exp.cols()) +
                           ")");
    }
    return model.mean_shape + model.basis_id * alpha_id + model.basis_exp * alpha_exp;
}

/// Albedo vector before clamping: mean + B_albedo * a_albedo.
inline Eigen::VectorXd synthesize_albedo(const LinearFaceModel& model, const Eigen::VectorXd& alpha_albedo)
{
    if (alpha_albedo.size() != model.basis_albedo.cols())
    {
        throw InvalidInput("albedo coefficient length (" + std::to_string(alpha_albedo.size()) +
                           ") does not match the model (" + std::to_string(model.basis_albedo.cols()) + ")");
    }
    return model.mean_albedo + model.basis_albedo * alpha_albedo;
}

/// Reshapes an interleaved 3n vector into points.
inline std::vector<Vec3> to_points(const Eigen::VectorXd& interleaved)
{
    std::vector<Vec3> out(static_cast<std::size_t>(interleaved.size() / 3));
    for (std::size_t i = 0; i < out.size(); ++i)
    {
        out[i] = interleaved.segment<3>(3 * static_cast<Eigen::Index>(i));
    }
    return out;
}

inline Eigen::VectorXd to_interleaved(const std::vector<Vec3>& points)
{
    Eigen::VectorXd out(3 * static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i)
    {
        out.segment<3>(3 * static_cast<Eigen::Index>(i)) = points[i];
    }
    return out;
}

/**
 * Builds a face mesh from model coefficients. Albedo is clamped to [0,1]
 * after the linear combination.
 */
inline FaceMesh synthesize_face(const LinearFaceModel& model, const Eigen::VectorXd& alpha_id,
                                const Eigen::VectorXd& alpha_exp, const Eigen::VectorXd& alpha_albedo)
{
    FaceMesh mesh;
    mesh.vertices = to_points(synthesize_geometry(model, alpha_id, alpha_exp));
    mesh.albedo = to_points(synthesize_albedo(model, alpha_albedo).cwiseMax(0.0).cwiseMin(1.0));
    mesh.triangles = model.triangles;
    return mesh;
}

inline FaceMesh mean_face(const LinearFaceModel& model)
{
    return synthesize_face(model, Eigen::VectorXd::Zero(model.basis_id.cols()),
                           Eigen::VectorXd::Zero(model.basis_exp.cols()),
                           Eigen::VectorXd::Zero(model.basis_albedo.cols()));
}

struct ToyModelOptions
{
    int grid_cols = 96;          ///< vertex columns of the parameter grid
    int grid_rows = 112;         ///< vertex rows
    double half_width = 75.0;    ///< mm
    double half_height = 95.0;   ///< mm
    double depth = 70.0;         ///< mm, centre-to-rim bulge
    double id_scale = 10.0;      ///< per-vertex RMS displacement of the first identity column, mm
    double id_decay = 0.7;
    double exp_scale = 3.0;
    double exp_decay = 0.65;
    double albedo_scale = 0.06;
    double albedo_decay = 0.85;
    double in_plane_factor = 0.3; ///< relative weight of the two non-depth displacement directions
    std::uint64_t seed = 7;
};

namespace detail {

/// Orthonormal frame whose first axis is a random direction close to `dominant`.
inline Mat3 random_frame(std::mt19937_64& rng, const Vec3& dominant, double spread)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec3 d1 = dominant + spread * Vec3(normal(rng), normal(rng), normal(rng));
    d1.normalize();
    Vec3 helper(normal(rng), normal(rng), normal(rng));
    Vec3 d2 = (helper - helper.dot(d1) * d1).normalized();
    Vec3 d3 = d1.cross(d2);
    Mat3 frame;
    frame << d1, d2, d3;
    return frame;
}

} // namespace detail

/**
 * Procedural stand-in for a PCA face model.
 *
 * The mean is an ellipsoidal cap with nose, eye sockets, brow and lips, facing
 * -z and centred on the origin. Bases are built from low-frequency cosine
 * modes over the face parameter domain, orthonormalised on the kept vertices,
 * paired with per-mode orthonormal direction frames (depth-dominant first) and
 * scaled by geometrically decaying singular values. Columns are therefore
 * mutually orthogonal within and across the identity/expression blocks.
 */
inline LinearFaceModel make_toy_model(const ToyModelOptions& opt = {})
{
    if (opt.grid_cols < 12 || opt.grid_rows < 12)
    {
        throw InvalidInput("toy model grid must be at least 12 x 12");
    }
    // Parameter grid cropped to the unit disc.
    std::vector<int> index(static_cast<std::size_t>(opt.grid_cols * opt.grid_rows), -1);
    std::vector<Vec2> params;
    for (int j = 0; j < opt.grid_rows; ++j)
    {
        for (int i = 0; i < opt.grid_cols; ++i)
        {
            const double s = -1.0 + 2.0 * i / (opt.grid_cols - 1);
            const double t = -1.0 + 2.0 * j / (opt.grid_rows - 1);
            if (s * s + t * t <= 1.0)
            {
                index[j * opt.grid_cols + i] = static_cast<int>(params.size());
                params.emplace_back(s, t);
            }
        }
    }
    LinearFaceModel model;
    for (int j = 0; j + 1 < opt.grid_rows; ++j)
    {
        for (int i = 0; i + 1 < opt.grid_cols; ++i)
        {
            const int v00 = index[j * opt.grid_cols + i];
            const int v10 = index[j * opt.grid_cols + i + 1];
            const int v01 = index[(j + 1) * opt.grid_cols + i];
            const int v11 = index[(j + 1) * opt.grid_cols + i + 1];
            if (v00 >= 0 && v01 >= 0 && v10 >= 0)
            {
                model.triangles.push_back({v00, v01, v10});
            }
            if (v10 >= 0 && v01 >= 0 && v11 >= 0)
            {
                model.triangles.push_back({v10, v01, v11});
            }
        }
    }

    const auto n = static_cast<Eigen::Index>(params.size());
    auto gauss = [](double ds, double dt, double ss, double st) {
        return std::exp(-0.5 * (ds * ds / (ss * ss) + dt * dt / (st * st)));
    };
    model.mean_shape.resize(3 * n);
    model.mean_albedo.resize(3 * n);
    for (Eigen::Index v = 0; v < n; ++v)
    {
        const double s = params[v].x();
        const double t = params[v].y(); // grows downward, like image y
        const double r2 = s * s + t * t;
        double z = -opt.depth * std::sqrt(std::max(0.0, 1.0 - 0.9 * r2));
        z -= 22.0 * gauss(s, t - 0.05, 0.11, 0.22);                                  // nose
        z += 7.0 * (gauss(s - 0.38, t + 0.2, 0.13, 0.09) + gauss(s + 0.38, t + 0.2, 0.13, 0.09)); // eye sockets
        z -= 4.0 * gauss(0.0, t + 0.42, 0.6, 0.07);                                   // brow ridge
        z -= 3.0 * gauss(s, t - 0.5, 0.2, 0.05);                                      // lips
        z -= 5.0 * gauss(s, t - 0.82, 0.25, 0.12);                                    // chin
        model.mean_shape.segment<3>(3 * v) = Vec3(opt.half_width * s, opt.half_height * t, z);
        const double cheeks = gauss(std::abs(s) - 0.45, t - 0.15, 0.15, 0.15);
        model.mean_albedo.segment<3>(3 * v) =
            Vec3(0.78 + 0.06 * cheeks, 0.57 - 0.04 * cheeks, 0.47 - 0.03 * cheeks) * (1.0 - 0.12 * r2);
    }

    // Cosine modes ordered by frequency, orthonormalised over the kept vertices.
    struct Mode
    {
        int p, q;
    };
    std::vector<Mode> modes;
    for (int p = 0; p < 16; ++p)
    {
        for (int q = 0; q < 16; ++q)
        {
            modes.push_back({p, q});
        }
    }
    std::stable_sort(modes.begin(), modes.end(),
                     [](const Mode& a, const Mode& b) { return a.p * a.p + a.q * a.q < b.p * b.p + b.q * b.q; });
    const int shape_columns = kIdentityCoefficients + kExpressionCoefficients;
    const int num_modes = (std::max(shape_columns, kAlbedoCoefficients) + 2) / 3;
    if (n < num_modes)
    {
        throw InvalidInput("toy model grid too small for the requested basis size");
    }
    Eigen::MatrixXd raw(n, num_modes);
    const double pi = 3.14159265358979323846;
    for (int m = 0; m < num_modes; ++m)
    {
        for (Eigen::Index v = 0; v < n; ++v)
        {
            raw(v, m) = std::cos(modes[m].p * pi * (params[v].x() + 1.0) / 2.0) *
                        std::cos(modes[m].q * pi * (params[v].y() + 1.0) / 2.0);
        }
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, num_modes);
    // Fix the sign convention so that the result does not depend on the QR implementation.
    for (int m = 0; m < num_modes; ++m)
    {
        if (q.col(m).dot(raw.col(m)) < 0.0)
        {
            q.col(m) *= -1.0;
        }
    }
    const double unit_rms = std::sqrt(static_cast<double>(n));

    std::mt19937_64 rng(opt.seed);
    auto build_block = [&](int first_column, int count, double scale, double decay, double secondary,
                           const std::vector<Mat3>& frames) {
        Eigen::MatrixXd basis(3 * n, count);
        for (int c = 0; c < count; ++c)
        {
            const int column = first_column + c;
            const int mode = column / 3;
            const int axis = column % 3;
            const Vec3 dir = frames[mode].col(axis);
            const double sigma = scale * std::pow(decay, c) * (axis == 0 ? 1.0 : secondary);
            for (Eigen::Index v = 0; v < n; ++v)
            {
                basis.block<3, 1>(3 * v, c) = dir * (q(v, mode) * unit_rms * sigma);
            }
        }
        return basis;
    };
    std::vector<Mat3> shape_frames;
    std::vector<Mat3> albedo_frames;
    for (int m = 0; m < num_modes; ++m)
    {
        shape_frames.push_back(detail::random_frame(rng, Vec3::UnitZ(), 0.25));
    }
    for (int m = 0; m < num_modes; ++m)
    {
        albedo_frames.push_back(detail::random_frame(rng, Vec3(0.8, 0.5, 0.35).normalized(), 0.4));
    }
    model.basis_id = build_block(0, kIdentityCoefficients, opt.id_scale, opt.id_decay, opt.in_plane_factor,
                                 shape_frames);
    model.basis_exp = build_block(kIdentityCoefficients, kExpressionCoefficients, opt.exp_scale, opt.exp_decay,
                                  opt.in_plane_factor, shape_frames);
    model.basis_albedo =
        build_block(0, kAlbedoCoefficients, opt.albedo_scale, opt.albedo_decay, 1.0, albedo_frames);
    return model;
}

} // namespace nearps

#endif // NEARPS_CORE_FACE_MODEL_HPP
