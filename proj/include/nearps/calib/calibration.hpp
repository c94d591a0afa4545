/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/calib/calibration.hpp
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

#ifndef NEARPS_CALIB_CALIBRATION_HPP
#define NEARPS_CALIB_CALIBRATION_HPP

#include "nearps/core/camera.hpp"
#include "nearps/core/mesh.hpp"
#include "nearps/refine/visibility.hpp"
#include "nearps/render/render.hpp"
#include "nearps/render/shading.hpp"

#include "Eigen/Dense"
#include "json.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace nearps {

struct CalibrationProblem
{
    FaceMesh proxy;
    Pose pose;
    CameraIntrinsics cam;
    std::vector<RadianceImage> observations; ///< one per light
    std::vector<PointLight> initial_lights;
};

struct CalibrationSettings
{
    int outer_iterations = 5;        ///< visibility sets are rebuilt before each
    int max_inner_iterations = 200;  ///< LM iterations per outer iteration
    double initial_lambda = 1e-3;
    double relative_tolerance = 1e-10;
    std::size_t min_observed_triangles = 50;
    double min_front_fraction = 0.3; ///< initial lights must face this share of the visible triangles
};

/**
 * Everything the photometric objective needs, precomputed in camera space
 * for the visible triangles of the proxy.
 */
struct CalibrationData
{
    std::vector<int> triangles;  ///< proxy triangle index of each entry
    std::vector<Vec3> centroids; ///< camera space
    std::vector<Vec3> normals;   ///< camera space, unit
    std::vector<Rgb> albedo;
    std::vector<std::vector<Rgb>> observed;                 ///< [light][entry]
    std::vector<std::vector<std::uint8_t>> observed_mask;   ///< [light][entry]

    std::size_t num_lights() const { return observed.size(); }
    std::size_t size() const { return triangles.size(); }
};

/// Visible proxy triangles and their sampled intensities in every observation.
inline CalibrationData prepare_calibration(const CalibrationProblem& problem)
{
    if (problem.observations.empty())
    {
        throw InvalidInput("calibration needs at least one observation");
    }
    if (problem.observations.size() != problem.initial_lights.size())
    {
        throw InvalidInput("calibration needs exactly one initial light per observation");
    }
    validate(problem.proxy);
    const VisibleSet visible = build_visible_set(problem.proxy, problem.pose, problem.cam);
    const TriangleFrames frames = triangle_normals_and_centroids(posed(problem.proxy, problem.pose));
    const std::vector<Rgb> albedo = triangle_albedo(problem.proxy);

    CalibrationData data;
    data.triangles = visible.triangles;
    for (int t : visible.triangles)
    {
        data.centroids.push_back(frames.centroids[t]);
        data.normals.push_back(frames.normals[t]);
        data.albedo.push_back(albedo[t]);
    }
    for (const auto& image : problem.observations)
    {
        const ObservedIntensities obs = sample_observed_intensity(image, problem.proxy, problem.pose, problem.cam);
        std::vector<Rgb> values;
        std::vector<std::uint8_t> mask;
        for (int t : visible.triangles)
        {
            values.push_back(obs.values[t]);
            mask.push_back(obs.observed[t]);
        }
        data.observed.push_back(std::move(values));
        data.observed_mask.push_back(std::move(mask));
    }
    return data;
}

/**
 * Available lights per data entry under the given light positions: light j
 * counts for entry i when it was observed there and faces the triangle.
 */
inline VisibilitySets calibration_visibility(const CalibrationData& data, const std::vector<PointLight>& lights)
{
    VisibilitySets sets(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        for (std::size_t j = 0; j < lights.size(); ++j)
        {
            if (data.observed_mask[j][i] && data.normals[i].dot(lights[j].position - data.centroids[i]) > 0.0)
            {
                sets[i].push_back(static_cast<int>(j));
            }
        }
    }
    return sets;
}

struct PhotometricSystem
{
    Eigen::VectorXd residual; ///< predicted minus observed
    Eigen::MatrixXd jacobian; ///< columns: (x, y, z, beta) per light
};

/**
 * Residuals of the unclamped imaging model at every (entry, available light,
 * channel) triple, in that order, with the analytic Jacobian.
 */
inline PhotometricSystem photometric_residual_and_jacobian(const std::vector<PointLight>& lights,
                                                           const CalibrationData& data, const VisibilitySets& sets,
                                                           bool with_jacobian = true)
{
    Eigen::Index rows = 0;
    for (const auto& s : sets)
    {
        rows += 3 * static_cast<Eigen::Index>(s.size());
    }
    PhotometricSystem sys;
    sys.residual.resize(rows);
    if (with_jacobian)
    {
        sys.jacobian = Eigen::MatrixXd::Zero(rows, 4 * static_cast<Eigen::Index>(lights.size()));
    }
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        const Vec3& n = data.normals[i];
        for (int j : sets[i])
        {
            const PointLight& light = lights[j];
            const Vec3 d = light.position - data.centroids[i];
            const double r2 = d.squaredNorm();
            const double r = std::sqrt(r2);
            if (r < kLightSingularityDistance)
            {
                throw Singularity("light " + std::to_string(j) + " coincides with a triangle centroid");
            }
            const double r3 = r2 * r;
            const double nd = n.dot(d);
            const double shading = nd / r3;
            // d(N.d / r^3)/dP = N / r^3 - 3 (N.d) d / r^5
            const Vec3 grad = n / r3 - (3.0 * nd / (r3 * r2)) * d;
            for (int c = 0; c < 3; ++c)
            {
                const double rho = data.albedo[i][c];
                sys.residual[row] = rho * light.illumination * shading - data.observed[j][i][c];
                if (with_jacobian)
                {
                    sys.jacobian.block<1, 3>(row, 4 * j) = (rho * light.illumination) * grad.transpose();
                    sys.jacobian(row, 4 * j + 3) = rho * shading;
                }
                ++row;
            }
        }
    }
    return sys;
}

struct CalibrationIteration
{
    int outer = 0;
    int inner = 0;
    double objective = 0.0; ///< sum of squared residuals after the step (or of the rejected trial)
    double lambda = 0.0;
    bool accepted = false;
};

struct CalibrationReport
{
    double rms_residual = 0.0;
    std::size_t residual_count = 0;
    std::vector<CalibrationIteration> iterations;
};

struct CalibrationResult
{
    std::vector<PointLight> lights;
    CalibrationReport report;
};

namespace detail {

inline Eigen::VectorXd pack_lights(const std::vector<PointLight>& lights)
{
    Eigen::VectorXd x(4 * lights.size());
    for (std::size_t j = 0; j < lights.size(); ++j)
    {
        x.segment<3>(4 * j) = lights[j].position;
        x[4 * j + 3] = lights[j].illumination;
    }
    return x;
}

inline std::vector<PointLight> unpack_lights(const Eigen::VectorXd& x)
{
    std::vector<PointLight> lights(static_cast<std::size_t>(x.size() / 4));
    for (std::size_t j = 0; j < lights.size(); ++j)
    {
        lights[j].position = x.segment<3>(4 * j);
        lights[j].illumination = x[4 * j + 3];
    }
    return lights;
}

/// Residuals at round-off level relative to the observed intensities.
inline bool negligible_residual(const Eigen::VectorXd& residual, const CalibrationData& data)
{
    double peak = 0.0;
    for (const auto& per_light : data.observed)
    {
        for (const auto& v : per_light)
        {
            peak = std::max(peak, v.cwiseAbs().maxCoeff());
        }
    }
    return residual.cwiseAbs().maxCoeff() <= 1e-12 * peak;
}

} // namespace detail

/**
 * Levenberg-Marquardt on light positions and illuminations with the albedo
 * held at the proxy's. Each outer iteration rebuilds the available-light sets
 * from the current estimate and then runs LM on that fixed residual set.
 */
inline CalibrationResult calibrate_lights(const CalibrationData& data, const std::vector<PointLight>& initial,
                                          const CalibrationSettings& settings = {})
{
    if (initial.size() != data.num_lights())
    {
        throw InvalidInput("calibration needs exactly one initial light per observation");
    }
    for (std::size_t j = 0; j < initial.size(); ++j)
    {
        validate(initial[j]);
        std::size_t observed = 0;
        std::size_t facing = 0;
        for (std::size_t i = 0; i < data.size(); ++i)
        {
            observed += data.observed_mask[j][i];
            facing += data.normals[i].dot(initial[j].position - data.centroids[i]) > 0.0 ? 1 : 0;
        }
        if (observed < settings.min_observed_triangles)
        {
            throw InsufficientData("light " + std::to_string(j) + " is observed on only " + std::to_string(observed) +
                                   " triangles (need " + std::to_string(settings.min_observed_triangles) + ")");
        }
        if (data.size() == 0 || static_cast<double>(facing) < settings.min_front_fraction * data.size())
        {
            throw InvalidInput("initial light " + std::to_string(j) + " is not in front of the face");
        }
    }

    CalibrationResult result;
    Eigen::VectorXd x = detail::pack_lights(initial);
    for (int outer = 0; outer < settings.outer_iterations; ++outer)
    {
        const VisibilitySets sets = calibration_visibility(data, detail::unpack_lights(x));
        for (std::size_t j = 0; j < initial.size(); ++j)
        {
            std::size_t terms = 0;
            for (const auto& s : sets)
            {
                terms += std::count(s.begin(), s.end(), static_cast<int>(j));
            }
            if (terms < settings.min_observed_triangles)
            {
                throw InsufficientData("light " + std::to_string(j) + " illuminates only " + std::to_string(terms) +
                                       " observed triangles");
            }
        }
        PhotometricSystem sys = photometric_residual_and_jacobian(detail::unpack_lights(x), data, sets);
        double objective = sys.residual.squaredNorm();
        if (!std::isfinite(objective))
        {
            throw NonConvergence("calibration objective is not finite");
        }
        double lambda = settings.initial_lambda;
        bool any_accepted = false;
        for (int inner = 0; inner < settings.max_inner_iterations; ++inner)
        {
            if (objective == 0.0)
            {
                break;
            }
            const Eigen::MatrixXd jtj = sys.jacobian.transpose() * sys.jacobian;
            const Eigen::VectorXd jtr = sys.jacobian.transpose() * sys.residual;
            const Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-300);
            bool accepted = false;
            while (!accepted && lambda <= 1e20)
            {
                Eigen::MatrixXd a = jtj;
                a.diagonal() += lambda * diag;
                const Eigen::VectorXd step = a.ldlt().solve(-jtr);
                Eigen::VectorXd trial = x + step;
                bool valid = step.allFinite();
                for (Eigen::Index j = 0; valid && j < trial.size() / 4; ++j)
                {
                    valid = trial[4 * j + 3] > 0.0;
                }
                double trial_objective = std::numeric_limits<double>::infinity();
                if (valid)
                {
                    trial_objective = photometric_residual_and_jacobian(detail::unpack_lights(trial), data, sets,
                                                                        false)
                                          .residual.squaredNorm();
                }
                accepted = trial_objective < objective;
                result.report.iterations.push_back({outer, inner, trial_objective, lambda, accepted});
                if (accepted)
                {
                    const double change = (objective - trial_objective) / objective;
                    x = trial;
                    objective = trial_objective;
                    lambda = std::max(lambda / 10.0, 1e-12);
                    any_accepted = true;
                    sys = photometric_residual_and_jacobian(detail::unpack_lights(x), data, sets);
                    if (change < settings.relative_tolerance)
                    {
                        inner = settings.max_inner_iterations; // converged
                    }
                } else
                {
                    lambda *= 10.0;
                }
            }
            if (!accepted)
            {
                break; // no descent direction left at any damping: stationary
            }
        }
        if (!any_accepted && objective > 0.0 && !detail::negligible_residual(sys.residual, data))
        {
            // Without a single accepted step the start must already be stationary: every column of the
            // Jacobian is (numerically) orthogonal to the residual.
            const Eigen::VectorXd jtr = sys.jacobian.transpose() * sys.residual;
            const double rnorm = sys.residual.norm();
            for (Eigen::Index k = 0; k < jtr.size(); ++k)
            {
                const double cosine = std::abs(jtr[k]) / (sys.jacobian.col(k).norm() * rnorm + 1e-300);
                if (cosine > 1e-6)
                {
                    throw NonConvergence("calibration failed to decrease the objective (outer iteration " +
                                         std::to_string(outer) + ", rms residual " +
                                         std::to_string(std::sqrt(objective / sys.residual.size())) + ")");
                }
            }
        }
        result.report.residual_count = static_cast<std::size_t>(sys.residual.size());
        result.report.rms_residual =
            std::sqrt(objective / static_cast<double>(std::max<std::size_t>(1, result.report.residual_count)));
    }
    result.lights = detail::unpack_lights(x);
    return result;
}

inline CalibrationResult calibrate_lights(const CalibrationProblem& problem, const CalibrationSettings& settings = {})
{
    return calibrate_lights(prepare_calibration(problem), problem.initial_lights, settings);
}

namespace io {

inline nlohmann::json lights_to_json(const std::vector<PointLight>& lights)
{
    nlohmann::json j;
    j["lights"] = nlohmann::json::array();
    for (const auto& l : lights)
    {
        j["lights"].push_back(
            {{"position", {l.position.x(), l.position.y(), l.position.z()}}, {"beta", l.illumination}});
    }
    return j;
}

inline std::vector<PointLight> lights_from_json(const nlohmann::json& j)
{
    std::vector<PointLight> lights;
    try
    {
        for (const auto& entry : j.at("lights"))
        {
            const auto& p = entry.at("position");
            if (p.size() != 3)
            {
                throw InvalidInput("light position must have three components");
            }
            PointLight l{Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>()),
                         entry.at("beta").get<double>()};
            validate(l);
            lights.push_back(l);
        }
    } catch (const nlohmann::json::exception& e)
    {
        throw InvalidInput(std::string("malformed light configuration: ") + e.what());
    }
    return lights;
}

inline void write_lights(const std::string& path, const std::vector<PointLight>& lights)
{
    std::ofstream os(path);
    if (!os)
    {
        throw IoError("cannot open light file for writing", path);
    }
    os << lights_to_json(lights).dump(2) << '\n';
}

inline std::vector<PointLight> read_lights(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
    {
        throw IoError("cannot open light file", path);
    }
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e)
    {
        throw IoError(std::string("invalid JSON (") + e.what() + ")", path);
    }
    return lights_from_json(j);
}

inline nlohmann::json report_to_json(const CalibrationReport& report)
{
    nlohmann::json j;
    j["rms_residual"] = report.rms_residual;
    j["residual_count"] = report.residual_count;
    j["iterations"] = nlohmann::json::array();
    for (const auto& it : report.iterations)
    {
        j["iterations"].push_back({{"outer", it.outer},
                                   {"inner", it.inner},
                                   {"objective", std::isfinite(it.objective) ? nlohmann::json(it.objective)
                                                                             : nlohmann::json(nullptr)},
                                   {"lambda", it.lambda},
                                   {"accepted", it.accepted}});
    }
    return j;
}

} // namespace io
} // namespace nearps

#endif // NEARPS_CALIB_CALIBRATION_HPP
