/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/synth/dataset.hpp
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

#ifndef NEARPS_SYNTH_DATASET_HPP
#define NEARPS_SYNTH_DATASET_HPP

#include "nearps/calib/calibration.hpp"
#include "nearps/core/face_model.hpp"
#include "nearps/integrate/heightfield.hpp"
#include "nearps/io/obj.hpp"
#include "nearps/io/scene_json.hpp"
#include "nearps/render/render.hpp"

#include <Eigen/QR>

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace nearps {

/// Parameters of one synthetic record. Coefficients are drawn as N(0, std^2) in units of the basis scale.
struct SampleSpec
{
    std::uint64_t seed = 0;
    int n_lights = 3;
    double id_std = 1.0;
    double exp_std = 1.0;
    double albedo_std = 1.0;

    double distance = 650.0;          ///< mm from the camera to the model origin
    double yaw_range = 0.15;          ///< rad, uniform in [-range, range]
    double pitch_range = 0.1;         ///< rad
    double roll_range = 0.05;         ///< rad
    double translation_range = 10.0;  ///< mm per axis

    double light_distance = 600.0;    ///< mm from the face centre
    double light_jitter = 0.1;        ///< relative jitter of light distance and direction components
    double illumination = 3.6e5;      ///< beta
    double illumination_jitter = 0.1; ///< relative

    int image_size = 128;
    double focal_factor = 2.66; ///< focal length in pixels per pixel of image width

    double detail_amplitude = 0.6;  ///< RMS of the procedural relief, mm
    double detail_wavelength = 24.0; ///< mm
    int detail_waves = 8;
    double texture_noise = 0.0; ///< relative RMS of procedural albedo modulation

    int proxy_k_id = 10;
    int proxy_k_exp = 5;
    double proxy_noise_deg = 0.0;

    bool cast_shadows = false;
};

inline void validate(const SampleSpec& s)
{
    if (s.n_lights < 1)
    {
        throw InvalidInput("a record needs at least one light");
    }
    for (double v : {s.id_std, s.exp_std, s.albedo_std, s.yaw_range, s.pitch_range, s.roll_range,
                     s.translation_range, s.light_jitter, s.illumination_jitter, s.detail_amplitude, s.texture_noise,
                     s.proxy_noise_deg})
    {
        if (!(v >= 0.0) || !std::isfinite(v))
        {
            throw InvalidInput("sample deviations and ranges must be finite and non-negative");
        }
    }
    if (!(s.distance > 0.0) || !(s.light_distance > 0.0) || !(s.illumination > 0.0) || !(s.focal_factor > 0.0) ||
        !(s.detail_wavelength > 0.0))
    {
        throw InvalidInput("sample distances, focal factor, illumination and wavelength must be positive");
    }
    if (s.image_size < 8 || s.detail_waves < 0 || s.proxy_k_id < 0 || s.proxy_k_exp < 0 ||
        s.proxy_k_id > kIdentityCoefficients || s.proxy_k_exp > kExpressionCoefficients)
    {
        throw InvalidInput("sample image size, wave count or proxy rank out of range");
    }
    if (s.light_jitter >= 1.0 || s.illumination_jitter >= 1.0)
    {
        throw InvalidInput("relative light jitter must be below 1");
    }
}

inline nlohmann::json spec_to_json(const SampleSpec& s)
{
    return {{"seed", s.seed},
            {"n_lights", s.n_lights},
            {"id_std", s.id_std},
            {"exp_std", s.exp_std},
            {"albedo_std", s.albedo_std},
            {"distance", s.distance},
            {"yaw_range", s.yaw_range},
            {"pitch_range", s.pitch_range},
            {"roll_range", s.roll_range},
            {"translation_range", s.translation_range},
            {"light_distance", s.light_distance},
            {"light_jitter", s.light_jitter},
            {"illumination", s.illumination},
            {"illumination_jitter", s.illumination_jitter},
            {"image_size", s.image_size},
            {"focal_factor", s.focal_factor},
            {"detail_amplitude", s.detail_amplitude},
            {"detail_wavelength", s.detail_wavelength},
            {"detail_waves", s.detail_waves},
            {"texture_noise", s.texture_noise},
            {"proxy_k_id", s.proxy_k_id},
            {"proxy_k_exp", s.proxy_k_exp},
            {"proxy_noise_deg", s.proxy_noise_deg},
            {"cast_shadows", s.cast_shadows}};
}

/// Missing fields keep their defaults; unknown fields are rejected.
inline SampleSpec spec_from_json(const nlohmann::json& j, SampleSpec s = {})
{
    if (!j.is_object())
    {
        throw InvalidInput("sample spec must be a JSON object");
    }
    const nlohmann::json known = spec_to_json(s);
    for (auto it = j.begin(); it != j.end(); ++it)
    {
        if (!known.contains(it.key()))
        {
            throw InvalidInput("unknown sample spec field: " + it.key());
        }
    }
    try
    {
        s.seed = j.value("seed", s.seed);
        s.n_lights = j.value("n_lights", s.n_lights);
        s.id_std = j.value("id_std", s.id_std);
        s.exp_std = j.value("exp_std", s.exp_std);
        s.albedo_std = j.value("albedo_std", s.albedo_std);
        s.distance = j.value("distance", s.distance);
        s.yaw_range = j.value("yaw_range", s.yaw_range);
        s.pitch_range = j.value("pitch_range", s.pitch_range);
        s.roll_range = j.value("roll_range", s.roll_range);
        s.translation_range = j.value("translation_range", s.translation_range);
        s.light_distance = j.value("light_distance", s.light_distance);
        s.light_jitter = j.value("light_jitter", s.light_jitter);
        s.illumination = j.value("illumination", s.illumination);
        s.illumination_jitter = j.value("illumination_jitter", s.illumination_jitter);
        s.image_size = j.value("image_size", s.image_size);
        s.focal_factor = j.value("focal_factor", s.focal_factor);
        s.detail_amplitude = j.value("detail_amplitude", s.detail_amplitude);
        s.detail_wavelength = j.value("detail_wavelength", s.detail_wavelength);
        s.detail_waves = j.value("detail_waves", s.detail_waves);
        s.texture_noise = j.value("texture_noise", s.texture_noise);
        s.proxy_k_id = j.value("proxy_k_id", s.proxy_k_id);
        s.proxy_k_exp = j.value("proxy_k_exp", s.proxy_k_exp);
        s.proxy_noise_deg = j.value("proxy_noise_deg", s.proxy_noise_deg);
        s.cast_shadows = j.value("cast_shadows", s.cast_shadows);
    } catch (const nlohmann::json::exception& e)
    {
        throw InvalidInput(std::string("malformed sample spec: ") + e.what());
    }
    validate(s);
    return s;
}

inline std::string spec_hash(const SampleSpec& s)
{
    const std::string text = spec_to_json(s).dump();
    return io::hex64(io::fnv1a(text.data(), text.size()));
}

/// Hash of every array of a model; identifies the bytes a corpus was generated from.
inline std::string model_hash(const LinearFaceModel& model)
{
    std::uint64_t h = io::fnv1a(nullptr, 0);
    auto mix = [&h](const double* p, Eigen::Index n) {
        h = io::fnv1a(p, static_cast<std::size_t>(n) * sizeof(double), h);
    };
    mix(model.mean_shape.data(), model.mean_shape.size());
    mix(model.mean_albedo.data(), model.mean_albedo.size());
    mix(model.basis_id.data(), model.basis_id.size());
    mix(model.basis_exp.data(), model.basis_exp.size());
    mix(model.basis_albedo.data(), model.basis_albedo.size());
    h = io::fnv1a(model.triangles.data(), model.triangles.size() * sizeof(Triangle), h);
    return io::hex64(h);
}

/// Everything drawn at random for one record.
struct SampledParameters
{
    Eigen::VectorXd alpha_id;
    Eigen::VectorXd alpha_exp;
    Eigen::VectorXd alpha_albedo;
    Pose pose;
    std::vector<PointLight> lights;
    std::uint64_t detail_seed = 0;
    int attempt = 0;
};

struct DatasetRecord
{
    SampleSpec spec;
    std::string spec_hash;
    SampledParameters parameters;
    CameraIntrinsics cam;
    Pose pose;
    std::vector<PointLight> lights;
    std::vector<RadianceImage> images; ///< one per light
    FaceMesh gt_mesh;                  ///< model space
    NormalMap gt_normals;              ///< camera space
    HeightField gt_depth;
    FaceMesh proxy_mesh; ///< model space, same topology as gt_mesh
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Base light directions: front (slightly raised), left, right, then a ring for any further lights.
inline Vec3 base_light_direction(int k, int n)
{
    const double deg = std::numbers::pi / 180.0;
    switch (k)
    {
    case 0:
        return Vec3(0.0, -0.8, -1.0).normalized();
    case 1:
        return Vec3(-std::sin(40 * deg), 0.25, -std::cos(40 * deg)).normalized();
    case 2:
        return Vec3(std::sin(40 * deg), 0.25, -std::cos(40 * deg)).normalized();
    default: {
        const double phi = 2.0 * std::numbers::pi * (k - 3) / std::max(1, n - 3) + 0.25 * std::numbers::pi;
        const double tilt = 35 * deg;
        return Vec3(std::sin(tilt) * std::cos(phi), std::sin(tilt) * std::sin(phi), -std::cos(tilt));
    }
    }
}

inline CameraIntrinsics record_camera(const SampleSpec& s)
{
    const double f = s.focal_factor * s.image_size;
    const double c = (s.image_size - 1) / 2.0;
    return CameraIntrinsics{f, f, c, c, s.image_size, s.image_size};
}

/// Sum of plane waves over model-space (x, y) with RMS `amplitude`.
class WaveField
{
public:
    WaveField(std::uint64_t seed, int waves, double amplitude, double wavelength)
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double a = waves > 0 ? amplitude * std::sqrt(2.0 / waves) : 0.0;
        for (int k = 0; k < waves; ++k)
        {
            const double theta = 2.0 * std::numbers::pi * unit(rng);
            const double lambda = wavelength * std::pow(2.0, 0.6 * unit(rng) - 0.3);
            const double phase = 2.0 * std::numbers::pi * unit(rng);
            terms_.push_back({Vec2(std::cos(theta), std::sin(theta)) * (2.0 * std::numbers::pi / lambda), phase, a});
        }
    }

    double operator()(double x, double y) const
    {
        double h = 0.0;
        for (const auto& t : terms_)
        {
            h += t.amplitude * std::sin(t.k.x() * x + t.k.y() * y + t.phase);
        }
        return h;
    }

private:
    struct Term
    {
        Vec2 k;
        double phase;
        double amplitude;
    };
    std::vector<Term> terms_;
};

inline bool in_front_of_camera(const FaceMesh& mesh, const Pose& pose)
{
    const FaceMesh cm = posed(mesh, pose);
    return std::all_of(cm.vertices.begin(), cm.vertices.end(), [](const Vec3& v) { return v.z() > kNearPlane; });
}

} // namespace detail

/**
 * Coefficients, pose and lights for attempt `attempt` of a spec. Every draw
 * comes from one generator seeded by (seed, attempt), in a fixed order.
 */
inline SampledParameters sample_parameters(const LinearFaceModel& model, const SampleSpec& spec, int attempt = 0)
{
    validate(spec);
    std::mt19937_64 rng(detail::splitmix64(spec.seed ^ detail::splitmix64(static_cast<std::uint64_t>(attempt))));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    SampledParameters p;
    p.attempt = attempt;
    p.alpha_id.resize(kIdentityCoefficients);
    p.alpha_exp.resize(kExpressionCoefficients);
    p.alpha_albedo.resize(kAlbedoCoefficients);
    for (Eigen::Index i = 0; i < p.alpha_id.size(); ++i)
    {
        p.alpha_id[i] = spec.id_std * normal(rng);
    }
    for (Eigen::Index i = 0; i < p.alpha_exp.size(); ++i)
    {
        p.alpha_exp[i] = spec.exp_std * normal(rng);
    }
    for (Eigen::Index i = 0; i < p.alpha_albedo.size(); ++i)
    {
        p.alpha_albedo[i] = spec.albedo_std * normal(rng);
    }
    p.pose.yaw = spec.yaw_range * sym(rng);
    p.pose.pitch = spec.pitch_range * sym(rng);
    p.pose.roll = spec.roll_range * sym(rng);
    p.pose.translation = Vec3(spec.translation_range * sym(rng), spec.translation_range * sym(rng),
                              spec.distance + spec.translation_range * sym(rng));

    const FaceMesh shape = synthesize_face(model, p.alpha_id, p.alpha_exp, Eigen::VectorXd::Zero(kAlbedoCoefficients));
    const Vec3 center = vertex_centroid(posed(shape, p.pose));
    for (int k = 0; k < spec.n_lights; ++k)
    {
        Vec3 dir = detail::base_light_direction(k, spec.n_lights);
        for (int c = 0; c < 3; ++c)
        {
            dir[c] += spec.light_jitter * sym(rng);
        }
        const double dist = spec.light_distance * (1.0 + spec.light_jitter * sym(rng));
        const double beta = spec.illumination * (1.0 + spec.illumination_jitter * sym(rng));
        p.lights.push_back({center + dist * dir.normalized(), beta});
    }
    p.detail_seed = rng();
    return p;
}

/// Truth mesh: model face displaced along its vertex normals by the procedural relief, optional albedo texture.
inline FaceMesh detailed_face(const LinearFaceModel& model, const SampledParameters& p, const SampleSpec& spec)
{
    FaceMesh mesh = synthesize_face(model, p.alpha_id, p.alpha_exp, p.alpha_albedo);
    if (spec.detail_amplitude > 0.0 && spec.detail_waves > 0)
    {
        const detail::WaveField relief(p.detail_seed, spec.detail_waves, spec.detail_amplitude,
                                       spec.detail_wavelength);
        const std::vector<Vec3> normals = vertex_normals(mesh);
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
        {
            mesh.vertices[v] += relief(mesh.vertices[v].x(), mesh.vertices[v].y()) * normals[v];
        }
    }
    if (spec.texture_noise > 0.0)
    {
        const detail::WaveField texture(detail::splitmix64(p.detail_seed), 12, spec.texture_noise,
                                        0.4 * spec.detail_wavelength);
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
        {
            mesh.albedo[v] *= std::max(0.0, 1.0 + texture(mesh.vertices[v].x(), mesh.vertices[v].y()));
        }
    }
    for (auto& a : mesh.albedo)
    {
        a = a.cwiseMax(0.0).cwiseMin(1.0);
    }
    return mesh;
}

/**
 * Coarse proxy of a truth mesh with the model topology: the truth minus the
 * mean is projected orthogonally onto the first k_id identity and k_exp
 * expression columns, then every vertex moves along its normal by zero-mean
 * Gaussian noise whose deviation is tan(noise_deg) times the mean edge length.
 * Albedo is the model mean.
 */
inline FaceMesh make_proxy(const FaceMesh& truth, const LinearFaceModel& model, int k_id, int k_exp,
                           double noise_deg, std::uint64_t noise_seed = 0)
{
    validate(model);
    if (truth.vertices.size() != static_cast<std::size_t>(model.num_vertices()) ||
        truth.triangles != model.triangles)
    {
        throw InvalidInput("proxy construction needs a truth mesh with the model topology");
    }
    if (k_id < 0 || k_exp < 0 || k_id > model.basis_id.cols() || k_exp > model.basis_exp.cols())
    {
        throw InvalidInput("proxy rank outside the model basis");
    }
    if (!(noise_deg >= 0.0 && noise_deg < 90.0))
    {
        throw InvalidInput("proxy noise must lie in [0, 90) degrees");
    }
    const Eigen::VectorXd residual = to_interleaved(truth.vertices) - model.mean_shape;
    Eigen::VectorXd shape = model.mean_shape;
    if (k_id + k_exp > 0)
    {
        // Unit columns keep the projection well conditioned when singular values decay steeply.
        Eigen::MatrixXd basis(model.mean_shape.size(), k_id + k_exp);
        basis << model.basis_id.leftCols(k_id), model.basis_exp.leftCols(k_exp);
        std::vector<Eigen::Index> keep;
        for (Eigen::Index c = 0; c < basis.cols(); ++c)
        {
            const double norm = basis.col(c).norm();
            if (norm > 0.0)
            {
                basis.col(c) /= norm;
                keep.push_back(c);
            }
        }
        if (!keep.empty())
        {
            Eigen::MatrixXd kept(basis.rows(), static_cast<Eigen::Index>(keep.size()));
            for (std::size_t k = 0; k < keep.size(); ++k)
            {
                kept.col(static_cast<Eigen::Index>(k)) = basis.col(keep[k]);
            }
            const Eigen::HouseholderQR<Eigen::MatrixXd> qr(kept);
            shape += kept * qr.solve(residual);
        }
    }
    FaceMesh proxy;
    proxy.vertices = to_points(shape);
    proxy.triangles = model.triangles;
    proxy.albedo = to_points(model.mean_albedo);
    for (auto& a : proxy.albedo)
    {
        a = a.cwiseMax(0.0).cwiseMin(1.0);
    }
    if (noise_deg > 0.0)
    {
        const double sigma = std::tan(noise_deg * std::numbers::pi / 180.0) * mean_edge_length(proxy);
        const std::vector<Vec3> normals = vertex_normals(proxy);
        std::mt19937_64 rng(noise_seed);
        std::normal_distribution<double> normal(0.0, sigma);
        for (std::size_t v = 0; v < proxy.vertices.size(); ++v)
        {
            proxy.vertices[v] += normal(rng) * normals[v];
        }
    }
    return proxy;
}

/**
 * One synthetic record, a deterministic function of the model and the spec.
 * A face that reaches behind the camera is resampled with the next attempt
 * index, at most ten times.
 */
inline DatasetRecord sample_record(const LinearFaceModel& model, const SampleSpec& spec)
{
    validate(model);
    validate(spec);
    DatasetRecord r;
    r.spec = spec;
    r.spec_hash = spec_hash(spec);
    r.cam = detail::record_camera(spec);
    constexpr int max_attempts = 10;
    for (int attempt = 0;; ++attempt)
    {
        if (attempt == max_attempts)
        {
            throw BehindCamera("sampled face reaches behind the camera in every attempt");
        }
        r.parameters = sample_parameters(model, spec, attempt);
        r.gt_mesh = detailed_face(model, r.parameters, spec);
        if (detail::in_front_of_camera(r.gt_mesh, r.parameters.pose))
        {
            break;
        }
    }
    r.pose = r.parameters.pose;
    r.lights = r.parameters.lights;
    RenderOptions options;
    options.cast_shadows = spec.cast_shadows;
    for (const auto& light : r.lights)
    {
        r.images.push_back(render(r.gt_mesh, r.pose, r.cam, light, options).image);
    }
    std::tie(r.gt_depth, r.gt_normals) = rasterize_surface(r.gt_mesh, r.pose, r.cam, true);
    r.proxy_mesh = make_proxy(r.gt_mesh, model, spec.proxy_k_id, spec.proxy_k_exp, spec.proxy_noise_deg,
                              detail::splitmix64(r.parameters.detail_seed + 1));
    return r;
}

/// Per-light image file names of a record.
inline std::string image_file_name(int k)
{
    return "img_" + std::to_string(k) + ".pfm";
}

inline std::vector<std::string> record_file_names(int n_lights)
{
    std::vector<std::string> files;
    for (int k = 0; k < n_lights; ++k)
    {
        files.push_back(image_file_name(k));
    }
    for (const char* f : {"mask.pfm", "gt_mesh.obj", "proxy_mesh.obj", "gt_normals.pfm", "gt_depth.pfm", "meta.json"})
    {
        files.emplace_back(f);
    }
    return files;
}

inline nlohmann::json record_meta(const DatasetRecord& r, const std::string& record_id)
{
    auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    return {{"schema_version", 1},
            {"record_id", record_id},
            {"seed", r.spec.seed},
            {"spec_hash", r.spec_hash},
            {"spec", spec_to_json(r.spec)},
            {"attempt", r.parameters.attempt},
            {"camera", io::camera_to_json(r.cam)},
            {"pose", io::pose_to_json(r.pose)},
            {"lights", io::lights_to_json(r.lights)},
            {"coefficients",
             {{"id", vec(r.parameters.alpha_id)},
              {"exp", vec(r.parameters.alpha_exp)},
              {"albedo", vec(r.parameters.alpha_albedo)}}}};
}

/// Writes every file of a record into `dir` (created if needed); meta.json is written last.
inline void write_record(const DatasetRecord& r, const std::string& dir, const std::string& record_id)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
    {
        throw IoError("cannot create record directory", dir);
    }
    const fs::path d(dir);
    for (std::size_t k = 0; k < r.images.size(); ++k)
    {
        io::write_radiance((d / image_file_name(static_cast<int>(k))).string(), r.images[k]);
    }
    io::write_pfm((d / "mask.pfm").string(),
                  io::mask_to_float_image(r.cam.width, r.cam.height, r.images.front().mask));
    io::write_obj((d / "gt_mesh.obj").string(), r.gt_mesh);
    io::write_obj((d / "proxy_mesh.obj").string(), r.proxy_mesh);
    io::write_normal_map((d / "gt_normals.pfm").string(), r.gt_normals);
    io::write_heightfield((d / "gt_depth.pfm").string(), r.gt_depth);
    io::write_json((d / "meta.json").string(), record_meta(r, record_id));
}

/**
 * Reads a record directory back. Sampled coefficients and the spec come from
 * meta.json; images, meshes and ground truth from their files.
 */
inline DatasetRecord load_record(const std::string& dir)
{
    namespace fs = std::filesystem;
    const fs::path d(dir);
    if (!fs::is_directory(d))
    {
        throw IoError("record directory does not exist", dir);
    }
    const nlohmann::json meta = io::read_json((d / "meta.json").string());
    DatasetRecord r;
    try
    {
        r.spec = spec_from_json(meta.at("spec"));
        r.spec_hash = meta.at("spec_hash").get<std::string>();
        r.cam = io::camera_from_json(meta.at("camera"));
        r.pose = io::pose_from_json(meta.at("pose"));
        r.lights = io::lights_from_json(meta.at("lights"));
        r.parameters.attempt = meta.at("attempt").get<int>();
        const auto& c = meta.at("coefficients");
        auto vec = [](const nlohmann::json& a) {
            const auto v = a.get<std::vector<double>>();
            return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        };
        r.parameters.alpha_id = vec(c.at("id"));
        r.parameters.alpha_exp = vec(c.at("exp"));
        r.parameters.alpha_albedo = vec(c.at("albedo"));
    } catch (const nlohmann::json::exception& e)
    {
        throw IoError(std::string("malformed record metadata (") + e.what() + ")", (d / "meta.json").string());
    }
    r.parameters.pose = r.pose;
    r.parameters.lights = r.lights;
    const std::string mask = (d / "mask.pfm").string();
    for (std::size_t k = 0; k < r.lights.size(); ++k)
    {
        r.images.push_back(io::read_radiance((d / image_file_name(static_cast<int>(k))).string(), mask));
    }
    r.gt_mesh = io::read_obj((d / "gt_mesh.obj").string());
    r.proxy_mesh = io::read_obj((d / "proxy_mesh.obj").string());
    r.gt_normals = io::read_normal_map((d / "gt_normals.pfm").string());
    r.gt_depth = io::read_heightfield((d / "gt_depth.pfm").string(), r.cam);
    return r;
}

inline std::string record_id(std::size_t index)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "rec_%04zu", index);
    return buf;
}

struct CorpusResult
{
    nlohmann::json manifest;
    std::string manifest_path;
    std::size_t generated = 0; ///< records written by this call
    std::size_t skipped = 0;   ///< records already complete
};

namespace detail {

inline nlohmann::json manifest_entry(const SampleSpec& spec, const std::string& id)
{
    return {{"id", id},
            {"seed", spec.seed},
            {"spec_hash", spec_hash(spec)},
            {"path", id},
            {"files", record_file_names(spec.n_lights)}};
}

inline bool record_complete(const nlohmann::json& previous, const nlohmann::json& entry,
                            const std::filesystem::path& out)
{
    if (!previous.is_object() || !previous.contains("records"))
    {
        return false;
    }
    for (const auto& e : previous["records"])
    {
        if (e == entry)
        {
            for (const auto& f : entry["files"])
            {
                if (!std::filesystem::is_regular_file(out / entry["path"].get<std::string>() / f.get<std::string>()))
                {
                    return false;
                }
            }
            return true;
        }
    }
    return false;
}

} // namespace detail

/**
 * Writes one directory per spec plus `manifest.json`. Records already listed
 * in an existing manifest for the same model, with identical spec and all
 * files present, are skipped, so an interrupted run resumes and a complete
 * corpus is left untouched. Records are generated on up to `jobs` threads;
 * every output depends only on the model and its spec.
 */
inline CorpusResult generate_corpus(const LinearFaceModel& model, const std::vector<SampleSpec>& specs,
                                    const std::string& out_dir, int jobs = 1)
{
    namespace fs = std::filesystem;
    validate(model);
    for (const auto& s : specs)
    {
        validate(s);
    }
    const fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out))
    {
        throw IoError("cannot create corpus directory", out_dir);
    }
    const std::string manifest_path = (out / "manifest.json").string();
    const std::string mhash = model_hash(model);
    nlohmann::json previous;
    if (fs::exists(manifest_path))
    {
        previous = io::read_json(manifest_path);
        if (!previous.is_object() || previous.value("model_hash", std::string()) != mhash)
        {
            previous = nlohmann::json();
        }
    }

    std::vector<nlohmann::json> entries;
    std::vector<std::uint8_t> done(specs.size(), 0);
    CorpusResult result;
    result.manifest_path = manifest_path;
    for (std::size_t i = 0; i < specs.size(); ++i)
    {
        entries.push_back(detail::manifest_entry(specs[i], record_id(i)));
        if (detail::record_complete(previous, entries.back(), out))
        {
            done[i] = 1;
            ++result.skipped;
        }
    }

    std::mutex mutex;
    auto manifest_of = [&]() {
        nlohmann::json records = nlohmann::json::array();
        for (std::size_t i = 0; i < specs.size(); ++i)
        {
            if (done[i])
            {
                records.push_back(entries[i]);
            }
        }
        return nlohmann::json{{"schema_version", 1}, {"model_hash", mhash}, {"records", records}};
    };
    auto write_manifest_if_changed = [&](const nlohmann::json& m) {
        const std::string text = io::json_text(m);
        std::ifstream is(manifest_path, std::ios::binary);
        const std::string existing((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        if (existing != text)
        {
            const std::string tmp = manifest_path + ".tmp";
            io::write_text(tmp, text);
            fs::rename(tmp, manifest_path, ec);
            if (ec)
            {
                throw IoError("cannot replace manifest", manifest_path);
            }
        }
    };

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    auto worker = [&]() {
        for (;;)
        {
            const std::size_t i = next.fetch_add(1);
            if (i >= specs.size())
            {
                return;
            }
            {
                const std::lock_guard<std::mutex> lock(mutex);
                if (failure || done[i])
                {
                    continue;
                }
            }
            try
            {
                const DatasetRecord r = sample_record(model, specs[i]);
                write_record(r, (out / record_id(i)).string(), record_id(i));
                const std::lock_guard<std::mutex> lock(mutex);
                done[i] = 1;
                ++result.generated;
                write_manifest_if_changed(manifest_of());
            } catch (...)
            {
                const std::lock_guard<std::mutex> lock(mutex);
                if (!failure)
                {
                    failure = std::current_exception();
                }
            }
        }
    };
    const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(1, specs.size()))));
    if (threads == 1)
    {
        worker();
    } else
    {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
        {
            pool.emplace_back(worker);
        }
        for (auto& t : pool)
        {
            t.join();
        }
    }
    if (failure)
    {
        std::rethrow_exception(failure);
    }
    result.manifest = manifest_of();
    write_manifest_if_changed(result.manifest);
    return result;
}

} // namespace nearps

#endif // NEARPS_SYNTH_DATASET_HPP
