/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: include/nearps/pipeline/pipeline.hpp
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

#ifndef NEARPS_PIPELINE_PIPELINE_HPP
#define NEARPS_PIPELINE_PIPELINE_HPP

#include "nearps/calib/calibration.hpp"
#include "nearps/eval/alignment.hpp"
#include "nearps/eval/metrics.hpp"
#include "nearps/integrate/integration.hpp"
#include "nearps/io/container.hpp"
#include "nearps/refine/refinement.hpp"
#include "nearps/synth/dataset.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace nearps::pipeline {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

/// Everything a pipeline run reads from its JSON configuration.
struct PipelineConfig
{
    std::string model_path;  ///< linear face model container (generate)
    std::string corpus_dir;  ///< corpus root holding manifest.json
    std::string output_dir;  ///< reconstruction root; empty means inside each record directory
    std::uint64_t base_seed = 0;
    std::size_t count = 0;   ///< records to generate; record i uses seed base_seed + i
    SampleSpec spec;         ///< template for every generated record (its seed is replaced)
    RefinementConfig refinement;
    IntegrationSettings integration;
    CalibrationSettings calibration;
    std::string light_subset = "all";
    bool lights_known = false;
};

inline void validate(const PipelineConfig& c)
{
    validate(c.refinement);
    validate(c.spec);
    for (double v : {c.integration.w1, c.integration.w2, c.integration.relative_tolerance, c.integration.cg_tolerance})
    {
        if (!(v >= 0.0) || !std::isfinite(v))
        {
            throw InvalidInput("integration weights and tolerances must be finite and non-negative");
        }
    }
    if (c.integration.max_iterations < 1 || c.integration.max_halvings < 0)
    {
        throw InvalidInput("integration iteration limits must be positive");
    }
    if (c.calibration.outer_iterations < 1 || c.calibration.max_inner_iterations < 1 ||
        !(c.calibration.initial_lambda > 0.0) || !(c.calibration.relative_tolerance >= 0.0))
    {
        throw InvalidInput("calibration settings out of range");
    }
}

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out)
{
    if (j.contains(key))
    {
        out = j.at(key).get<T>();
    }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where)
{
    for (auto it = j.begin(); it != j.end(); ++it)
    {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
        {
            throw InvalidInput("unknown field '" + it.key() + "' in " + where);
        }
    }
}

inline std::string resolve(const std::string& path, const std::filesystem::path& base)
{
    if (path.empty())
    {
        return path;
    }
    const std::filesystem::path p(path);
    return p.is_absolute() ? p.string() : (base / p).lexically_normal().string();
}

} // namespace detail

/// Parses a configuration; relative paths are resolved against `base_dir`.
inline PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".")
{
    if (!j.is_object())
    {
        throw InvalidInput("configuration must be a JSON object");
    }
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
        j["schema_version"].get<int>() != kConfigSchemaVersion)
    {
        throw InvalidInput("configuration schema_version must be " + std::to_string(kConfigSchemaVersion));
    }
    detail::reject_unknown(j,
                           {"schema_version", "model", "corpus", "output", "generate", "refinement", "integration",
                            "calibration", "lights", "lights_known"},
                           "configuration");
    PipelineConfig c;
    try
    {
        detail::read_field(j, "model", c.model_path);
        detail::read_field(j, "corpus", c.corpus_dir);
        detail::read_field(j, "output", c.output_dir);
        detail::read_field(j, "lights", c.light_subset);
        detail::read_field(j, "lights_known", c.lights_known);
        if (j.contains("generate"))
        {
            const auto& g = j["generate"];
            detail::reject_unknown(g, {"count", "base_seed", "spec"}, "generate");
            detail::read_field(g, "count", c.count);
            detail::read_field(g, "base_seed", c.base_seed);
            if (g.contains("spec"))
            {
                c.spec = spec_from_json(g["spec"]);
            }
        }
        if (j.contains("refinement"))
        {
            const auto& r = j["refinement"];
            detail::reject_unknown(r, {"mu1", "mu2", "max_outer_iters", "convergence_tol"}, "refinement");
            detail::read_field(r, "mu1", c.refinement.mu1);
            detail::read_field(r, "mu2", c.refinement.mu2);
            detail::read_field(r, "max_outer_iters", c.refinement.max_outer_iters);
            detail::read_field(r, "convergence_tol", c.refinement.convergence_tol);
        }
        if (j.contains("integration"))
        {
            const auto& s = j["integration"];
            detail::reject_unknown(s, {"w1", "w2", "max_iterations", "relative_tolerance", "max_halvings", "cg_tolerance"},
                                   "integration");
            detail::read_field(s, "w1", c.integration.w1);
            detail::read_field(s, "w2", c.integration.w2);
            detail::read_field(s, "max_iterations", c.integration.max_iterations);
            detail::read_field(s, "relative_tolerance", c.integration.relative_tolerance);
            detail::read_field(s, "max_halvings", c.integration.max_halvings);
            detail::read_field(s, "cg_tolerance", c.integration.cg_tolerance);
        }
        if (j.contains("calibration"))
        {
            const auto& s = j["calibration"];
            detail::reject_unknown(s,
                                   {"outer_iterations", "max_inner_iterations", "initial_lambda", "relative_tolerance",
                                    "min_observed_triangles", "min_front_fraction"},
                                   "calibration");
            detail::read_field(s, "outer_iterations", c.calibration.outer_iterations);
            detail::read_field(s, "max_inner_iterations", c.calibration.max_inner_iterations);
            detail::read_field(s, "initial_lambda", c.calibration.initial_lambda);
            detail::read_field(s, "relative_tolerance", c.calibration.relative_tolerance);
            detail::read_field(s, "min_observed_triangles", c.calibration.min_observed_triangles);
            detail::read_field(s, "min_front_fraction", c.calibration.min_front_fraction);
        }
    } catch (const nlohmann::json::exception& e)
    {
        throw InvalidInput(std::string("malformed configuration: ") + e.what());
    }
    c.model_path = detail::resolve(c.model_path, base_dir);
    c.corpus_dir = detail::resolve(c.corpus_dir, base_dir);
    c.output_dir = detail::resolve(c.output_dir, base_dir);
    validate(c);
    return c;
}

inline PipelineConfig load_config(const std::string& path)
{
    if (!std::filesystem::is_regular_file(path))
    {
        throw IoError("configuration file does not exist", path);
    }
    return config_from_json(io::read_json(path), std::filesystem::path(path).parent_path());
}

namespace detail {

/// Indices named by a subset expression without range checks; empty for "all".
inline std::vector<int> subset_tokens(const std::string& name)
{
    std::vector<int> out;
    std::string item;
    const auto flush = [&] {
        const bool image = item.size() >= 2 && item[0] == 'S';
        const std::string digits = image ? item.substr(1) : item;
        std::size_t used = 0;
        int v = -1;
        try
        {
            v = std::stoi(digits, &used);
        } catch (const std::exception&)
        {
            used = 0;
        }
        if (digits.empty() || used != digits.size() || !std::isdigit(static_cast<unsigned char>(digits[0])) ||
            (image && v < 1))
        {
            throw InvalidInput("light subset must be all, or images S1, S2, ... joined by '+', or light indices "
                               "joined by ',': " +
                               name);
        }
        out.push_back(image ? v - 1 : v);
        item.clear();
    };
    for (char ch : name)
    {
        if (ch == '+' || ch == '&' || ch == ',')
        {
            flush();
        } else
        {
            item += ch;
        }
    }
    flush();
    return out;
}

} // namespace detail

/**
 * Light indices of a subset. Image Sk is light k - 1 (S1 front, S2 left,
 * S3 right); images combine with '+' or '&' ("S1+S3"), plain indices with ','
 * ("0,2"), and "all" selects every light of the record.
 */
inline std::vector<int> parse_light_subset(const std::string& name, int n_lights)
{
    std::vector<int> out;
    if (name == "all")
    {
        for (int i = 0; i < n_lights; ++i)
        {
            out.push_back(i);
        }
    } else
    {
        out = detail::subset_tokens(name);
    }
    if (out.empty())
    {
        throw InvalidInput("light subset is empty: " + name);
    }
    for (std::size_t k = 0; k < out.size(); ++k)
    {
        if (out[k] < 0 || out[k] >= n_lights)
        {
            throw InvalidInput("light subset " + name + " references light " + std::to_string(out[k]) +
                               " but the record has " + std::to_string(n_lights));
        }
        if (std::count(out.begin(), out.end(), out[k]) > 1)
        {
            throw InvalidInput("light subset lists a light twice: " + name);
        }
    }
    return out;
}

/// Directory-safe label of a subset: "all", or its images in the given order ("S1+S3" for "0,2").
inline std::string subset_label(const std::string& name)
{
    if (name == "all")
    {
        return name;
    }
    std::string label;
    for (int k : detail::subset_tokens(name))
    {
        label += (label.empty() ? "S" : "+S") + std::to_string(k + 1);
    }
    return label;
}

/// A failure inside a named pipeline stage; keeps the category of the original error.
class StageError : public Error
{
public:
    StageError(std::string stage, const std::string& what, int exit_code)
        : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)), exit_code_(exit_code)
    {
    }
    const std::string& stage() const noexcept { return stage_; }
    int exit_code() const noexcept { return exit_code_; }

private:
    std::string stage_;
    int exit_code_;
};

/// 2 for errors caused by the caller's input, 1 for internal or numerical failures.
inline int exit_code_for(const std::exception& e)
{
    if (const auto* s = dynamic_cast<const StageError*>(&e))
    {
        return s->exit_code();
    }
    if (dynamic_cast<const InvalidInput*>(&e) || dynamic_cast<const IoError*>(&e) ||
        dynamic_cast<const GaugeError*>(&e))
    {
        return 2;
    }
    return 1;
}

template <typename F>
auto run_stage(const std::string& stage, F&& f) -> decltype(f())
{
    try
    {
        return f();
    } catch (const StageError&)
    {
        throw;
    } catch (const std::exception& e)
    {
        throw StageError(stage, e.what(), exit_code_for(e));
    }
}

/// One JSON object per line; the text depends only on the values logged.
class JsonLog
{
public:
    void add(nlohmann::json entry) { lines_.push_back(std::move(entry)); }
    const std::vector<nlohmann::json>& lines() const { return lines_; }
    std::string text() const
    {
        std::string out;
        for (const auto& l : lines_)
        {
            out += l.dump() + "\n";
        }
        return out;
    }

private:
    std::vector<nlohmann::json> lines_;
};

inline std::filesystem::path record_dir(const PipelineConfig& c, const std::string& record_id)
{
    if (c.corpus_dir.empty())
    {
        throw InvalidInput("configuration has no corpus directory");
    }
    const std::filesystem::path dir = std::filesystem::path(c.corpus_dir) / record_id;
    if (record_id.empty() || record_id.find('/') != std::string::npos || !std::filesystem::is_directory(dir))
    {
        throw IoError("unknown record", dir.string());
    }
    return dir;
}

inline std::filesystem::path reconstruction_dir(const PipelineConfig& c, const std::string& record_id,
                                                const std::string& subset)
{
    const std::string leaf = "recon_" + subset_label(subset);
    if (!c.output_dir.empty())
    {
        return std::filesystem::path(c.output_dir) / record_id / leaf;
    }
    return std::filesystem::path(c.corpus_dir) / record_id / leaf;
}

/// Record ids listed in the corpus manifest, in order.
inline std::vector<std::string> manifest_records(const PipelineConfig& c)
{
    const std::string path = (std::filesystem::path(c.corpus_dir) / "manifest.json").string();
    const nlohmann::json m = io::read_json(path);
    std::vector<std::string> ids;
    try
    {
        for (const auto& e : m.at("records"))
        {
            ids.push_back(e.at("id").get<std::string>());
        }
    } catch (const nlohmann::json::exception& e)
    {
        throw IoError(std::string("malformed manifest (") + e.what() + ")", path);
    }
    return ids;
}

/// Nominal light rig of a record before jitter: the starting point for calibration.
inline std::vector<PointLight> nominal_lights(const DatasetRecord& r)
{
    const Vec3 center = vertex_centroid(posed(r.proxy_mesh, r.pose));
    std::vector<PointLight> lights;
    for (int k = 0; k < static_cast<int>(r.lights.size()); ++k)
    {
        lights.push_back(
            {center + r.spec.light_distance * nearps::detail::base_light_direction(k, static_cast<int>(r.lights.size())),
             r.spec.illumination});
    }
    return lights;
}

struct Reconstruction
{
    std::vector<int> subset;
    std::vector<PointLight> lights; ///< lights used by refinement, one per subset entry
    std::optional<CalibrationResult> calibration;
    RefinementResult refinement;
    NormalMap target;
    HeightField prior;
    IntegrationResult integration;
    NormalMap normals; ///< pixel normals of the integrated height field
    FaceMesh mesh;     ///< camera space
    JsonLog log;
};

/**
 * Full reconstruction of one record from a light subset: optional light
 * calibration, normal refinement, target-normal rasterisation, height-field
 * integration and meshing.
 */
inline Reconstruction reconstruct(const DatasetRecord& record, const std::string& subset_name,
                                  const PipelineConfig& config, bool lights_known)
{
    Reconstruction out;
    out.subset = parse_light_subset(subset_name, static_cast<int>(record.images.size()));
    std::vector<RadianceImage> images;
    std::vector<PointLight> truth;
    for (int k : out.subset)
    {
        images.push_back(record.images[k]);
        truth.push_back(record.lights[k]);
    }
    if (lights_known)
    {
        out.lights = truth;
    } else
    {
        out.calibration = run_stage("calibrate", [&] {
            const std::vector<PointLight> rig = nominal_lights(record);
            std::vector<PointLight> initial;
            for (int k : out.subset)
            {
                initial.push_back(rig[k]);
            }
            return calibrate_lights(CalibrationProblem{record.proxy_mesh, record.pose, record.cam, images, initial},
                                    config.calibration);
        });
        out.lights = out.calibration->lights;
        for (const auto& it : out.calibration->report.iterations)
        {
            out.log.add({{"stage", "calibrate"},
                         {"outer", it.outer},
                         {"inner", it.inner},
                         {"objective", std::isfinite(it.objective) ? nlohmann::json(it.objective) : nlohmann::json()},
                         {"lambda", it.lambda},
                         {"accepted", it.accepted}});
        }
    }
    out.refinement = run_stage("refine", [&] {
        return refine(record.proxy_mesh, record.pose, record.cam, images, out.lights, config.refinement);
    });
    for (const auto& e : out.refinement.log)
    {
        out.log.add({{"stage", "refine"}, {"iteration", e.iteration}, {"phase", e.phase}, {"objective", e.objective}});
    }
    out.target = run_stage("rasterize_target_normals", [&] {
        return rasterize_target_normals(out.refinement.state, record.proxy_mesh, record.pose, record.cam);
    });
    out.prior = run_stage("rasterize_proxy",
                          [&] { return rasterize_surface(record.proxy_mesh, record.pose, record.cam, true).first; });
    out.integration = run_stage("integrate", [&] { return integrate(out.target, out.prior, config.integration); });
    for (std::size_t k = 0; k < out.integration.objective_log.size(); ++k)
    {
        out.log.add({{"stage", "integrate"}, {"iteration", k}, {"objective", out.integration.objective_log[k]}});
    }
    out.normals = normal_map_from_heights(out.integration.heights);
    out.mesh = run_stage("heightfield_to_mesh", [&] { return heightfield_to_mesh(out.integration.heights); });
    return out;
}

inline std::vector<std::string> reconstruction_files()
{
    return {"lights.json", "refined_state.bin", "refined_normals.pfm", "depth.pfm", "normals.pfm", "mesh.obj",
            "log.jsonl"};
}

inline void write_reconstruction(const Reconstruction& r, const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
    {
        throw IoError("cannot create reconstruction directory", dir.string());
    }
    nlohmann::json lights = io::lights_to_json(r.lights);
    io::write_json((dir / "lights.json").string(),
                   {{"subset", r.subset}, {"calibrated", r.calibration.has_value()}, {"lights", lights}});
    io::save_refinement_state((dir / "refined_state.bin").string(), r.refinement.state);
    io::write_normal_map((dir / "refined_normals.pfm").string(), r.target);
    io::write_heightfield((dir / "depth.pfm").string(), r.integration.heights);
    io::write_normal_map((dir / "normals.pfm").string(), r.normals);
    io::write_obj((dir / "mesh.obj").string(), r.mesh);
    io::write_text((dir / "log.jsonl").string(), r.log.text());
}

/// Every report field; see the README for the schema.
inline nlohmann::json evaluation_report(const std::string& record_id, const std::string& subset, bool self_check,
                                        const ErrorReport& angular, double cosine, const ErrorReport& p2p,
                                        const std::optional<ErrorReport>& proxy_angular)
{
    nlohmann::json j{{"schema_version", kReportSchemaVersion},
                     {"record_id", record_id},
                     {"subset", subset},
                     {"self_check", self_check},
                     {"region", "fully_lit"},
                     {"angular_error", report_to_json(angular)},
                     {"cosine_error", cosine},
                     {"point_to_point", report_to_json(p2p)}};
    j["proxy_angular_error"] = proxy_angular ? report_to_json(*proxy_angular) : nlohmann::json();
    return j;
}

struct Evaluation
{
    nlohmann::json report;
    ErrorReport angular;
};

/**
 * Angular and cosine error of reconstructed pixel normals against the ground
 * truth over pixels lit in every record image, and aligned point-to-point
 * distance of the reconstructed mesh to the posed truth mesh. In self-check
 * mode the truth is compared with itself.
 */
inline Evaluation evaluate_reconstruction(const DatasetRecord& record, const std::string& record_id,
                                          const std::string& subset, const NormalMap& normals, const FaceMesh& mesh,
                                          bool self_check)
{
    const std::vector<std::uint8_t> lit = fully_lit_mask(record.images);
    const FaceMesh truth_mesh = posed(record.gt_mesh, record.pose);
    Evaluation ev;
    ev.angular = angular_error(normals, record.gt_normals, lit);
    const double cosine = cosine_normal_error(normals, record.gt_normals, lit);
    const ErrorReport p2p = point_to_point_error(mesh, truth_mesh);
    std::optional<ErrorReport> proxy;
    if (!self_check)
    {
        const HeightField z0 = rasterize_surface(record.proxy_mesh, record.pose, record.cam, true).first;
        proxy = angular_error(normal_map_from_heights(z0), record.gt_normals, lit);
    }
    ev.report = evaluation_report(record_id, subset, self_check, ev.angular, cosine, p2p, proxy);
    return ev;
}

/// Options shared by the subcommands.
struct CommandOptions
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    bool dry_run = false;
    std::optional<double> w1; ///< overrides of the configured weights
    std::optional<double> w2;
    std::optional<double> mu1;
    std::optional<double> mu2;
};

namespace detail {

inline PipelineConfig command_config(const CommandOptions& o)
{
    if (o.config_path.empty())
    {
        throw InvalidInput("--config is required");
    }
    PipelineConfig c = load_config(o.config_path);
    if (o.seed)
    {
        c.base_seed = *o.seed;
    }
    c.integration.w1 = o.w1.value_or(c.integration.w1);
    c.integration.w2 = o.w2.value_or(c.integration.w2);
    c.refinement.mu1 = o.mu1.value_or(c.refinement.mu1);
    c.refinement.mu2 = o.mu2.value_or(c.refinement.mu2);
    validate(c);
    return c;
}

inline void for_each_parallel(std::size_t n, int jobs, const std::function<void(std::size_t)>& f)
{
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mutex;
    auto worker = [&]() {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
        {
            try
            {
                f(i);
            } catch (...)
            {
                const std::lock_guard<std::mutex> lock(mutex);
                if (!failure)
                {
                    failure = std::current_exception();
                }
                return;
            }
        }
    };
    const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t)
    {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool)
    {
        t.join();
    }
    if (failure)
    {
        std::rethrow_exception(failure);
    }
}

} // namespace detail

/// Specs of the records a configuration generates.
inline std::vector<SampleSpec> planned_specs(const PipelineConfig& c)
{
    std::vector<SampleSpec> specs(c.count, c.spec);
    for (std::size_t i = 0; i < specs.size(); ++i)
    {
        specs[i].seed = c.base_seed + i;
    }
    return specs;
}

inline int cmd_generate(const CommandOptions& o, std::ostream& out)
{
    const PipelineConfig c = detail::command_config(o);
    if (c.count == 0)
    {
        throw InvalidInput("configuration generates no records (generate.count is 0)");
    }
    if (c.corpus_dir.empty())
    {
        throw InvalidInput("configuration has no corpus directory");
    }
    if (c.model_path.empty() || !std::filesystem::is_regular_file(c.model_path))
    {
        throw IoError("model file does not exist", c.model_path);
    }
    if (o.dry_run)
    {
        out << "planned records: " << c.count << " (seeds " << c.base_seed << ".." << c.base_seed + c.count - 1
            << ") into " << c.corpus_dir << "\n";
        return 0;
    }
    const LinearFaceModel model = run_stage("load_model", [&] { return io::load_model(c.model_path); });
    const CorpusResult r =
        run_stage("generate", [&] { return generate_corpus(model, planned_specs(c), c.corpus_dir, o.jobs); });
    out << "generated " << r.generated << ", skipped " << r.skipped << "\n" << r.manifest_path << "\n";
    return 0;
}

struct ReconstructOptions
{
    std::string record_id;
    bool all = false;
    std::optional<std::string> subset;
    std::optional<bool> lights_known;
};

inline int cmd_reconstruct(const CommandOptions& o, const ReconstructOptions& ro, std::ostream& out)
{
    const PipelineConfig c = detail::command_config(o);
    const std::string subset = ro.subset.value_or(c.light_subset);
    const bool known = ro.lights_known.value_or(c.lights_known);
    std::vector<std::string> ids;
    if (ro.all)
    {
        ids = manifest_records(c);
    } else
    {
        ids.push_back(ro.record_id);
    }
    for (const auto& id : ids)
    {
        record_dir(c, id);
    }
    if (o.dry_run)
    {
        out << "planned reconstructions: " << ids.size() << " (subset " << subset
            << (known ? ", lights known" : ", lights calibrated") << ")\n";
        return 0;
    }
    std::vector<std::string> lines(ids.size());
    detail::for_each_parallel(ids.size(), o.jobs, [&](std::size_t i) {
        const DatasetRecord record = run_stage("load_record", [&] { return load_record(record_dir(c, ids[i]).string()); });
        const Reconstruction r = reconstruct(record, subset, c, known);
        const auto dir = reconstruction_dir(c, ids[i], subset);
        run_stage("write_outputs", [&] {
            write_reconstruction(r, dir);
            return 0;
        });
        lines[i] = dir.string();
    });
    for (const auto& l : lines)
    {
        out << l << "\n";
    }
    return 0;
}

struct EvaluateOptions
{
    std::string record_id;
    bool all = false;
    bool self_check = false;
    std::optional<std::string> subset;
};

inline nlohmann::json evaluate_one(const PipelineConfig& c, const std::string& id, const std::string& subset,
                                   bool self_check)
{
    const DatasetRecord record = run_stage("load_record", [&] { return load_record(record_dir(c, id).string()); });
    const auto dir = reconstruction_dir(c, id, subset);
    NormalMap normals;
    FaceMesh mesh;
    if (self_check)
    {
        normals = record.gt_normals;
        mesh = posed(record.gt_mesh, record.pose);
    } else
    {
        for (const char* f : {"normals.pfm", "mesh.obj"})
        {
            if (!std::filesystem::is_regular_file(dir / f))
            {
                throw IoError("reconstruction output missing", (dir / f).string());
            }
        }
        normals = io::read_normal_map((dir / "normals.pfm").string());
        mesh = io::read_obj((dir / "mesh.obj").string());
    }
    const Evaluation ev = run_stage("evaluate", [&] {
        return evaluate_reconstruction(record, id, subset_label(subset), normals, mesh, self_check);
    });
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    const std::string stem = self_check ? "self_check" : "report";
    io::write_json((dir / (stem + ".json")).string(), ev.report);
    io::write_error_map((dir / (stem + "_angular_error.pfm")).string(), (dir / (stem + "_angular_error.png")).string(),
                        record.cam.width, record.cam.height, ev.angular.values, 20.0);
    return ev.report;
}

/// Mean over records of each per-record mean.
inline nlohmann::json summarize_reports(const std::vector<nlohmann::json>& reports, const std::string& subset)
{
    nlohmann::json rows = nlohmann::json::array();
    double angular = 0.0;
    double cosine = 0.0;
    double p2p = 0.0;
    for (const auto& r : reports)
    {
        rows.push_back({{"record_id", r["record_id"]},
                        {"angular_mean", r["angular_error"]["mean"]},
                        {"angular_median", r["angular_error"]["median"]},
                        {"cosine_error", r["cosine_error"]},
                        {"point_to_point_mean", r["point_to_point"]["mean"]}});
        angular += r["angular_error"]["mean"].get<double>();
        cosine += r["cosine_error"].get<double>();
        p2p += r["point_to_point"]["mean"].get<double>();
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, reports.size()));
    return {{"schema_version", kReportSchemaVersion},
            {"subset", subset},
            {"records", rows},
            {"mean_of_means", {{"angular_error", angular / n}, {"cosine_error", cosine / n}, {"point_to_point", p2p / n}}}};
}

inline int cmd_evaluate(const CommandOptions& o, const EvaluateOptions& eo, std::ostream& out)
{
    const PipelineConfig c = detail::command_config(o);
    const std::string subset = eo.subset.value_or(c.light_subset);
    std::vector<std::string> ids;
    if (eo.all)
    {
        ids = manifest_records(c);
    } else
    {
        ids.push_back(eo.record_id);
    }
    for (const auto& id : ids)
    {
        record_dir(c, id);
    }
    if (o.dry_run)
    {
        out << "planned evaluations: " << ids.size() << "\n";
        return 0;
    }
    std::vector<nlohmann::json> reports(ids.size());
    detail::for_each_parallel(ids.size(), o.jobs,
                              [&](std::size_t i) { reports[i] = evaluate_one(c, ids[i], subset, eo.self_check); });
    if (!eo.all)
    {
        out << reports.front().dump(2) << "\n";
        return 0;
    }
    const nlohmann::json summary = summarize_reports(reports, subset_label(subset));
    const std::string name = std::string(eo.self_check ? "self_check" : "summary") + "_" + subset_label(subset) + ".json";
    const auto path = std::filesystem::path(c.output_dir.empty() ? c.corpus_dir : c.output_dir) / name;
    io::write_json(path.string(), summary);
    out << std::left << std::setw(12) << "record" << std::setw(14) << "angular_mean" << std::setw(14) << "cosine"
        << "p2p_mean_mm\n";
    out << std::fixed << std::setprecision(4);
    for (const auto& row : summary["records"])
    {
        out << std::setw(12) << row["record_id"].get<std::string>() << std::setw(14) << row["angular_mean"].get<double>()
            << std::setw(14) << row["cosine_error"].get<double>() << row["point_to_point_mean"].get<double>() << "\n";
    }
    const auto& m = summary["mean_of_means"];
    out << std::setw(12) << "mean" << std::setw(14) << m["angular_error"].get<double>() << std::setw(14)
        << m["cosine_error"].get<double>() << m["point_to_point"].get<double>() << "\n";
    out << path.string() << "\n";
    return 0;
}

struct CalibrateOptions
{
    std::string record_id;
    std::optional<std::string> subset;
};

inline int cmd_calibrate(const CommandOptions& o, const CalibrateOptions& co, std::ostream& out)
{
    const PipelineConfig c = detail::command_config(o);
    const std::string subset_name = co.subset.value_or(c.light_subset);
    const auto rdir = record_dir(c, co.record_id);
    if (o.dry_run)
    {
        out << "planned calibration of " << co.record_id << " (subset " << subset_name << ")\n";
        return 0;
    }
    const DatasetRecord record = run_stage("load_record", [&] { return load_record(rdir.string()); });
    const std::vector<int> subset = parse_light_subset(subset_name, static_cast<int>(record.images.size()));
    const std::vector<PointLight> rig = nominal_lights(record);
    std::vector<RadianceImage> images;
    std::vector<PointLight> initial;
    for (int k : subset)
    {
        images.push_back(record.images[k]);
        initial.push_back(rig[k]);
    }
    const CalibrationResult result = run_stage("calibrate", [&] {
        return calibrate_lights(CalibrationProblem{record.proxy_mesh, record.pose, record.cam, images, initial},
                                c.calibration);
    });
    const auto dir = reconstruction_dir(c, co.record_id, subset_name);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    nlohmann::json errors = nlohmann::json::array();
    for (std::size_t k = 0; k < subset.size(); ++k)
    {
        const PointLight& truth = record.lights[subset[k]];
        errors.push_back({{"light", subset[k]},
                          {"position_error_mm", (result.lights[k].position - truth.position).norm()},
                          {"illumination_relative_error",
                           std::abs(result.lights[k].illumination - truth.illumination) / truth.illumination}});
    }
    io::write_json((dir / "calibrated_lights.json").string(),
                   {{"subset", subset}, {"lights", io::lights_to_json(result.lights)}});
    nlohmann::json report = io::report_to_json(result.report);
    report["against_record_lights"] = errors;
    io::write_json((dir / "calibration_report.json").string(), report);
    out << errors.dump(2) << "\n" << (dir / "calibrated_lights.json").string() << "\n";
    return 0;
}

} // namespace nearps::pipeline

#endif // NEARPS_PIPELINE_PIPELINE_HPP
