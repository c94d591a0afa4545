/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: tools/nearps_cli.cpp
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

#include "nearps/io/png.hpp"
#include "nearps/pipeline/pipeline.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace nearps;

std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const std::string& what)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        try
        {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size())
            {
                throw InvalidInput(what);
            }
        } catch (const std::logic_error&)
        {
            throw InvalidInput(what + " must be " + std::to_string(expected) + " comma-separated numbers: " + text);
        }
    }
    if (out.size() != expected)
    {
        throw InvalidInput(what + " must be " + std::to_string(expected) + " comma-separated numbers: " + text);
    }
    return out;
}

struct RenderArgs
{
    std::string mesh;
    std::string out;
    std::string camera;
    std::string pose;
    std::vector<std::string> lights;
    int size = 128;
    double focal_factor = 2.66;
    bool flat = false;
    bool shadows = false;
};

int cmd_render(const pipeline::CommandOptions& o, const RenderArgs& a, std::ostream& out)
{
    const FaceMesh mesh = io::read_obj(a.mesh);
    CameraIntrinsics cam;
    if (!a.camera.empty())
    {
        cam = io::camera_from_json(io::read_json(a.camera));
    } else
    {
        const double f = a.focal_factor * a.size;
        cam = CameraIntrinsics{f, f, (a.size - 1) / 2.0, (a.size - 1) / 2.0, a.size, a.size};
        validate(cam);
    }
    Pose pose;
    pose.translation = Vec3(0, 0, 650);
    if (!a.pose.empty())
    {
        if (std::filesystem::is_regular_file(a.pose))
        {
            pose = io::pose_from_json(io::read_json(a.pose));
        } else
        {
            const auto v = parse_numbers(a.pose, 6, "--pose");
            pose = Pose{v[0], v[1], v[2], Vec3(v[3], v[4], v[5])};
        }
    }
    std::vector<PointLight> lights;
    for (const auto& l : a.lights)
    {
        const auto v = parse_numbers(l, 4, "--light");
        lights.push_back({Vec3(v[0], v[1], v[2]), v[3]});
        validate(lights.back());
    }
    if (lights.empty())
    {
        throw InvalidInput("render needs at least one --light x,y,z,beta");
    }
    if (o.dry_run)
    {
        out << "planned renders: " << lights.size() << " at " << cam.width << "x" << cam.height << "\n";
        return 0;
    }
    std::filesystem::create_directories(a.out);
    RenderOptions options;
    options.smooth_shading = !a.flat;
    options.cast_shadows = a.shadows;
    for (std::size_t k = 0; k < lights.size(); ++k)
    {
        const RenderResult r = pipeline::run_stage("render", [&] { return render(mesh, pose, cam, lights[k], options); });
        if (r.status == RenderStatus::behind_camera)
        {
            throw InvalidInput("mesh lies behind the camera");
        }
        const auto path = std::filesystem::path(a.out) / image_file_name(static_cast<int>(k));
        io::write_radiance(path.string(), r.image);
        io::write_preview_png((std::filesystem::path(a.out) / ("img_" + std::to_string(k) + ".png")).string(),
                              io::to_float_image(r.image));
        if (k == 0)
        {
            io::write_pfm((std::filesystem::path(a.out) / "mask.pfm").string(),
                          io::mask_to_float_image(cam.width, cam.height, r.image.mask));
        }
        out << path.string() << "\n";
    }
    return 0;
}

struct MakeModelArgs
{
    std::string out;
    int cols = 96;
    int rows = 112;
    std::uint64_t seed = 7;
};

int cmd_make_model(const pipeline::CommandOptions& o, const MakeModelArgs& a, std::ostream& out)
{
    if (o.dry_run)
    {
        out << "planned model " << a.cols << "x" << a.rows << " -> " << a.out << "\n";
        return 0;
    }
    ToyModelOptions opt;
    opt.grid_cols = a.cols;
    opt.grid_rows = a.rows;
    opt.seed = a.seed;
    const LinearFaceModel model = make_toy_model(opt);
    io::save_model(a.out, model);
    out << a.out << " (" << model.num_vertices() << " vertices, " << model.triangles.size() << " triangles)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"nearps: near-field photometric stereo for facial detail recovery"};
    app.require_subcommand(1);
    app.fallthrough();

    pipeline::CommandOptions common;
    std::uint64_t seed = 0;
    app.add_option("--config", common.config_path, "Pipeline configuration (JSON)");
    auto* seed_opt = app.add_option("--seed", seed, "Base seed, overrides generate.base_seed");
    app.add_option("--jobs", common.jobs, "Records processed in parallel")->check(CLI::PositiveNumber);
    app.add_flag("--dry-run", common.dry_run, "Print the plan and write nothing");

    auto* gen = app.add_subcommand("generate", "Synthesise a corpus of records");

    pipeline::ReconstructOptions ro;
    std::string rec_subset;
    bool lights_known = false;
    double w1 = 0.0, w2 = 0.0, mu1 = 0.0, mu2 = 0.0;
    auto* rec = app.add_subcommand("reconstruct", "Calibrate, refine, integrate and mesh one record");
    auto* rec_record = rec->add_option("--record", ro.record_id, "Record id");
    auto* rec_all = rec->add_flag("--all", ro.all, "Every record of the manifest");
    rec_record->excludes(rec_all);
    auto* rec_subset_opt = rec->add_option("--lights", rec_subset, "Light subset: all, images such as S1 or S1+S3, or indices such as 0,2");
    auto* known_opt = rec->add_flag("--lights-known", lights_known, "Use the record's lights instead of calibrating");
    auto* w1_opt = rec->add_option("--w1", w1, "Depth prior weight");
    auto* w2_opt = rec->add_option("--w2", w2, "Laplacian smoothness weight");
    auto* mu1_opt = rec->add_option("--mu1", mu1, "Normal prior weight");
    auto* mu2_opt = rec->add_option("--mu2", mu2, "Albedo smoothness weight");

    pipeline::EvaluateOptions eo;
    std::string eval_subset;
    auto* ev = app.add_subcommand("evaluate", "Score a reconstruction against ground truth");
    auto* ev_record = ev->add_option("--record", eo.record_id, "Record id");
    auto* ev_all = ev->add_flag("--all", eo.all, "Every record of the manifest, plus a summary table");
    ev_record->excludes(ev_all);
    auto* ev_subset_opt = ev->add_option("--lights", eval_subset, "Light subset of the reconstruction");
    ev->add_flag("--self-check", eo.self_check, "Evaluate the ground truth against itself");

    RenderArgs ra;
    auto* rnd = app.add_subcommand("render", "Render a mesh under near point lights");
    rnd->add_option("--mesh", ra.mesh, "Mesh (OBJ, model space)")->required();
    rnd->add_option("--out", ra.out, "Output directory")->required();
    rnd->add_option("--light", ra.lights, "Light as x,y,z,beta in camera space (repeatable)");
    rnd->add_option("--camera", ra.camera, "Camera intrinsics (JSON)");
    rnd->add_option("--size", ra.size, "Square image size when no camera file is given")->check(CLI::PositiveNumber);
    rnd->add_option("--focal-factor", ra.focal_factor, "Focal length per pixel of width");
    rnd->add_option("--pose", ra.pose, "Pose JSON file or pitch,yaw,roll,tx,ty,tz");
    rnd->add_flag("--flat", ra.flat, "Flat instead of smooth shading");
    rnd->add_flag("--shadows", ra.shadows, "Ray-cast cast shadows");

    pipeline::CalibrateOptions co;
    std::string cal_subset;
    auto* cal = app.add_subcommand("calibrate", "Estimate light positions and illuminations of a record");
    cal->add_option("--record", co.record_id, "Record id")->required();
    auto* cal_subset_opt = cal->add_option("--lights", cal_subset, "Light subset");

    MakeModelArgs ma;
    auto* mk = app.add_subcommand("make-model", "Write the built-in procedural face model");
    mk->add_option("--out", ma.out, "Output model file")->required();
    mk->add_option("--grid-cols", ma.cols, "Vertex columns");
    mk->add_option("--grid-rows", ma.rows, "Vertex rows");
    mk->add_option("--model-seed", ma.seed, "Seed of the basis directions");

    try
    {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (*seed_opt)
    {
        common.seed = seed;
    }
    if (*w1_opt) common.w1 = w1;
    if (*w2_opt) common.w2 = w2;
    if (*mu1_opt) common.mu1 = mu1;
    if (*mu2_opt) common.mu2 = mu2;

    try
    {
        if (*gen)
        {
            return pipeline::cmd_generate(common, std::cout);
        }
        if (*rec)
        {
            if (ro.record_id.empty() && !ro.all)
            {
                throw InvalidInput("reconstruct needs --record <id> or --all");
            }
            if (*rec_subset_opt)
            {
                ro.subset = rec_subset;
            }
            if (*known_opt)
            {
                ro.lights_known = lights_known;
            }
            return pipeline::cmd_reconstruct(common, ro, std::cout);
        }
        if (*ev)
        {
            if (eo.record_id.empty() && !eo.all)
            {
                throw InvalidInput("evaluate needs --record <id> or --all");
            }
            if (*ev_subset_opt)
            {
                eo.subset = eval_subset;
            }
            return pipeline::cmd_evaluate(common, eo, std::cout);
        }
        if (*rnd)
        {
            return cmd_render(common, ra, std::cout);
        }
        if (*cal)
        {
            if (*cal_subset_opt)
            {
                co.subset = cal_subset;
            }
            return pipeline::cmd_calibrate(common, co, std::cout);
        }
        if (*mk)
        {
            return cmd_make_model(common, ma, std::cout);
        }
    } catch (const std::exception& e)
    {
        std::cerr << "nearps: error: " << e.what() << "\n";
        return pipeline::exit_code_for(e);
    }
    return 2;
}
