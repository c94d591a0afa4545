/*
 * nearps - near-field photometric stereo for facial detail recovery.
 *
 * File: tests/acceptance/acceptance.cpp
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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include "support/oracles.hpp"
#include "support/scenes.hpp"
#include "support/tmpdir.hpp"

#include "nearps/calib/calibration.hpp"
#include "nearps/core/shapes.hpp"
#include "nearps/eval/alignment.hpp"
#include "nearps/eval/metrics.hpp"
#include "nearps/pipeline/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace nearps;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
    bool pass = false;
    std::string detail;
};

/// Collects failed sub-checks and a short summary of the measured values.
class Checker
{
  public:
    void expect(bool ok, const std::string& what)
    {
        if (!ok)
        {
            failures_.push_back(what);
        }
    }
    void note(const std::string& s) { notes_.push_back(s); }

    Outcome outcome() const
    {
        std::string d;
        for (const auto& n : notes_)
        {
            d += (d.empty() ? "" : "; ") + n;
        }
        for (const auto& f : failures_)
        {
            d += (d.empty() ? "failed: " : "; failed: ") + f;
        }
        return {failures_.empty(), d};
    }

  private:
    std::vector<std::string> failures_;
    std::vector<std::string> notes_;
};

std::string fmt(double v, const char* spec = "%.4g")
{
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string file_bytes(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

const LinearFaceModel& face_model()
{
    static const LinearFaceModel m = make_toy_model();
    return m;
}

// 1. Inverse-square falloff and linearity in the illumination.
Outcome inverse_square_and_linearity()
{
    Checker c;
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst_ratio = 0.0;
    int exact = 0;
    for (int trial = 0; trial < 1000; ++trial)
    {
        const Vec3 dir = Vec3(u(rng), u(rng), u(rng)).normalized();
        const double d = 50.0 + 500.0 * std::abs(u(rng));
        const Rgb rho(0.2 + 0.5 * std::abs(u(rng)), 0.6, 0.3);
        const double beta = 1e5 * (1.5 + u(rng));
        // Light at the origin: the displacement doubles exactly, so does the distance.
        const PointLight origin{Vec3::Zero(), beta};
        const Vec3 p = d * dir;
        const Rgb a = shade_point(p, -dir, rho, origin);
        const Rgb b = shade_point(2.0 * p, -dir, rho, origin);
        exact += (b == a / 4.0) ? 1 : 0;
        // General light position: equal up to rounding.
        const PointLight moved{Vec3(u(rng), u(rng), u(rng)) * 300.0, beta};
        const Vec3 q = moved.position + d * dir;
        const Vec3 q2 = moved.position + 2.0 * d * dir;
        const Rgb near = shade_point(q, -dir, rho, moved);
        const Rgb far = shade_point(q2, -dir, rho, moved);
        worst_ratio = std::max(worst_ratio, (far - near / 4.0).cwiseAbs().maxCoeff() / near.maxCoeff());
    }
    c.expect(exact == 1000, "exact quarter at doubled distance (" + std::to_string(exact) + "/1000)");
    c.expect(worst_ratio <= 1e-12, "relative quarter-law error " + fmt(worst_ratio));
    c.note("exact " + std::to_string(exact) + "/1000, worst rel " + fmt(worst_ratio));

    const testutil::FaceScene scene = testutil::face_scene();
    double worst_linear = 0.0;
    std::size_t covered = 0;
    for (const auto& light : scene.lights)
    {
        const RadianceImage one = render(scene.mesh, scene.pose, scene.cam, light).image;
        const RadianceImage two =
            render(scene.mesh, scene.pose, scene.cam, PointLight{light.position, 2.0 * light.illumination}).image;
        c.expect(one.mask == two.mask, "doubling beta changed the mask");
        covered += one.coverage();
        for (std::size_t i = 0; i < one.pixels.size(); ++i)
        {
            worst_linear = std::max(worst_linear, (two.pixels[i] - 2.0 * one.pixels[i]).cwiseAbs().maxCoeff());
        }
    }
    c.expect(covered > 10000, "face covers too few pixels");
    c.expect(worst_linear <= 1e-12, "doubling beta deviates by " + fmt(worst_linear));
    c.note("render doubling max dev " + fmt(worst_linear));
    return c.outcome();
}

// 2. Light calibration from renders of a model face with a displaced start.
Outcome calibration_round_trip()
{
    Checker c;
    const testutil::FaceScene scene = testutil::face_scene(32, 38);
    RenderOptions flat;
    flat.smooth_shading = false;
    CalibrationProblem problem;
    problem.proxy = scene.mesh;
    problem.pose = scene.pose;
    problem.cam = scene.cam;
    for (const auto& l : scene.lights)
    {
        problem.observations.push_back(render(scene.mesh, scene.pose, scene.cam, l, flat).image);
    }
    double worst_pos = 0.0;
    double worst_beta = 0.0;
    for (std::uint64_t seed : {1u, 2u, 3u})
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, 1.0);
        problem.initial_lights = scene.lights;
        for (auto& l : problem.initial_lights)
        {
            l.position += 0.2 * scene.face_scale * Vec3(g(rng), g(rng), g(rng)).normalized();
            l.illumination *= (seed % 2 == 0) ? 0.8 : 1.2;
        }
        const CalibrationResult r = calibrate_lights(problem);
        for (std::size_t j = 0; j < scene.lights.size(); ++j)
        {
            worst_pos = std::max(worst_pos, (r.lights[j].position - scene.lights[j].position).norm() / scene.face_scale);
            worst_beta = std::max(worst_beta, std::abs(r.lights[j].illumination / scene.lights[j].illumination - 1.0));
        }
    }
    c.expect(worst_pos <= 0.01, "position error " + fmt(100 * worst_pos) + "% of scene scale");
    c.expect(worst_beta <= 0.01, "illumination error " + fmt(100 * worst_beta) + "%");
    c.note("3 starts, worst position " + fmt(100 * worst_pos) + "% of " + fmt(scene.face_scale, "%.0f") +
           " mm, worst beta " + fmt(100 * worst_beta) + "%");
    return c.outcome();
}

/// Exact noise-free observations of `true_normals` with unit-free albedo, every facing light available.
RefinementData exact_data(const FaceMesh& camera_mesh, const std::vector<PointLight>& lights,
                          const std::vector<Vec3>& true_normals, const Rgb& albedo)
{
    const TriangleFrames frames = triangle_normals_and_centroids(camera_mesh);
    RefinementData d;
    for (std::size_t t = 0; t < camera_mesh.triangles.size(); ++t)
    {
        std::vector<int> avail;
        std::vector<Vec3> lvec;
        std::vector<Rgb> obs;
        for (std::size_t j = 0; j < lights.size(); ++j)
        {
            const Vec3 dvec = lights[j].position - frames.centroids[t];
            if (frames.normals[t].dot(dvec) <= 0.0)
            {
                continue;
            }
            const Vec3 l = lights[j].illumination * dvec / std::pow(dvec.norm(), 3);
            avail.push_back(static_cast<int>(j));
            lvec.push_back(l);
            obs.push_back(albedo * true_normals[t].dot(l));
        }
        if (avail.size() < 3)
        {
            continue;
        }
        d.triangles.push_back(static_cast<int>(t));
        d.neighbours.emplace_back();
        d.centroids.push_back(frames.centroids[t]);
        d.proxy_normals.push_back(frames.normals[t]);
        d.proxy_albedo.push_back(albedo);
        d.available.push_back(avail);
        d.light_vectors.push_back(lvec);
        d.observed.push_back(obs);
    }
    return d;
}

// 3. Without priors the normal step is classical three-light photometric stereo.
Outcome classical_ps_equivalence()
{
    Checker c;
    RefinementConfig config;
    config.mu1 = 0.0;
    config.mu2 = 0.0;
    struct Case
    {
        std::string name;
        FaceMesh mesh;
        std::vector<PointLight> lights;
    };
    std::vector<Case> cases;
    {
        const FaceMesh h = shapes::make_hemisphere(40.0, 2, Vec3(0, 0, 400));
        const Vec3 t(0, 0, 360);
        cases.push_back({"hemisphere", h,
                         {{t + Vec3(0, -60, -500), 2.5e5}, {t + Vec3(-400, 30, -350), 2.5e5},
                          {t + Vec3(380, 60, -360), 2.5e5}}});
    }
    {
        const testutil::FaceScene s = testutil::face_scene(14, 16);
        cases.push_back({"face", posed(s.mesh, s.pose), s.lights});
    }
    double worst = 0.0;
    std::string sizes;
    for (const auto& k : cases)
    {
        c.expect(k.mesh.triangles.size() <= 500, k.name + " mesh exceeds 500 triangles");
        const TriangleFrames frames = triangle_normals_and_centroids(k.mesh);
        std::mt19937_64 rng(77);
        std::normal_distribution<double> g(0.0, 0.1);
        std::vector<Vec3> truth;
        for (const auto& n : frames.normals)
        {
            truth.push_back((n + Vec3(g(rng), g(rng), g(rng))).normalized());
        }
        const RefinementData d = exact_data(k.mesh, k.lights, truth, Rgb(0.7, 0.5, 0.4));
        c.expect(d.size() >= 50, k.name + ": too few triangles see three lights");
        const std::vector<Vec3> step = normal_step(d, initial_state(d), config);
        for (std::size_t i = 0; i < d.size(); ++i)
        {
            const Vec3 ps = oracle::three_light_ps(
                d.light_vectors[i], Vec3(d.observed[i][0][0], d.observed[i][1][0], d.observed[i][2][0]));
            worst = std::max(worst, oracle::angle_between(step[i], ps));
        }
        sizes += (sizes.empty() ? "" : ", ") + k.name + " " + std::to_string(d.size()) + "/" +
                 std::to_string(k.mesh.triangles.size()) + " tris";
    }
    c.expect(worst <= 1e-6, "max deviation " + fmt(worst) + " rad");
    c.note(sizes + ", max deviation " + fmt(worst) + " rad");
    return c.outcome();
}

// 4. Detail recovery on synthetic faces with procedural bumps.
Outcome detail_round_trip()
{
    Checker c;
    pipeline::PipelineConfig config;
    std::string seen;
    for (std::uint64_t seed : {1u, 2u, 3u})
    {
        SampleSpec spec;
        spec.seed = seed;
        const DatasetRecord r = sample_record(face_model(), spec);
        c.expect(r.cam.width == 128 && r.cam.height == 128, "record is not 128 x 128");
        double errors[2] = {0.0, 0.0};
        double proxy = 0.0;
        const char* subsets[2] = {"S1+S2+S3", "S1"};
        for (int s = 0; s < 2; ++s)
        {
            const pipeline::Reconstruction rec = pipeline::reconstruct(r, subsets[s], config, true);
            const pipeline::Evaluation ev =
                pipeline::evaluate_reconstruction(r, "seed" + std::to_string(seed), subsets[s], rec.normals, rec.mesh,
                                                  false);
            errors[s] = ev.angular.mean;
            proxy = ev.report["proxy_angular_error"]["mean"].get<double>();
        }
        const std::string tag = "seed " + std::to_string(seed);
        c.expect(errors[0] <= 2.0, tag + ": 3-image error " + fmt(errors[0]) + " deg > 2");
        c.expect(errors[0] < proxy, tag + ": 3-image error not below proxy " + fmt(proxy));
        c.expect(errors[1] >= errors[0], tag + ": 1-image error " + fmt(errors[1]) + " below 3-image error");
        seen += (seen.empty() ? "" : ", ") + tag + " S1+S2+S3 " + fmt(errors[0], "%.3f") + " S1 " + fmt(errors[1], "%.3f") +
                " proxy " + fmt(proxy, "%.3f") + " deg";
    }
    c.note(seen);
    return c.outcome();
}

HeightField paraboloid(const CameraIntrinsics& cam, double z0, double a)
{
    HeightField z(cam);
    for (int y = 0; y < cam.height; ++y)
    {
        for (int x = 0; x < cam.width; ++x)
        {
            const double u = x - cam.cx;
            const double v = y - cam.cy;
            z.depth[z.index(x, y)] = z0 + a * (u * u + v * v);
            z.mask[z.index(x, y)] = 1;
        }
    }
    return z;
}

/// Analytic camera-facing normal of P(x, y) = Z(x, y) * ray(x, y) for the paraboloid depth.
NormalMap paraboloid_normals(const CameraIntrinsics& cam, double z0, double a)
{
    NormalMap n(cam.width, cam.height);
    for (int y = 0; y < cam.height; ++y)
    {
        for (int x = 0; x < cam.width; ++x)
        {
            const double u = x - cam.cx;
            const double v = y - cam.cy;
            const double z = z0 + a * (u * u + v * v);
            const Vec3 ray(u / cam.fx, v / cam.fy, 1.0);
            const Vec3 px = 2.0 * a * u * ray + z * Vec3(1.0 / cam.fx, 0.0, 0.0);
            const Vec3 py = 2.0 * a * v * ray + z * Vec3(0.0, 1.0 / cam.fy, 0.0);
            n.normals[n.index(x, y)] = py.cross(px).normalized();
            n.mask[n.index(x, y)] = 1;
        }
    }
    return n;
}

// 5. Integration of analytic paraboloid normals and the pixel-normal Jacobian.
Outcome integration_oracle()
{
    Checker c;
    const CameraIntrinsics cam{1200.0, 1200.0, 63.5, 63.5, 128, 128};
    const double z0 = 600.0;
    const double a = 0.0015;
    const HeightField truth = paraboloid(cam, z0, a);
    double lo = 1e300, hi = -1e300, mean = 0.0;
    for (double d : truth.depth)
    {
        lo = std::min(lo, d);
        hi = std::max(hi, d);
        mean += d;
    }
    mean /= static_cast<double>(truth.depth.size());
    HeightField plane(cam);
    std::fill(plane.depth.begin(), plane.depth.end(), mean);
    std::fill(plane.mask.begin(), plane.mask.end(), 1);
    const IntegrationResult r = integrate(paraboloid_normals(cam, z0, a), plane);
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.depth.size(); ++i)
    {
        sum += std::pow(r.heights.depth[i] - truth.depth[i], 2);
    }
    const double rms = std::sqrt(sum / static_cast<double>(truth.depth.size()));
    c.expect(rms <= 0.005 * (hi - lo), "depth rms " + fmt(rms) + " mm over range " + fmt(hi - lo));
    c.note("depth rms " + fmt(rms) + " mm = " + fmt(100 * rms / (hi - lo)) + "% of " + fmt(hi - lo) + " mm range");

    HeightField bumpy = truth;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> bump(-1.0, 1.0);
    for (auto& d : bumpy.depth)
    {
        d += bump(rng);
    }
    std::uniform_int_distribution<int> pix(0, 127);
    double worst = 0.0;
    int checked = 0;
    while (checked < 100)
    {
        const int x = pix(rng);
        const int y = pix(rng);
        const auto pn = pixel_normal_with_jacobian(bumpy, x, y);
        if (!pn)
        {
            continue;
        }
        const std::array<std::pair<int, int>, 5> cells{{{x, y}, {x + 1, y}, {x, y + 1}, {x - 1, y}, {x, y - 1}}};
        Eigen::Matrix<double, 3, 5> fd = Eigen::Matrix<double, 3, 5>::Zero();
        for (int k = 0; k < 5; ++k)
        {
            const auto [cx, cy] = cells[k];
            if (!bumpy.inside(cx, cy))
            {
                continue;
            }
            const double h = 1e-4;
            HeightField plus = bumpy;
            HeightField minus = bumpy;
            plus.depth[bumpy.index(cx, cy)] += h;
            minus.depth[bumpy.index(cx, cy)] -= h;
            fd.col(k) = (pixel_normal_from_heights(plus, x, y) - pixel_normal_from_heights(minus, x, y)) / (2 * h);
        }
        worst = std::max(worst, (pn->jacobian - fd).norm() / fd.norm());
        ++checked;
    }
    c.expect(worst <= 1e-4, "Jacobian relative error " + fmt(worst));
    c.note("Jacobian worst rel error " + fmt(worst) + " at 100 pixels");
    return c.outcome();
}

/// Twenty records written to disk with seeds 1000..1019.
struct Corpus
{
    fs::path dir;
    std::vector<SampleSpec> specs;
};

const Corpus& corpus()
{
    static const Corpus c = [] {
        Corpus out;
        out.dir = testutil::fresh_dir("corpus20");
        for (std::uint64_t i = 0; i < 20; ++i)
        {
            SampleSpec s;
            s.seed = 1000 + i;
            out.specs.push_back(s);
        }
        generate_corpus(face_model(), out.specs, (out.dir / "corpus").string());
        return out;
    }();
    return c;
}

bool non_increasing(const std::vector<double>& v)
{
    for (std::size_t k = 1; k < v.size(); ++k)
    {
        if (!(v[k] <= v[k - 1]))
        {
            return false;
        }
    }
    return !v.empty();
}

// 6. Refinement and integration objectives never increase on a 20-record run.
Outcome objective_monotonicity()
{
    Checker c;
    const Corpus& cp = corpus();
    pipeline::PipelineConfig config;
    std::size_t refine_steps = 0;
    std::size_t integrate_steps = 0;
    for (std::size_t i = 0; i < cp.specs.size(); ++i)
    {
        const std::string id = record_id(i);
        const DatasetRecord r = load_record((cp.dir / "corpus" / id).string());
        const pipeline::Reconstruction rec = pipeline::reconstruct(r, "all", config, false);
        std::vector<double> refine;
        for (const auto& e : rec.refinement.log)
        {
            refine.push_back(e.objective);
        }
        c.expect(non_increasing(refine), id + ": refinement objective increased");
        c.expect(non_increasing(rec.integration.objective_log), id + ": integration objective increased");
        refine_steps += refine.size();
        integrate_steps += rec.integration.objective_log.size();
    }
    c.note("20 records with calibrated lights, " + std::to_string(refine_steps) + " refinement and " +
           std::to_string(integrate_steps) + " integration log entries");
    return c.outcome();
}

FaceMesh similarity_moved(const FaceMesh& m, double s, const Mat3& r, const Vec3& t)
{
    FaceMesh out = m;
    for (auto& v : out.vertices)
    {
        v = s * r * v + t;
    }
    return out;
}

// 7. Metric sanity on constructed cases.
Outcome metric_sanity()
{
    Checker c;
    NormalMap truth(64, 64);
    NormalMap rotated(64, 64);
    const Vec3 axis = Vec3(-0.2, 0.7, 0.4).normalized();
    const Mat3 rot = Eigen::AngleAxisd(5.0 * oracle::kPi / 180.0, axis).toRotationMatrix();
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t i = 0; i < truth.normals.size(); ++i)
    {
        Vec3 v(g(rng), g(rng), g(rng));
        v = (v - v.dot(axis) * axis).normalized();
        truth.normals[i] = v;
        rotated.normals[i] = rot * v;
        truth.mask[i] = rotated.mask[i] = 1;
    }
    const double angle = angular_error(rotated, truth).mean;
    c.expect(std::abs(angle - 5.0) <= 1e-6, "5 degree rotation measured as " + fmt(angle, "%.9f"));

    const testutil::FaceScene scene = testutil::face_scene(20, 24);
    const double s = 1.37;
    const Mat3 r = oracle::euler_rotation(0.2, -0.35, 0.1);
    const Vec3 t(12.0, -40.0, 300.0);
    const FaceMesh target = similarity_moved(scene.mesh, s, r, t);
    std::vector<std::pair<int, int>> corr;
    for (int i = 0; i < static_cast<int>(scene.mesh.vertices.size()); ++i)
    {
        corr.emplace_back(i, i);
    }
    const AlignmentResult a = align_7dof(scene.mesh, target, corr);
    const double align_err = std::max({std::abs(a.transform.scale - s), (a.transform.rotation - r).norm(),
                                       (a.transform.translation - t).norm()});
    c.expect(align_err <= 1e-9, "similarity recovered to " + fmt(align_err));

    const testutil::FaceScene fine = testutil::face_scene(32, 38);
    FaceMesh recon = scene.mesh;
    std::normal_distribution<double> noise(0.0, 0.4);
    for (auto& v : recon.vertices)
    {
        v += Vec3(noise(rng), noise(rng), noise(rng));
    }
    const double base = point_to_point_error(recon, fine.mesh).mean;
    double drift = 0.0;
    for (const auto& [sc, e, tr] : {std::tuple{0.8, Vec3(0.3, 0.5, -0.2), Vec3(50, 20, 400)},
                                    std::tuple{2.5, Vec3(-0.1, 2.0, 0.4), Vec3(-5, 0, 10)}})
    {
        const FaceMesh moved = similarity_moved(recon, sc, oracle::euler_rotation(e.x(), e.y(), e.z()), tr);
        drift = std::max(drift, std::abs(point_to_point_error(moved, fine.mesh).mean - base));
    }
    c.expect(base > 0.0, "noisy reconstruction has zero error");
    c.expect(drift <= 1e-6, "point-to-point changed by " + fmt(drift) + " mm under a similarity");
    c.note("5 deg -> " + fmt(angle, "%.9f") + ", similarity err " + fmt(align_err) + ", p2p drift " + fmt(drift) +
           " mm");
    return c.outcome();
}

// 8. Byte-identical regeneration and reconstruction.
Outcome determinism()
{
    Checker c;
    const Corpus& cp = corpus();
    const fs::path again = cp.dir / "again";
    generate_corpus(face_model(), cp.specs, again.string());
    std::size_t files = 0;
    for (std::size_t i = 0; i < cp.specs.size(); ++i)
    {
        const std::string id = record_id(i);
        for (const auto& f : record_file_names(cp.specs[i].n_lights))
        {
            const std::string x = file_bytes(cp.dir / "corpus" / id / f);
            c.expect(!x.empty() && x == file_bytes(again / id / f), id + "/" + f + " differs");
            ++files;
        }
    }
    c.expect(file_bytes(cp.dir / "corpus" / "manifest.json") == file_bytes(again / "manifest.json"),
             "manifest differs");

    io::save_model((cp.dir / "model.bin").string(), face_model());
    std::string meshes[2];
    for (int run = 0; run < 2; ++run)
    {
        const std::string out = "recon_" + std::to_string(run);
        io::write_json((cp.dir / (out + ".json")).string(), {{"schema_version", 1},
                                                             {"model", "model.bin"},
                                                             {"corpus", "corpus"},
                                                             {"output", out}});
        pipeline::CommandOptions o;
        o.config_path = (cp.dir / (out + ".json")).string();
        pipeline::ReconstructOptions ro;
        ro.record_id = record_id(0);
        std::ostringstream sink;
        c.expect(pipeline::cmd_reconstruct(o, ro, sink) == 0, "reconstruct run " + std::to_string(run) + " failed");
        meshes[run] = file_bytes(cp.dir / out / record_id(0) / "recon_all" / "mesh.obj");
    }
    c.expect(!meshes[0].empty() && meshes[0] == meshes[1], "reconstructed meshes differ");
    c.note(std::to_string(files) + " record files identical, mesh.obj " + std::to_string(meshes[0].size()) +
           " bytes identical");
    return c.outcome();
}

struct Criterion
{
    int id;
    std::string name;
    double budget_s; ///< wall-clock limit, 0 for none
    std::function<Outcome()> run;
};

} // namespace

int main()
{
    const std::vector<Criterion> criteria{
        {1, "inverse-square and linearity", 1.0, inverse_square_and_linearity},
        {2, "calibration round trip", 30.0, calibration_round_trip},
        {3, "classical photometric stereo equivalence", 5.0, classical_ps_equivalence},
        {4, "detail recovery round trip", 120.0, detail_round_trip},
        {5, "integration oracle", 30.0, integration_oracle},
        {6, "objective monotonicity", 0.0, objective_monotonicity},
        {7, "metric sanity", 0.0, metric_sanity},
        {8, "determinism", 0.0, determinism},
    };
    int failed = 0;
    for (const auto& k : criteria)
    {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = k.run();
        } catch (const std::exception& e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (k.budget_s > 0.0 && seconds > k.budget_s)
        {
            o.pass = false;
            o.detail += "; over the " + fmt(k.budget_s, "%.0f") + " s budget";
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s %d %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", k.id, k.name.c_str(), seconds,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
