#include "support/oracles.hpp"

#include "nearps/core/camera.hpp"
#include "nearps/core/face_model.hpp"
#include "nearps/core/mesh.hpp"
#include "nearps/core/shapes.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace nearps;

namespace {

LinearFaceModel random_small_model(int n_vertices, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto random_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i)
        {
            m.data()[i] = normal(rng);
        }
        return m;
    };
    LinearFaceModel model;
    model.mean_shape = random_matrix(3 * n_vertices, 1).col(0) * 10.0;
    model.mean_albedo = Eigen::VectorXd::Constant(3 * n_vertices, 0.5);
    model.basis_id = random_matrix(3 * n_vertices, kIdentityCoefficients);
    model.basis_exp = random_matrix(3 * n_vertices, kExpressionCoefficients);
    model.basis_albedo = random_matrix(3 * n_vertices, kAlbedoCoefficients) * 0.001;
    for (int i = 0; i + 2 < n_vertices; ++i)
    {
        model.triangles.push_back({i, i + 1, i + 2});
    }
    return model;
}

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double sigma = 1.0)
{
    std::normal_distribution<double> normal(0.0, sigma);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
    {
        v[i] = normal(rng);
    }
    return v;
}

CameraIntrinsics test_camera()
{
    return CameraIntrinsics{1000.0, 1000.0, 500.0, 500.0, 1000, 1000};
}

} // namespace

TEST(FaceModel, ZeroCoefficientsGiveTheMean)
{
    const LinearFaceModel model = random_small_model(10, 1);
    const FaceMesh mesh = mean_face(model);
    ASSERT_EQ(mesh.vertices.size(), 10u);
    for (int v = 0; v < 10; ++v)
    {
        EXPECT_EQ(mesh.vertices[v], Vec3(model.mean_shape.segment<3>(3 * v)));
        EXPECT_EQ(mesh.albedo[v], Rgb(model.mean_albedo.segment<3>(3 * v)));
    }
}

TEST(FaceModel, FirstCanonicalIdentityVectorAddsFirstColumn)
{
    const LinearFaceModel model = random_small_model(10, 2);
    Eigen::VectorXd id = Eigen::VectorXd::Zero(kIdentityCoefficients);
    id[0] = 1.0;
    const FaceMesh mesh = synthesize_face(model, id, Eigen::VectorXd::Zero(kExpressionCoefficients),
                                          Eigen::VectorXd::Zero(kAlbedoCoefficients));
    for (int v = 0; v < 10; ++v)
    {
        const Vec3 expected = model.mean_shape.segment<3>(3 * v) + model.basis_id.col(0).segment<3>(3 * v);
        EXPECT_LT((mesh.vertices[v] - expected).norm(), 1e-12);
    }
}

TEST(FaceModel, RandomCoefficientsMatchDenseMatvecOracle)
{
    const LinearFaceModel model = random_small_model(10, 3);
    std::mt19937_64 rng(99);
    const Eigen::VectorXd id = random_vector(kIdentityCoefficients, rng);
    const Eigen::VectorXd ex = random_vector(kExpressionCoefficients, rng);
    const Eigen::VectorXd al = random_vector(kAlbedoCoefficients, rng);
    const FaceMesh mesh = synthesize_face(model, id, ex, al);

    Eigen::MatrixXd stacked(model.basis_id.rows(), kIdentityCoefficients + kExpressionCoefficients);
    stacked << model.basis_id, model.basis_exp;
    Eigen::VectorXd coeffs(kIdentityCoefficients + kExpressionCoefficients);
    coeffs << id, ex;
    const auto shape = oracle::dense_affine(model.mean_shape, stacked, coeffs);
    const auto albedo = oracle::dense_affine(model.mean_albedo, model.basis_albedo, al);
    for (int v = 0; v < 10; ++v)
    {
        for (int c = 0; c < 3; ++c)
        {
            EXPECT_NEAR(mesh.vertices[v][c], shape[3 * v + c], 1e-10);
            EXPECT_NEAR(mesh.albedo[v][c], std::clamp(albedo[3 * v + c], 0.0, 1.0), 1e-12);
        }
    }
}

TEST(FaceModel, RejectsDimensionMismatch)
{
    const LinearFaceModel model = random_small_model(10, 4);
    EXPECT_THROW(synthesize_face(model, Eigen::VectorXd::Zero(99), Eigen::VectorXd::Zero(kExpressionCoefficients),
                                 Eigen::VectorXd::Zero(kAlbedoCoefficients)),
                 InvalidInput);
    EXPECT_THROW(synthesize_face(model, Eigen::VectorXd::Zero(kIdentityCoefficients), Eigen::VectorXd::Zero(80),
                                 Eigen::VectorXd::Zero(kAlbedoCoefficients)),
                 InvalidInput);
    EXPECT_THROW(synthesize_face(model, Eigen::VectorXd::Zero(kIdentityCoefficients),
                                 Eigen::VectorXd::Zero(kExpressionCoefficients), Eigen::VectorXd::Zero(1)),
                 InvalidInput);
}

TEST(FaceModel, AlbedoIsClampedToUnitInterval)
{
    LinearFaceModel model = random_small_model(10, 5);
    model.basis_albedo.setZero();
    model.basis_albedo(0, 0) = 10.0;
    model.basis_albedo(1, 0) = -10.0;
    Eigen::VectorXd al = Eigen::VectorXd::Zero(kAlbedoCoefficients);
    al[0] = 1.0;
    const FaceMesh mesh = synthesize_face(model, Eigen::VectorXd::Zero(kIdentityCoefficients),
                                          Eigen::VectorXd::Zero(kExpressionCoefficients), al);
    EXPECT_EQ(mesh.albedo[0].x(), 1.0);
    EXPECT_EQ(mesh.albedo[0].y(), 0.0);
}

TEST(FaceModel, GeometryIsAffineInEachBlock)
{
    const LinearFaceModel model = random_small_model(10, 6);
    std::mt19937_64 rng(7);
    const Eigen::VectorXd zero_id = Eigen::VectorXd::Zero(kIdentityCoefficients);
    const Eigen::VectorXd zero_ex = Eigen::VectorXd::Zero(kExpressionCoefficients);
    for (int trial = 0; trial < 20; ++trial)
    {
        const Eigen::VectorXd a_id = random_vector(kIdentityCoefficients, rng);
        const Eigen::VectorXd b_id = random_vector(kIdentityCoefficients, rng);
        const Eigen::VectorXd a_ex = random_vector(kExpressionCoefficients, rng);
        const Eigen::VectorXd b_ex = random_vector(kExpressionCoefficients, rng);
        const Eigen::VectorXd combo = synthesize_geometry(model, a_id + b_id, a_ex + b_ex) -
                                      synthesize_geometry(model, a_id, a_ex) - synthesize_geometry(model, b_id, b_ex) +
                                      synthesize_geometry(model, zero_id, zero_ex);
        EXPECT_LT(combo.cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(FaceModel, ToyModelHasFullBasisSizesAndOrthogonalShapeBasis)
{
    ToyModelOptions opt;
    opt.grid_cols = 24;
    opt.grid_rows = 28;
    const LinearFaceModel model = make_toy_model(opt);
    EXPECT_NO_THROW(validate(model));
    EXPECT_EQ(model.basis_id.cols(), 100);
    EXPECT_EQ(model.basis_exp.cols(), 79);
    EXPECT_EQ(model.basis_albedo.cols(), 100);
    Eigen::MatrixXd shape(model.basis_id.rows(), 179);
    shape << model.basis_id, model.basis_exp;
    const Eigen::MatrixXd gram = shape.transpose() * shape;
    const double scale = gram.diagonal().maxCoeff();
    const Eigen::MatrixXd off = gram - Eigen::MatrixXd(gram.diagonal().asDiagonal());
    EXPECT_LT(off.cwiseAbs().maxCoeff(), 1e-9 * scale);
    // Decaying singular values.
    EXPECT_GT(model.basis_id.col(0).norm(), model.basis_id.col(50).norm());
    // The mean face points toward the camera (-z).
    const TriangleFrames frames = triangle_normals_and_centroids(mean_face(model));
    Vec3 mean_normal = Vec3::Zero();
    for (const auto& n : frames.normals)
    {
        mean_normal += n;
    }
    EXPECT_LT(mean_normal.normalized().z(), -0.9);
}

TEST(Pose, RotationIsOrthonormalWithUnitDeterminant)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> angle(-3.2, 3.2);
    for (int trial = 0; trial < 100; ++trial)
    {
        Pose pose;
        pose.pitch = angle(rng);
        pose.yaw = angle(rng);
        pose.roll = angle(rng);
        const Mat3 r = rotation_matrix(pose);
        EXPECT_LT((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
        EXPECT_LT((r - oracle::euler_rotation(pose.pitch, pose.yaw, pose.roll)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Camera, ProjectOnOpticalAxis)
{
    const Vec2 q = project(Vec3(0, 0, 1000), Pose{}, test_camera());
    EXPECT_DOUBLE_EQ(q.x(), 500.0);
    EXPECT_DOUBLE_EQ(q.y(), 500.0);
}

TEST(Camera, ProjectBySimilarTriangles)
{
    const Vec2 q = project(Vec3(100, 0, 1000), Pose{}, test_camera());
    EXPECT_DOUBLE_EQ(q.x(), 600.0);
    EXPECT_DOUBLE_EQ(q.y(), 500.0);
}

TEST(Camera, ProjectWithYawMatchesMatrixCompositionOracle)
{
    Pose pose;
    pose.yaw = oracle::kPi / 2.0;
    pose.translation = Vec3(0, 0, 2000);
    const CameraIntrinsics cam = test_camera();
    const Vec3 v(0, 0, 1000);
    const Vec3 x = oracle::euler_rotation(0.0, pose.yaw, 0.0) * v + pose.translation;
    const Vec2 expected(cam.fx * x.x() / x.z() + cam.cx, cam.fy * x.y() / x.z() + cam.cy);
    const Vec2 q = project(v, pose, cam);
    EXPECT_NEAR(q.x(), expected.x(), 1e-9);
    EXPECT_NEAR(q.y(), expected.y(), 1e-9);
    // yaw = 90 degrees maps +z to +x: the point lands at x' = 1000, z' = 2000.
    EXPECT_NEAR(q.x(), 1000.0, 1e-9);
}

TEST(Camera, ProjectBehindCameraThrows)
{
    EXPECT_THROW(project(Vec3(0, 0, -5), Pose{}, test_camera()), BehindCamera);
    EXPECT_THROW(project(Vec3(0, 0, 0), Pose{}, test_camera()), BehindCamera);
}

TEST(Camera, BackProjectExamples)
{
    const CameraIntrinsics cam = test_camera();
    EXPECT_EQ(back_project(Vec2(500, 500), 1000.0, cam), Vec3(0, 0, 1000));
    EXPECT_EQ(back_project(Vec2(600, 500), 2000.0, cam), Vec3(200, 0, 2000));
    EXPECT_THROW(back_project(Vec2(1, 1), 0.0, cam), InvalidInput);
    EXPECT_THROW(back_project(Vec2(1, 1), -3.0, cam), InvalidInput);
}

TEST(Camera, ProjectAndBackProjectAreInverse)
{
    const CameraIntrinsics cam{812.5, 790.0, 320.0, 240.0, 640, 480};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 640.0), v(0.0, 480.0), z(10.0, 5000.0);
    for (int i = 0; i < 100; ++i)
    {
        const Vec2 p(u(rng), v(rng));
        const Vec2 q = project(back_project(p, z(rng), cam), Pose{}, cam);
        EXPECT_LT((q - p).norm(), 1e-9);
    }
}

TEST(Camera, RejectsInvalidIntrinsics)
{
    EXPECT_THROW(validate(CameraIntrinsics{0.0, 1.0, 1.0, 1.0, 4, 4}), InvalidInput);
    EXPECT_THROW(validate(CameraIntrinsics{1.0, 1.0, 4.0, 1.0, 4, 4}), InvalidInput);
    EXPECT_NO_THROW(validate(CameraIntrinsics{1.0, 1.0, 0.0, 3.5, 4, 4}));
}

TEST(TriangleFrames, UnitTriangle)
{
    FaceMesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    mesh.triangles = {{0, 1, 2}};
    mesh.albedo.assign(3, Rgb::Constant(0.5));
    const TriangleFrames f = triangle_normals_and_centroids(mesh);
    EXPECT_LT((f.normals[0] - Vec3(0, 0, 1)).norm(), 1e-15);
    EXPECT_LT((f.centroids[0] - Vec3(1.0 / 3, 1.0 / 3, 0)).norm(), 1e-15);
}

TEST(TriangleFrames, NormalsAreUnitLength)
{
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> c(-100.0, 100.0);
    FaceMesh mesh;
    for (int t = 0; t < 200; ++t)
    {
        for (int k = 0; k < 3; ++k)
        {
            mesh.vertices.emplace_back(c(rng), c(rng), c(rng));
            mesh.albedo.push_back(Rgb::Constant(0.5));
        }
        mesh.triangles.push_back({3 * t, 3 * t + 1, 3 * t + 2});
    }
    for (const auto& n : triangle_normals_and_centroids(mesh).normals)
    {
        EXPECT_NEAR(n.norm(), 1.0, 1e-12);
    }
}

TEST(TriangleFrames, IcosphereNormalsAreRadial)
{
    const Vec3 center(3, -2, 40);
    const FaceMesh sphere = shapes::make_icosphere(25.0, 3, center);
    const TriangleFrames f = triangle_normals_and_centroids(sphere);
    double worst = 0.0;
    for (std::size_t t = 0; t < f.normals.size(); ++t)
    {
        const Vec3 radial = (f.centroids[t] - center).normalized();
        worst = std::max(worst, oracle::degrees(oracle::angle_between(radial, f.normals[t])));
    }
    EXPECT_LT(worst, 15.0);
}

TEST(TriangleFrames, DegenerateTriangleIsNamed)
{
    FaceMesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 0, 0}};
    mesh.triangles = {{0, 1, 2}, {0, 1, 3}};
    mesh.albedo.assign(4, Rgb::Constant(0.5));
    try
    {
        triangle_normals_and_centroids(mesh);
        FAIL() << "expected DegenerateGeometry";
    } catch (const DegenerateGeometry& e)
    {
        EXPECT_EQ(e.index(), 1);
        EXPECT_NE(std::string(e.what()).find("triangle 1"), std::string::npos);
    }
}

TEST(TriangleFrames, InvalidMeshesAreRejected)
{
    FaceMesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    mesh.triangles = {{0, 1, 3}};
    mesh.albedo.assign(3, Rgb::Constant(0.5));
    EXPECT_THROW(triangle_normals_and_centroids(mesh), InvalidInput);
    mesh.triangles = {{0, 1, 2}};
    mesh.albedo[1] = Rgb(1.5, 0, 0);
    EXPECT_THROW(triangle_normals_and_centroids(mesh), InvalidInput);
}

TEST(TriangleFrames, TranslationInvariantRotationEquivariant)
{
    const FaceMesh sphere = shapes::make_icosphere(10.0, 2);
    const TriangleFrames base = triangle_normals_and_centroids(sphere);
    const Mat3 r = oracle::euler_rotation(0.3, -1.1, 2.0);
    const FaceMesh moved = transformed(sphere, 1.0, Mat3::Identity(), Vec3(100, -40, 7));
    const FaceMesh rotated = transformed(sphere, 1.0, r, Vec3::Zero());
    const TriangleFrames fm = triangle_normals_and_centroids(moved);
    const TriangleFrames fr = triangle_normals_and_centroids(rotated);
    for (std::size_t t = 0; t < base.normals.size(); ++t)
    {
        EXPECT_LT((fm.normals[t] - base.normals[t]).norm(), 1e-12);
        EXPECT_LT((fr.normals[t] - r * base.normals[t]).norm(), 1e-12);
    }
}
