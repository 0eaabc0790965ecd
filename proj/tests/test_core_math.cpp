// SPDX-License-Identifier: Apache-2.0
#include "test_util.h"

#include <hdrsplat/core_math.h>
#include <hdrsplat/error.h>

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <limits>

using namespace hdrsplat;
using testutil::relErr;

namespace {

Quaternion randomQuat(std::mt19937_64 &rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    return {g(rng), g(rng), g(rng), g(rng)};
}

Covariance3 randomCov(std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(0.05, 0.5);
    return covarianceFromRotationScale(randomQuat(rng), Vec3(u(rng), u(rng), u(rng)));
}

Camera tiltedCamera() {
    return Camera::lookAt(Vec3(0.4, -0.3, -3.0), Vec3(0.1, 0.05, 0.0), Vec3(0.0, -1.0, 0.0), 60.0, 64, 48);
}

} // namespace

TEST(Quaternion, IdentityGivesIdentityMatrix) {
    EXPECT_TRUE(quaternionToRotation({1, 0, 0, 0}).isApprox(Mat3::Identity(), 1e-15));
}

TEST(Quaternion, NinetyDegreesAboutZ) {
    const double h = std::sqrt(2.0) / 2.0;
    const Mat3 r = quaternionToRotation({h, 0, 0, h});
    const Vec3 v = r * Vec3(1, 0, 0);
    EXPECT_NEAR(v.x(), 0.0, 1e-15);
    EXPECT_NEAR(v.y(), 1.0, 1e-15);
    EXPECT_NEAR(v.z(), 0.0, 1e-15);
}

TEST(Quaternion, NormalizationIsInternal) {
    EXPECT_TRUE(quaternionToRotation({2, 0, 0, 0}).isApprox(Mat3::Identity(), 1e-15));
}

TEST(Quaternion, ZeroNormRejected) {
    EXPECT_THROW(quaternionToRotation({0, 0, 0, 0}), InvalidArgument);
    EXPECT_THROW((Quaternion{0, 0, 0, 0}.normalized()), InvalidArgument);
}

TEST(Quaternion, NormalizedHasUnitNorm) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        EXPECT_NEAR(randomQuat(rng).normalized().norm(), 1.0, 1e-9);
    }
}

TEST(Quaternion, RotationIsProperOrthonormal) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        const Mat3 r = quaternionToRotation(randomQuat(rng));
        EXPECT_TRUE((r.transpose() * r).isApprox(Mat3::Identity(), 1e-12));
        EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    }
}

TEST(Quaternion, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Quaternion q = randomQuat(rng);
        Mat3 g = Mat3::Random();
        const Quaternion a = quaternionToRotationBackward(q, g);
        const double an[4] = {a.w, a.x, a.y, a.z};
        double *comp[4] = {&q.w, &q.x, &q.y, &q.z};
        for (int k = 0; k < 4; ++k) {
            const double h = 1e-6, o = *comp[k];
            *comp[k] = o + h;
            const double fp = (quaternionToRotation(q).cwiseProduct(g)).sum();
            *comp[k] = o - h;
            const double fm = (quaternionToRotation(q).cwiseProduct(g)).sum();
            *comp[k] = o;
            EXPECT_LT(std::abs((fp - fm) / (2 * h) - an[k]), 1e-7 * std::max(1.0, std::abs(an[k])));
        }
    }
}

TEST(Covariance, IdentityRotationUnitScale) {
    EXPECT_TRUE(covarianceFromRotationScale({1, 0, 0, 0}, Vec3(1, 1, 1)).isApprox(Mat3::Identity(), 1e-15));
}

TEST(Covariance, DiagonalCase) {
    const Mat3 c = covarianceFromRotationScale({1, 0, 0, 0}, Vec3(2, 1, 1));
    EXPECT_TRUE(c.isApprox(Vec3(4, 1, 1).asDiagonal().toDenseMatrix(), 1e-15));
}

TEST(Covariance, RotatedDiagonalMatchesExplicitProduct) {
    const double h = std::sqrt(2.0) / 2.0;
    // oracle: explicit R S S^T R^T with R the 90 degree z rotation written out by hand
    Mat3 r;
    r << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    const Mat3 s = Vec3(2, 1, 1).asDiagonal();
    const Mat3 expected = r * s * s.transpose() * r.transpose();
    const Mat3 c = covarianceFromRotationScale({h, 0, 0, h}, Vec3(2, 1, 1));
    EXPECT_TRUE(c.isApprox(expected, 1e-12));
    EXPECT_NEAR(c(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(c(1, 1), 4.0, 1e-12);
    EXPECT_NEAR(c(2, 2), 1.0, 1e-12);
}

TEST(Covariance, SymmetricPositiveSemiDefinite) {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 200; ++i) {
        const Covariance3 c = randomCov(rng);
        EXPECT_LE((c - c.transpose()).cwiseAbs().maxCoeff(), 4.0 * std::numeric_limits<double>::epsilon() * c.cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<Mat3> es(c);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9);
    }
}

TEST(Covariance, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Quaternion q = randomQuat(rng);
        Vec3 s(0.3, 0.7, 1.1);
        const Mat3 g = Mat3::Random();
        const CovarianceGrad a = covarianceFromRotationScaleBackward(q, s, g);
        auto f = [&]() { return covarianceFromRotationScale(q, s).cwiseProduct(g).sum(); };
        const double h = 1e-6;
        double *qc[4] = {&q.w, &q.x, &q.y, &q.z};
        const double qa[4] = {a.rotation.w, a.rotation.x, a.rotation.y, a.rotation.z};
        for (int k = 0; k < 4; ++k) {
            const double o = *qc[k];
            *qc[k] = o + h;
            const double fp = f();
            *qc[k] = o - h;
            const double fm = f();
            *qc[k] = o;
            EXPECT_LT(std::abs((fp - fm) / (2 * h) - qa[k]), 1e-7 * std::max(1.0, std::abs(qa[k])));
        }
        for (int k = 0; k < 3; ++k) {
            const double o = s[k];
            s[k] = o + h;
            const double fp = f();
            s[k] = o - h;
            const double fm = f();
            s[k] = o;
            EXPECT_LT(std::abs((fp - fm) / (2 * h) - a.scale[k]), 1e-7 * std::max(1.0, std::abs(a.scale[k])));
        }
    }
}

TEST(Projection, OnAxisPoint) {
    Camera cam;
    cam.fx = cam.fy = 1.0;
    cam.cx = cam.cy = 0.0;
    cam.width = cam.height = 1;
    const auto s = projectGaussian(Vec3(0, 0, 1), Mat3::Zero(), cam, {0.3, 0.01});
    ASSERT_TRUE(s.has_value());
    EXPECT_NEAR(s->mean.x(), 0.0, 1e-15);
    EXPECT_NEAR(s->mean.y(), 0.0, 1e-15);
    EXPECT_TRUE(s->cov.isApprox(0.3 * Mat2::Identity(), 1e-15));
    EXPECT_DOUBLE_EQ(s->depth, 1.0);
}

TEST(Projection, BehindCameraIsCulled) {
    const Camera cam = testutil::frontCamera(8, 8, 10.0);
    EXPECT_FALSE(projectGaussian(Vec3(0, 0, -1), Mat3::Identity(), cam).has_value());
    EXPECT_FALSE(projectGaussian(Vec3(0, 0, 0.01), Mat3::Identity(), cam).has_value());
    EXPECT_TRUE(projectGaussian(Vec3(0, 0, 0.02), Mat3::Identity(), cam).has_value());
}

TEST(Projection, IsotropicOnAxisMatchesSymbolicJacobian) {
    const double fx = 50.0, sigma = 0.2, d = 4.0, lowpass = 0.3;
    Camera cam = testutil::frontCamera(32, 32, fx);
    const auto s = projectGaussian(Vec3(0, 0, d), sigma * sigma * Mat3::Identity(), cam, {lowpass, 0.01});
    ASSERT_TRUE(s.has_value());
    // J = [[fx/d, 0, 0], [0, fy/d, 0]] on the axis
    const double expected = fx * fx * sigma * sigma / (d * d) + lowpass;
    EXPECT_NEAR(s->cov(0, 0), expected, 1e-12);
    EXPECT_NEAR(s->cov(1, 1), expected, 1e-12);
    EXPECT_NEAR(s->cov(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(s->mean.x(), 16.0, 1e-12);
}

TEST(Projection, NonFiniteInputRejected) {
    const Camera cam = testutil::frontCamera(8, 8, 10.0);
    EXPECT_THROW(projectGaussian(Vec3(0, std::nan(""), 2), Mat3::Identity(), cam), InvalidArgument);
}

TEST(Projection, TranslationEquivariance) {
    std::mt19937_64 rng(8);
    const Camera cam = tiltedCamera();
    for (int i = 0; i < 50; ++i) {
        const Vec3 mu = Vec3::Random() * 0.5;
        const Covariance3 cov = randomCov(rng);
        const Vec3 shift = Vec3::Random() * 5.0;
        Camera moved = cam;
        moved.translation = cam.translation - cam.rotation * shift;
        const auto a = projectGaussian(mu, cov, cam);
        const auto b = projectGaussian(mu + shift, cov, moved);
        ASSERT_TRUE(a && b);
        EXPECT_LT((a->mean - b->mean).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT((a->cov - b->cov).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_NEAR(a->depth, b->depth, 1e-9);
    }
}

TEST(Projection, MeanJacobianMatchesFiniteDifferences) {
    std::mt19937_64 rng(9);
    const Camera cam = tiltedCamera();
    for (int trial = 0; trial < 30; ++trial) {
        Vec3 mu = Vec3::Random() * 0.5;
        const Covariance3 cov = randomCov(rng);
        const Vec2 gm = Vec2::Random();
        Mat2 gc = Mat2::Random();
        gc = 0.5 * (gc + gc.transpose()).eval();
        const ProjectionGrad a = projectGaussianBackward(mu, cov, cam, gm, gc);
        auto f = [&]() {
            const auto s = projectGaussian(mu, cov, cam);
            return s->mean.dot(gm) + s->cov.cwiseProduct(gc).sum();
        };
        const double h = 1e-4;
        for (int k = 0; k < 3; ++k) {
            const double o = mu[k];
            mu[k] = o + h;
            const double fp = f();
            mu[k] = o - h;
            const double fm = f();
            mu[k] = o;
            EXPECT_LT(relErr((fp - fm) / (2 * h), a.mean[k]), 1e-5) << "component " << k;
        }
    }
}

TEST(Projection, CovarianceGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(10);
    const Camera cam = tiltedCamera();
    const Vec3 mu(0.1, -0.2, 0.3);
    Covariance3 cov = randomCov(rng);
    const Vec2 gm = Vec2::Random();
    Mat2 gc = Mat2::Random();
    gc = 0.5 * (gc + gc.transpose()).eval();
    const ProjectionGrad a = projectGaussianBackward(mu, cov, cam, gm, gc);
    // symmetric perturbation of (i, j) and (j, i) together
    for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
            const double h = 1e-6;
            Covariance3 cp = cov, cm = cov;
            cp(i, j) += h;
            cm(i, j) -= h;
            if (i != j) {
                cp(j, i) += h;
                cm(j, i) -= h;
            }
            const auto sp = projectGaussian(mu, cp, cam);
            const auto sm = projectGaussian(mu, cm, cam);
            const double num = ((sp->cov - sm->cov).cwiseProduct(gc).sum()) / (2 * h);
            const double ana = i == j ? a.cov(i, j) : a.cov(i, j) + a.cov(j, i);
            EXPECT_LT(relErr(num, ana), 1e-6);
        }
    }
}

TEST(Camera, LookAtIsOrthonormalAndCentred) {
    const Camera cam = tiltedCamera();
    EXPECT_NO_THROW(cam.validate());
    EXPECT_TRUE((cam.rotation.transpose() * cam.rotation).isApprox(Mat3::Identity(), 1e-12));
    EXPECT_TRUE(cam.center().isApprox(Vec3(0.4, -0.3, -3.0), 1e-12));
    const auto s = projectGaussian(Vec3(0.1, 0.05, 0.0), 0.01 * Mat3::Identity(), cam);
    ASSERT_TRUE(s);
    EXPECT_NEAR(s->mean.x(), 32.0, 1e-9);
    EXPECT_NEAR(s->mean.y(), 24.0, 1e-9);
}

TEST(Camera, InvalidCameraRejected) {
    Camera c = testutil::frontCamera(8, 8, 10.0);
    c.width = 0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    c = testutil::frontCamera(8, 8, 10.0);
    c.rotation(0, 0) = 2.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
}
