// SPDX-License-Identifier: Apache-2.0
//
// Geometric primitives: quaternions, 3D covariance assembly, pinhole cameras and first-order
// (EWA) projection of 3D Gaussians onto the image plane, with hand-written reverse-mode
// derivatives for each step.
#pragma once

#include <Eigen/Dense>

#include <optional>

namespace hdrsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Covariance3 = Eigen::Matrix3d;

struct Quaternion {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm() const;
    // Throws InvalidArgument on a zero (or non-finite) norm.
    Quaternion normalized() const;
};

// Rotation matrix of q / |q|.
Mat3 quaternionToRotation(const Quaternion &q);

// Pulls dL/dR back to the *unnormalized* quaternion q.
Quaternion quaternionToRotationBackward(const Quaternion &q, const Mat3 &gradR);

// Sigma = R diag(s)^2 R^T.
Covariance3 covarianceFromRotationScale(const Quaternion &q, const Vec3 &scale);

struct CovarianceGrad {
    Quaternion rotation{0.0, 0.0, 0.0, 0.0};
    Vec3 scale = Vec3::Zero();
};
CovarianceGrad covarianceFromRotationScaleBackward(const Quaternion &q, const Vec3 &scale,
                                                   const Mat3 &gradCov);

// World-to-camera rigid transform plus pinhole intrinsics. Camera looks down +z.
struct Camera {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;

    // Throws InvalidArgument unless the rotation is orthonormal (1e-6) and the size is positive.
    void validate() const;
    Vec3 toCamera(const Vec3 &world) const { return rotation * world + translation; }
    // Camera centre in world coordinates.
    Vec3 center() const { return -rotation.transpose() * translation; }

    // Camera at `eye` looking at `target`; image y axis points along -up.
    static Camera lookAt(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double focal, int width,
                         int height);
};

struct Splat2D {
    Vec2 mean = Vec2::Zero();
    Mat2 cov = Mat2::Identity();
    double depth = 0.0;
    int gaussianIndex = -1;
};

struct ProjectionConfig {
    double lowpass = 0.3; // px^2 added to the 2D covariance diagonal
    double nearPlane = 0.01;
};

// Returns std::nullopt when the camera-frame depth is at or in front of the near plane.
std::optional<Splat2D> projectGaussian(const Vec3 &mean, const Covariance3 &cov, const Camera &cam,
                                       const ProjectionConfig &cfg = {});

struct ProjectionGrad {
    Vec3 mean = Vec3::Zero();
    Mat3 cov = Mat3::Zero();
};
// Vector-Jacobian product of projectGaussian for a splat that was not culled.
ProjectionGrad projectGaussianBackward(const Vec3 &mean, const Covariance3 &cov, const Camera &cam,
                                       const Vec2 &gradMean2d, const Mat2 &gradCov2d);

} // namespace hdrsplat
