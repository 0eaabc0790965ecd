// SPDX-License-Identifier: Apache-2.0
#include <hdrsplat/core_math.h>
#include <hdrsplat/error.h>

#include <Eigen/Geometry>

#include <cmath>

namespace hdrsplat {

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion Quaternion::normalized() const {
    const double n = norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw InvalidArgument("quaternion has zero or non-finite norm");
    }
    return {w / n, x / n, y / n, z / n};
}

namespace {

Mat3 rotationOfUnit(const Quaternion &q) {
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

} // namespace

Mat3 quaternionToRotation(const Quaternion &q) { return rotationOfUnit(q.normalized()); }

Quaternion quaternionToRotationBackward(const Quaternion &q, const Mat3 &g) {
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw InvalidArgument("quaternion has zero or non-finite norm");
    }
    const Quaternion u = q.normalized();
    const double w = u.w, x = u.x, y = u.y, z = u.z;

    // dL/d(unit quaternion)
    const double gw = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) +
                             x * g(2, 1));
    const double gx = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) +
                             z * g(2, 0) + w * g(2, 1) - 2.0 * x * g(2, 2));
    const double gy = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
                             w * g(2, 0) + z * g(2, 1) - 2.0 * y * g(2, 2));
    const double gz = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) -
                             2.0 * z * g(1, 1) + y * g(1, 2) + x * g(2, 0) + y * g(2, 1));

    // Through u = q / |q|: dL/dq = (g - (g.u) u) / |q|
    const double dot = gw * w + gx * x + gy * y + gz * z;
    return {(gw - dot * w) / n, (gx - dot * x) / n, (gy - dot * y) / n, (gz - dot * z) / n};
}

Covariance3 covarianceFromRotationScale(const Quaternion &q, const Vec3 &scale) {
    const Mat3 m = quaternionToRotation(q) * scale.asDiagonal();
    return m * m.transpose();
}

CovarianceGrad covarianceFromRotationScaleBackward(const Quaternion &q, const Vec3 &scale,
                                                   const Mat3 &gradCov) {
    const Mat3 r = quaternionToRotation(q);
    const Mat3 m = r * scale.asDiagonal();
    // Sigma = M M^T  =>  dL/dM = (G + G^T) M
    const Mat3 gradM = (gradCov + gradCov.transpose()) * m;
    CovarianceGrad out;
    for (int k = 0; k < 3; ++k) {
        out.scale[k] = gradM.col(k).dot(r.col(k));
    }
    const Mat3 gradR = gradM * scale.asDiagonal();
    out.rotation = quaternionToRotationBackward(q, gradR);
    return out;
}

void Camera::validate() const {
    if (width < 1 || height < 1) {
        throw InvalidArgument("camera width and height must be >= 1");
    }
    if (!rotation.allFinite() || !translation.allFinite()) {
        throw InvalidArgument("camera pose is not finite");
    }
    const double err = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (err > 1e-6) {
        throw InvalidArgument("camera rotation is not orthonormal");
    }
    if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) || !std::isfinite(cy)) {
        throw InvalidArgument("camera intrinsics are not finite");
    }
}

Camera Camera::lookAt(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double focal, int width,
                      int height) {
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);
    Camera cam;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * eye;
    cam.fx = focal;
    cam.fy = focal;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    return cam;
}

namespace {

Eigen::Matrix<double, 2, 3> perspectiveJacobian(const Vec3 &t, const Camera &cam) {
    const double iz = 1.0 / t.z();
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx * iz, 0.0, -cam.fx * t.x() * iz * iz, 0.0, cam.fy * iz, -cam.fy * t.y() * iz * iz;
    return j;
}

bool allFinite(const Vec3 &mean, const Covariance3 &cov) { return mean.allFinite() && cov.allFinite(); }

} // namespace

std::optional<Splat2D> projectGaussian(const Vec3 &mean, const Covariance3 &cov, const Camera &cam,
                                       const ProjectionConfig &cfg) {
    if (!allFinite(mean, cov) || !std::isfinite(cfg.lowpass) || cfg.lowpass < 0.0) {
        throw InvalidArgument("projectGaussian: non-finite input or negative low-pass");
    }
    const Vec3 t = cam.toCamera(mean);
    if (t.z() <= cfg.nearPlane) {
        return std::nullopt;
    }
    const Eigen::Matrix<double, 2, 3> jw = perspectiveJacobian(t, cam) * cam.rotation;
    Splat2D s;
    s.mean = Vec2(cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy);
    s.cov = jw * cov * jw.transpose();
    s.cov(0, 1) = s.cov(1, 0) = 0.5 * (s.cov(0, 1) + s.cov(1, 0));
    s.cov(0, 0) += cfg.lowpass;
    s.cov(1, 1) += cfg.lowpass;
    s.depth = t.z();
    return s;
}

ProjectionGrad projectGaussianBackward(const Vec3 &mean, const Covariance3 &cov, const Camera &cam,
                                       const Vec2 &gradMean2d, const Mat2 &gradCov2d) {
    const Vec3 t = cam.toCamera(mean);
    const Eigen::Matrix<double, 2, 3> j = perspectiveJacobian(t, cam);
    const Eigen::Matrix<double, 2, 3> jw = j * cam.rotation;

    ProjectionGrad out;
    // cov2d = T Sigma T^T, T = J W
    out.cov = jw.transpose() * gradCov2d * jw;
    const Eigen::Matrix<double, 2, 3> gradT =
        gradCov2d * jw * cov.transpose() + gradCov2d.transpose() * jw * cov;
    const Eigen::Matrix<double, 2, 3> gradJ = gradT * cam.rotation.transpose();

    const double iz = 1.0 / t.z();
    const double iz2 = iz * iz;
    const double iz3 = iz2 * iz;
    Vec3 gradT3 = j.transpose() * gradMean2d; // mean2d = f * t.xy / t.z + c has Jacobian J
    gradT3.x() += gradJ(0, 2) * (-cam.fx * iz2);
    gradT3.y() += gradJ(1, 2) * (-cam.fy * iz2);
    gradT3.z() += gradJ(0, 0) * (-cam.fx * iz2) + gradJ(0, 2) * (2.0 * cam.fx * t.x() * iz3) +
                  gradJ(1, 1) * (-cam.fy * iz2) + gradJ(1, 2) * (2.0 * cam.fy * t.y() * iz3);
    out.mean = cam.rotation.transpose() * gradT3;
    return out;
}

} // namespace hdrsplat
