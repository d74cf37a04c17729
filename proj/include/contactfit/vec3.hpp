#pragma once

// Tiny fixed-size vector/matrix types templated on the scalar so the same
// geometry code runs on plain doubles and on ad::Value.

#include <Eigen/Core>

#include "contactfit/autodiff.hpp"

namespace contactfit {

template <class T>
struct Vec3 {
    T x{}, y{}, z{};

    Vec3() = default;
    Vec3(T x_, T y_, T z_) : x(std::move(x_)), y(std::move(y_)), z(std::move(z_)) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

using Vec3d = Vec3<double>;

inline Vec3d to_vec3(const Eigen::RowVector3d& r) { return {r.x(), r.y(), r.z()}; }
inline Vec3d to_vec3(const Eigen::Vector3d& r) { return {r.x(), r.y(), r.z()}; }
inline Eigen::RowVector3d to_eigen(const Vec3d& v) { return {v.x, v.y, v.z}; }

template <class T>
T dot(const Vec3<T>& a, const Vec3<T>& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <class T>
Vec3<T> cross(const Vec3<T>& a, const Vec3<T>& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <class T>
T squared_norm(const Vec3<T>& a) {
    return dot(a, a);
}

template <class T>
T norm(const Vec3<T>& a) {
    using contactfit::sqrt;
    return sqrt(squared_norm(a));
}

template <class T>
T squared_distance(const Vec3<T>& a, const Vec3<T>& b) {
    return squared_norm(a - b);
}

// Row-major 3x3, scalar-templated; used for joint rotations.
template <class T>
struct Mat3 {
    T m[9]{};

    static Mat3 identity() {
        Mat3 r;
        r.m[0] = 1.0;
        r.m[4] = 1.0;
        r.m[8] = 1.0;
        return r;
    }

    Vec3<T> apply(const Vec3<T>& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                r.m[3 * i + j] = m[3 * i] * o.m[j] + m[3 * i + 1] * o.m[3 + j] +
                                 m[3 * i + 2] * o.m[6 + j];
            }
        }
        return r;
    }
};

// Rotate a templated vector by a constant (double) matrix.
template <class T>
Vec3<T> apply_const(const Eigen::Matrix3d& r, const Vec3<T>& v) {
    return {v.x * r(0, 0) + v.y * r(0, 1) + v.z * r(0, 2),
            v.x * r(1, 0) + v.y * r(1, 1) + v.z * r(1, 2),
            v.x * r(2, 0) + v.y * r(2, 1) + v.z * r(2, 2)};
}

}  // namespace contactfit
