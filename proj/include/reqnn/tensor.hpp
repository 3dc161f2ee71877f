#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "reqnn/quaternion.hpp"

namespace reqnn {

inline std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

inline std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

/// Dense quaternion tensor stored as four aligned real channels (w, x, y, z).
/// Shapes with a zero extent are legal and hold no elements.
class QTensor {
public:
    QTensor() : QTensor(std::vector<std::size_t>{0}) {}

    explicit QTensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), numel_(shape_numel(shape_)),
          w_(numel_, 0.0), x_(numel_, 0.0), y_(numel_, 0.0), z_(numel_, 0.0) {}

    QTensor(std::initializer_list<std::size_t> shape)
        : QTensor(std::vector<std::size_t>(shape)) {}

    static QTensor from_elements(const std::vector<Quaternion>& qs) {
        QTensor t({qs.size()});
        for (std::size_t i = 0; i < qs.size(); ++i) t.set(i, qs[i]);
        return t;
    }

    [[nodiscard]] const std::vector<std::size_t>& shape() const { return shape_; }
    [[nodiscard]] std::size_t numel() const { return numel_; }
    [[nodiscard]] std::size_t rank() const { return shape_.size(); }
    [[nodiscard]] std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    [[nodiscard]] Quaternion at(std::size_t i) const { return {w_[i], x_[i], y_[i], z_[i]}; }
    void set(std::size_t i, const Quaternion& q) {
        w_[i] = q.w; x_[i] = q.x; y_[i] = q.y; z_[i] = q.z;
    }

    // Row-major 2D accessors (first axis = rows).
    [[nodiscard]] std::size_t rows() const { return shape_.at(0); }
    [[nodiscard]] std::size_t cols() const { return shape_.at(1); }
    [[nodiscard]] Quaternion at(std::size_t r, std::size_t c) const { return at(r * cols() + c); }
    void set(std::size_t r, std::size_t c, const Quaternion& q) { set(r * cols() + c, q); }

    [[nodiscard]] std::vector<double>& w() { return w_; }
    [[nodiscard]] std::vector<double>& x() { return x_; }
    [[nodiscard]] std::vector<double>& y() { return y_; }
    [[nodiscard]] std::vector<double>& z() { return z_; }
    [[nodiscard]] const std::vector<double>& w() const { return w_; }
    [[nodiscard]] const std::vector<double>& x() const { return x_; }
    [[nodiscard]] const std::vector<double>& y() const { return y_; }
    [[nodiscard]] const std::vector<double>& z() const { return z_; }

    /// True when every element has exactly zero real part.
    [[nodiscard]] bool is_pure() const {
        for (double v : w_) if (v != 0.0) return false;
        return true;
    }

    [[nodiscard]] QTensor reshaped(std::vector<std::size_t> shape) const {
        if (shape_numel(shape) != numel_) {
            throw ShapeError("reshape " + shape_to_string(shape_) + " to " +
                             shape_to_string(shape) + ": element counts differ");
        }
        QTensor t = *this;
        t.shape_ = std::move(shape);
        return t;
    }

    friend bool operator==(const QTensor& a, const QTensor& b) {
        return a.shape_ == b.shape_ && a.w_ == b.w_ && a.x_ == b.x_ &&
               a.y_ == b.y_ && a.z_ == b.z_;
    }

    /// Digest over the raw channel bytes; identifies an input in reports.
    [[nodiscard]] std::uint64_t digest() const {
        std::uint64_t h = fnv1a(w_.data(), w_.size() * sizeof(double));
        h ^= fnv1a(x_.data(), x_.size() * sizeof(double)) * 0x9E3779B97F4A7C15ULL;
        h ^= fnv1a(y_.data(), y_.size() * sizeof(double)) * 0xC2B2AE3D27D4EB4FULL;
        h ^= fnv1a(z_.data(), z_.size() * sizeof(double)) * 0x165667B19E3779F9ULL;
        return h;
    }

private:
    std::vector<std::size_t> shape_;
    std::size_t numel_;
    std::vector<double> w_, x_, y_, z_;
};

/// Dense real tensor (row-major).
class RTensor {
public:
    RTensor() : RTensor(std::vector<std::size_t>{0}) {}

    explicit RTensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

    RTensor(std::initializer_list<std::size_t> shape)
        : RTensor(std::vector<std::size_t>(shape)) {}

    static RTensor from_values(std::vector<double> vals) {
        RTensor t({vals.size()});
        t.data_ = std::move(vals);
        return t;
    }

    [[nodiscard]] const std::vector<std::size_t>& shape() const { return shape_; }
    [[nodiscard]] std::size_t numel() const { return data_.size(); }
    [[nodiscard]] std::size_t rank() const { return shape_.size(); }
    [[nodiscard]] std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    [[nodiscard]] double& operator[](std::size_t i) { return data_[i]; }
    [[nodiscard]] double operator[](std::size_t i) const { return data_[i]; }

    [[nodiscard]] std::size_t rows() const { return shape_.at(0); }
    [[nodiscard]] std::size_t cols() const { return shape_.at(1); }
    [[nodiscard]] double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    [[nodiscard]] std::vector<double>& data() { return data_; }
    [[nodiscard]] const std::vector<double>& data() const { return data_; }

    [[nodiscard]] RTensor reshaped(std::vector<std::size_t> shape) const {
        if (shape_numel(shape) != numel()) {
            throw ShapeError("reshape " + shape_to_string(shape_) + " to " +
                             shape_to_string(shape) + ": element counts differ");
        }
        RTensor t = *this;
        t.shape_ = std::move(shape);
        return t;
    }

    friend bool operator==(const RTensor& a, const RTensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline void check_same_shape(const QTensor& a, const QTensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()) + " differ");
    }
}

inline void check_same_shape(const RTensor& a, const RTensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()) + " differ");
    }
}

/// Element-wise map f: Quaternion -> Quaternion.
template <typename F>
QTensor qt_map(const QTensor& t, F&& f) {
    QTensor out(t.shape());
    for (std::size_t i = 0; i < t.numel(); ++i) out.set(i, f(t.at(i)));
    return out;
}

/// Element-wise zip f: (Quaternion, Quaternion) -> Quaternion; shapes must match.
template <typename F>
QTensor qt_zip(const QTensor& a, const QTensor& b, F&& f) {
    check_same_shape(a, b, "zip");
    QTensor out(a.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) out.set(i, f(a.at(i), b.at(i)));
    return out;
}

inline QTensor qt_add(const QTensor& a, const QTensor& b) {
    return qt_zip(a, b, [](const Quaternion& p, const Quaternion& q) { return p + q; });
}

inline QTensor qt_sub(const QTensor& a, const QTensor& b) {
    return qt_zip(a, b, [](const Quaternion& p, const Quaternion& q) { return p - q; });
}

inline QTensor qt_scale(double s, const QTensor& t) {
    return qt_map(t, [s](const Quaternion& q) { return s * q; });
}

inline QTensor qt_conj(const QTensor& t) {
    return qt_map(t, [](const Quaternion& q) { return conj(q); });
}

inline RTensor qt_norm(const QTensor& t) {
    RTensor out(t.shape());
    for (std::size_t i = 0; i < t.numel(); ++i) out[i] = norm(t.at(i));
    return out;
}

inline RTensor qt_norm_sq(const QTensor& t) {
    RTensor out(t.shape());
    for (std::size_t i = 0; i < t.numel(); ++i) out[i] = norm_sq(t.at(i));
    return out;
}

} // namespace reqnn
