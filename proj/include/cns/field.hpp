#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cns {

/// Spatial grid dimensions of a multi-channel real field.
struct GridShape {
    int height   = 1;
    int width    = 1;
    int channels = 1;

    int pixels() const { return height * width; }
    int volume() const { return height * width * channels; }

    bool operator==(const GridShape&) const = default;

    void validate() const {
        if (height < 1 || width < 1 || channels < 1)
            throw std::invalid_argument("GridShape: all dimensions must be >= 1");
    }
};

/// Real-valued C x H x W tensor, channel-major, row-major within a channel.
class Field {
public:
    Field() = default;
    explicit Field(GridShape shape, double fill = 0.0)
        : shape_(shape), data_(static_cast<size_t>(shape.volume()), fill) {
        shape_.validate();
    }

    const GridShape& shape() const { return shape_; }
    int size() const { return static_cast<int>(data_.size()); }

    double& at(int c, int y, int x) { return data_[index(c, y, x)]; }
    double at(int c, int y, int x) const { return data_[index(c, y, x)]; }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    Field& operator+=(const Field& o) {
        check_same_shape(o);
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Field& operator-=(const Field& o) {
        check_same_shape(o);
        for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Field& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    /// this += s * o, the workhorse of every integrator step.
    void axpy(double s, const Field& o) {
        check_same_shape(o);
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
    }

    double squared_norm() const {
        double acc = 0.0;
        for (double v : data_) acc += v * v;
        return acc;
    }

    double mean() const {
        double acc = 0.0;
        for (double v : data_) acc += v;
        return acc / static_cast<double>(data_.size());
    }

    void check_same_shape(const Field& o) const {
        if (!(shape_ == o.shape_))
            throw std::invalid_argument("Field: shape mismatch");
    }

private:
    size_t index(int c, int y, int x) const {
        return (static_cast<size_t>(c) * shape_.height + y) * shape_.width + x;
    }

    GridShape shape_;
    std::vector<double> data_;
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(double s, Field a) { return a *= s; }

inline double dot(const Field& a, const Field& b) {
    a.check_same_shape(b);
    double acc = 0.0;
    for (int i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double max_abs(const Field& a) {
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

inline double max_abs_diff(const Field& a, const Field& b) {
    a.check_same_shape(b);
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace cns
