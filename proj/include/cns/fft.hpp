#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "cns/field.hpp"

namespace cns {

using cplx = std::complex<double>;

// DFT convention used throughout this library:
//   forward:  X(u,v) = sum_{h,w} x(h,w) * exp(-2*pi*i*(u*h/H + v*w/W))   (unnormalized)
//   inverse:  x(h,w) = (1/(H*W)) * sum_{u,v} X(u,v) * exp(+2*pi*i*(...))
// Parseval under this convention: sum |X|^2 = H*W * sum |x|^2.
//
// Spectra are stored DC-centered ("shifted"): storage row iy corresponds to the
// signed frequency f_y = iy - floor(H/2), so f_y ranges over
// [-floor(H/2), ceil(H/2) - 1], and likewise for f_x. This works for odd sizes too.

/// Complex C x H x W tensor over shifted frequency coordinates.
class Spectrum {
public:
    Spectrum() = default;
    explicit Spectrum(GridShape shape)
        : shape_(shape), data_(static_cast<size_t>(shape.volume())) {}

    const GridShape& shape() const { return shape_; }
    int size() const { return static_cast<int>(data_.size()); }

    /// Access by storage index (iy, ix); the frequency is (iy - H/2, ix - W/2).
    cplx& at(int c, int iy, int ix) { return data_[index(c, iy, ix)]; }
    cplx at(int c, int iy, int ix) const { return data_[index(c, iy, ix)]; }

    /// Access by signed shifted frequency (f_y, f_x).
    cplx& at_freq(int c, int fy, int fx) {
        return at(c, fy + shape_.height / 2, fx + shape_.width / 2);
    }
    cplx at_freq(int c, int fy, int fx) const {
        return at(c, fy + shape_.height / 2, fx + shape_.width / 2);
    }

    cplx& operator[](size_t i) { return data_[i]; }
    cplx operator[](size_t i) const { return data_[i]; }

    double total_energy() const {
        double acc = 0.0;
        for (const cplx& z : data_) acc += std::norm(z);
        return acc;
    }

private:
    size_t index(int c, int iy, int ix) const {
        return (static_cast<size_t>(c) * shape_.height + iy) * shape_.width + ix;
    }

    GridShape shape_;
    std::vector<cplx> data_;
};

/// Signed frequency of a storage index along an axis of length n.
inline int shifted_freq(int idx, int n) { return idx - n / 2; }

/// Cached twiddle matrices for one (H, W) grid. Transforms are evaluated as
/// two dense matrix passes per channel; grids in this library are small enough
/// that this beats the bookkeeping of a general mixed-radix FFT.
class DftPlan {
public:
    DftPlan(int height, int width);

    /// Forward transform of one channel set; output is DC-centered.
    Spectrum forward(const Field& field) const;

    /// Inverse transform; returns the real part and, if requested, reports the
    /// largest absolute imaginary residue (should be rounding-level for
    /// Hermitian inputs).
    Field inverse(const Spectrum& spectrum, double* max_imag = nullptr) const;

    /// Shared plan cache keyed by grid size; plans are immutable once built.
    static std::shared_ptr<const DftPlan> get(int height, int width);

    int height() const { return height_; }
    int width() const { return width_; }

private:
    int height_;
    int width_;
    // fwd_* are exp(-2*pi*i*k*j/n) tables indexed [k*n + j]; inverse uses conj.
    std::vector<cplx> fwd_h_;
    std::vector<cplx> fwd_w_;
};

Spectrum forward_transform(const Field& field, const GridShape& shape);
Spectrum forward_transform(const Field& field);
Field inverse_transform(const Spectrum& spectrum);
Field inverse_transform(const Spectrum& spectrum, double& max_imag_residue);

}  // namespace cns
