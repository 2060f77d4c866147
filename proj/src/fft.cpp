#include "cns/fft.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace cns {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::vector<cplx> twiddle_table(int n) {
    // exp(-2*pi*i*k*j/n) with the product k*j reduced mod n, so the table is
    // exact for all index pairs.
    std::vector<cplx> unit(n);
    for (int r = 0; r < n; ++r) {
        double phase = -kTwoPi * static_cast<double>(r) / static_cast<double>(n);
        unit[r] = cplx(std::cos(phase), std::sin(phase));
    }
    std::vector<cplx> table(static_cast<size_t>(n) * n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            table[static_cast<size_t>(k) * n + j] = unit[(static_cast<long long>(k) * j) % n];
    return table;
}

}  // namespace

DftPlan::DftPlan(int height, int width)
    : height_(height), width_(width), fwd_h_(twiddle_table(height)), fwd_w_(twiddle_table(width)) {}

std::shared_ptr<const DftPlan> DftPlan::get(int height, int width) {
    static std::mutex mutex;
    static std::map<std::pair<int, int>, std::shared_ptr<const DftPlan>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[{height, width}];
    if (!slot) slot = std::make_shared<DftPlan>(height, width);
    return slot;
}

Spectrum DftPlan::forward(const Field& field) const {
    const GridShape& shape = field.shape();
    const int H = height_, W = width_, C = shape.channels;
    Spectrum out(shape);
    std::vector<cplx> rows(static_cast<size_t>(H) * W);

    const int shift_y = H / 2, shift_x = W / 2;
    for (int c = 0; c < C; ++c) {
        // Pass 1: transform along y. rows[u*W + w] = sum_h T_H[u,h] x(h,w)
        for (int u = 0; u < H; ++u) {
            const cplx* trow = &fwd_h_[static_cast<size_t>(u) * H];
            for (int w = 0; w < W; ++w) rows[static_cast<size_t>(u) * W + w] = cplx(0.0, 0.0);
            for (int h = 0; h < H; ++h) {
                const cplx t = trow[h];
                const double* xrow = field.data() + (static_cast<size_t>(c) * H + h) * W;
                cplx* dst = &rows[static_cast<size_t>(u) * W];
                for (int w = 0; w < W; ++w) dst[w] += t * xrow[w];
            }
        }
        // Pass 2: transform along x, writing into the DC-centered layout.
        for (int u = 0; u < H; ++u) {
            const int iy = (u + shift_y) % H;
            for (int v = 0; v < W; ++v) {
                const cplx* tcol = &fwd_w_[static_cast<size_t>(v) * W];
                cplx acc(0.0, 0.0);
                const cplx* src = &rows[static_cast<size_t>(u) * W];
                for (int w = 0; w < W; ++w) acc += src[w] * tcol[w];
                out.at(c, iy, (v + shift_x) % W) = acc;
            }
        }
    }
    return out;
}

Field DftPlan::inverse(const Spectrum& spectrum, double* max_imag) const {
    const GridShape& shape = spectrum.shape();
    const int H = height_, W = width_, C = shape.channels;
    Field out(shape);
    std::vector<cplx> natural(static_cast<size_t>(H) * W);
    std::vector<cplx> rows(static_cast<size_t>(H) * W);
    const double inv_hw = 1.0 / (static_cast<double>(H) * W);
    double imag_peak = 0.0;

    const int shift_y = H / 2, shift_x = W / 2;
    for (int c = 0; c < C; ++c) {
        // Unshift into natural (u, v) order first.
        for (int u = 0; u < H; ++u) {
            const int iy = (u + shift_y) % H;
            for (int v = 0; v < W; ++v)
                natural[static_cast<size_t>(u) * W + v] = spectrum.at(c, iy, (v + shift_x) % W);
        }
        // Pass 1: inverse along y with conjugate twiddles.
        for (int h = 0; h < H; ++h) {
            cplx* dst = &rows[static_cast<size_t>(h) * W];
            for (int v = 0; v < W; ++v) dst[v] = cplx(0.0, 0.0);
            const cplx* trow = &fwd_h_[static_cast<size_t>(h) * H];
            for (int u = 0; u < H; ++u) {
                const cplx t = std::conj(trow[u]);
                const cplx* src = &natural[static_cast<size_t>(u) * W];
                for (int v = 0; v < W; ++v) dst[v] += t * src[v];
            }
        }
        // Pass 2: inverse along x.
        for (int h = 0; h < H; ++h) {
            const cplx* src = &rows[static_cast<size_t>(h) * W];
            for (int w = 0; w < W; ++w) {
                const cplx* tcol = &fwd_w_[static_cast<size_t>(w) * W];
                cplx acc(0.0, 0.0);
                for (int v = 0; v < W; ++v) acc += std::conj(tcol[v]) * src[v];
                acc *= inv_hw;
                out.at(c, h, w) = acc.real();
                imag_peak = std::max(imag_peak, std::abs(acc.imag()));
            }
        }
    }
    if (max_imag) *max_imag = imag_peak;
    return out;
}

Spectrum forward_transform(const Field& field, const GridShape& shape) {
    if (!(field.shape() == shape))
        throw std::invalid_argument("forward_transform: field dimensions do not match shape");
    return forward_transform(field);
}

Spectrum forward_transform(const Field& field) {
    auto plan = DftPlan::get(field.shape().height, field.shape().width);
    return plan->forward(field);
}

Field inverse_transform(const Spectrum& spectrum) {
    auto plan = DftPlan::get(spectrum.shape().height, spectrum.shape().width);
    return plan->inverse(spectrum);
}

Field inverse_transform(const Spectrum& spectrum, double& max_imag_residue) {
    auto plan = DftPlan::get(spectrum.shape().height, spectrum.shape().width);
    return plan->inverse(spectrum, &max_imag_residue);
}

}  // namespace cns
