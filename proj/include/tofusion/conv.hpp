#pragma once

#include <stdexcept>
#include <vector>

#include "tofusion/tensor.hpp"

namespace tofusion {
namespace ad {

namespace detail {

// Y[M x P] += A[M x K] * B[K x P], row-major. Fixed loop order keeps results
// bit-deterministic; rows of Y are disjoint across threads.
template <typename T>
void gemm_acc(const T* a, const T* b, T* y, int m, int k, int p) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* yi = y + static_cast<size_t>(i) * p;
        const T* ai = a + static_cast<size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            const T aij = ai[j];
            const T* bj = b + static_cast<size_t>(j) * p;
            for (int q = 0; q < p; ++q) yi[q] += aij * bj[q];
        }
    }
}

// W[M x K] += G[M x P] * C[K x P]^T (dot products over P).
template <typename T>
void gemm_dot_acc(const T* g, const T* c, T* w, int m, int k, int p) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const T* gi = g + static_cast<size_t>(i) * p;
        T* wi = w + static_cast<size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            const T* cj = c + static_cast<size_t>(j) * p;
            T acc = T(0);
            for (int q = 0; q < p; ++q) acc += gi[q] * cj[q];
            wi[j] += acc;
        }
    }
}

// C[K x P] += A[M x K]^T * G[M x P]; rows of C are disjoint across threads.
template <typename T>
void gemm_tn_acc(const T* a, const T* g, T* c, int m, int k, int p) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < k; ++j) {
        T* cj = c + static_cast<size_t>(j) * p;
        for (int i = 0; i < m; ++i) {
            const T aij = a[static_cast<size_t>(i) * k + j];
            const T* gi = g + static_cast<size_t>(i) * p;
            for (int q = 0; q < p; ++q) cj[q] += aij * gi[q];
        }
    }
}

// 3x3 patches (zero pad 1) of one input image into columns: C is
// (ci*9) x (oh*ow), row index (ci*3 + ky)*3 + kx.
template <typename T>
void im2col3x3(const T* x, int ci, int h, int w, int stride, int oh, int ow, T* c) {
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < ci; ++ch) {
        const T* plane = x + static_cast<size_t>(ch) * h * w;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                T* row = c + (static_cast<size_t>(ch) * 9 + ky * 3 + kx) *
                                 (static_cast<size_t>(oh) * ow);
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - 1;
                    T* dst = row + static_cast<size_t>(oy) * ow;
                    if (iy < 0 || iy >= h) {
                        for (int ox = 0; ox < ow; ++ox) dst[ox] = T(0);
                        continue;
                    }
                    const T* src = plane + static_cast<size_t>(iy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - 1;
                        dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

// Transpose of im2col3x3: scatter-adds columns back into the image.
template <typename T>
void col2im3x3_acc(const T* c, int ci, int h, int w, int stride, int oh, int ow, T* x) {
    for (int ch = 0; ch < ci; ++ch) {
        T* plane = x + static_cast<size_t>(ch) * h * w;
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T* row = c + (static_cast<size_t>(ch) * 9 + ky * 3 + kx) *
                                       (static_cast<size_t>(oh) * ow);
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - 1;
                    if (iy < 0 || iy >= h) continue;
                    T* dst = plane + static_cast<size_t>(iy) * w;
                    const T* src = row + static_cast<size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - 1;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// 3x3 cross-correlation, zero padding 1, stride 1 or 2.
// x: (N, Ci, H, W), w: (Co, Ci, 3, 3), b: (1, Co, 1, 1).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride = 1) {
    const Shape xs = x.shape();
    const Shape ws = w.shape();
    if (ws.h != 3 || ws.w != 3) throw std::invalid_argument("conv2d: kernel must be 3x3");
    if (ws.c != xs.c)
        throw std::invalid_argument("conv2d: channel mismatch " + xs.str() + " vs " + ws.str());
    if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");
    const Shape bs = b.shape();
    if (bs.numel() != ws.n) throw std::invalid_argument("conv2d: bias size mismatch");

    const int co = ws.n, ci = xs.c, h = xs.h, wid = xs.w;
    const int oh = (h + 2 - 3) / stride + 1;
    const int ow = (wid + 2 - 3) / stride + 1;
    const int k = ci * 9, p = oh * ow;
    const Shape os{xs.n, co, oh, ow};

    std::vector<T> y(static_cast<size_t>(os.numel()));
    std::vector<T> cols(static_cast<size_t>(k) * p);
    for (int n = 0; n < xs.n; ++n) {
        detail::im2col3x3(x.val().data() + static_cast<size_t>(n) * ci * h * wid, ci, h, wid,
                          stride, oh, ow, cols.data());
        T* yn = y.data() + static_cast<size_t>(n) * co * p;
        for (int oc = 0; oc < co; ++oc) {
            const T bias = b.val()[static_cast<size_t>(oc)];
            T* row = yn + static_cast<size_t>(oc) * p;
            for (int q = 0; q < p; ++q) row[q] = bias;
        }
        detail::gemm_acc(w.val().data(), cols.data(), yn, co, k, p);
    }

    const int batch = xs.n;
    return make_op<T>(os, std::move(y), {x, w, b},
                      [batch, ci, co, h, wid, stride, oh, ow, k, p](Node<T>& node) {
        auto& px = node.parents[0];
        auto& pw = node.parents[1];
        auto& pb = node.parents[2];
        std::vector<T> cols(static_cast<size_t>(k) * p);
        std::vector<T> gcols;
        if (px->requires_grad) gcols.assign(static_cast<size_t>(k) * p, T(0));
        for (int n = 0; n < batch; ++n) {
            const T* gy = node.grad.data() + static_cast<size_t>(n) * co * p;
            if (pw->requires_grad || pb->requires_grad) {
                if (pw->requires_grad) {
                    pw->ensure_grad();
                    detail::im2col3x3(px->val.data() + static_cast<size_t>(n) * ci * h * wid, ci,
                                      h, wid, stride, oh, ow, cols.data());
                    detail::gemm_dot_acc(gy, cols.data(), pw->grad.data(), co, k, p);
                }
                if (pb->requires_grad) {
                    pb->ensure_grad();
                    for (int oc = 0; oc < co; ++oc) {
                        const T* row = gy + static_cast<size_t>(oc) * p;
                        T acc = T(0);
                        for (int q = 0; q < p; ++q) acc += row[q];
                        pb->grad[static_cast<size_t>(oc)] += acc;
                    }
                }
            }
            if (px->requires_grad) {
                px->ensure_grad();
                std::fill(gcols.begin(), gcols.end(), T(0));
                detail::gemm_tn_acc(pw->val.data(), gy, gcols.data(), co, k, p);
                detail::col2im3x3_acc(gcols.data(), ci, h, wid, stride, oh, ow,
                                      px->grad.data() + static_cast<size_t>(n) * ci * h * wid);
            }
        }
    });
}

// Local mean over a win x win window, normalized by the in-bounds overlap so
// borders stay unbiased (constant input -> identical constant output).
template <typename T>
Tensor<T> box_mean(const Tensor<T>& x, int window) {
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("box_mean: window must be odd");
    const Shape s = x.shape();
    const int r = window / 2, h = s.h, w = s.w;

    // Per-axis overlap counts; the 2D count is their product.
    std::vector<T> cnt_x(static_cast<size_t>(w)), cnt_y(static_cast<size_t>(h));
    for (int i = 0; i < w; ++i)
        cnt_x[static_cast<size_t>(i)] = static_cast<T>(std::min(w - 1, i + r) - std::max(0, i - r) + 1);
    for (int i = 0; i < h; ++i)
        cnt_y[static_cast<size_t>(i)] = static_cast<T>(std::min(h - 1, i + r) - std::max(0, i - r) + 1);

    const size_t plane = static_cast<size_t>(h) * w;
    const size_t planes = static_cast<size_t>(s.n) * s.c;

    auto boxsum = [r, h, w, plane](const T* src, T* dst, std::vector<T>& tmp) {
        // rows then columns, zero pad
        for (int y = 0; y < h; ++y) {
            const T* in = src + static_cast<size_t>(y) * w;
            T* out = tmp.data() + static_cast<size_t>(y) * w;
            for (int x2 = 0; x2 < w; ++x2) {
                T acc = T(0);
                const int lo = std::max(0, x2 - r), hi = std::min(w - 1, x2 + r);
                for (int i = lo; i <= hi; ++i) acc += in[i];
                out[x2] = acc;
            }
        }
        for (int x2 = 0; x2 < w; ++x2) {
            for (int y = 0; y < h; ++y) {
                T acc = T(0);
                const int lo = std::max(0, y - r), hi = std::min(h - 1, y + r);
                for (int i = lo; i <= hi; ++i) acc += tmp[static_cast<size_t>(i) * w + x2];
                dst[static_cast<size_t>(y) * w + x2] = acc;
            }
        }
        (void)plane;
    };

    std::vector<T> v(x.val().size());
    std::vector<T> tmp(plane);
    for (size_t pl = 0; pl < planes; ++pl) {
        const T* src = x.val().data() + pl * plane;
        T* dst = v.data() + pl * plane;
        boxsum(src, dst, tmp);
        for (int y = 0; y < h; ++y)
            for (int x2 = 0; x2 < w; ++x2)
                dst[static_cast<size_t>(y) * w + x2] /=
                    cnt_y[static_cast<size_t>(y)] * cnt_x[static_cast<size_t>(x2)];
    }

    return make_op<T>(s, std::move(v), {x},
                      [boxsum, cnt_x, cnt_y, planes, plane, h, w](Node<T>& node) {
        auto& p = node.parents[0];
        p->ensure_grad();
        std::vector<T> weighted(plane), summed(plane), tmp(plane);
        for (size_t pl = 0; pl < planes; ++pl) {
            const T* g = node.grad.data() + pl * plane;
            for (int y = 0; y < h; ++y)
                for (int x2 = 0; x2 < w; ++x2)
                    weighted[static_cast<size_t>(y) * w + x2] =
                        g[static_cast<size_t>(y) * w + x2] /
                        (cnt_y[static_cast<size_t>(y)] * cnt_x[static_cast<size_t>(x2)]);
            boxsum(weighted.data(), summed.data(), tmp);
            T* dst = p->grad.data() + pl * plane;
            for (size_t i = 0; i < plane; ++i) dst[i] += summed[i];
        }
    });
}

}  // namespace ad
}  // namespace tofusion
