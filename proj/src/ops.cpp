#include "selfen/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <utility>

#include "selfen/error.hpp"
#include "selfen/simd/kernels.hpp"
#include "selfen/simd/reference.hpp"

namespace selfen {

namespace {

using detail::make_result;
using detail::Node;
using detail::NodePtr;

// ---------------------------------------------------------------------------
// Kernel routing: float goes through the dispatch table, double through the
// templated reference loops.

template <typename T>
void gemm_rows_acc(std::size_t m, std::size_t n, std::size_t k, const T* const* a_rows, const T* const* b_rows, T* c,
                   std::size_t ldc) {
    if constexpr (std::is_same_v<T, float>)
        simd::kernels().gemm_rows_acc(m, n, k, a_rows, b_rows, c, ldc);
    else
        simd::ref::gemm_rows_acc<T>(m, n, k, a_rows, b_rows, c, ldc);
}

template <typename T>
void vec_add(const T* a, const T* b, T* out, std::size_t n) {
    if constexpr (std::is_same_v<T, float>)
        simd::kernels().add(a, b, out, n);
    else
        simd::ref::add<T>(a, b, out, n);
}

template <typename T>
void vec_mul(const T* a, const T* b, T* out, std::size_t n) {
    if constexpr (std::is_same_v<T, float>)
        simd::kernels().mul(a, b, out, n);
    else
        simd::ref::mul<T>(a, b, out, n);
}

template <typename T>
void vec_axpy(T alpha, const T* x, T* y, std::size_t n) {
    if constexpr (std::is_same_v<T, float>)
        simd::kernels().axpy(alpha, x, y, n);
    else
        simd::ref::axpy<T>(alpha, x, y, n);
}

template <typename T>
void vec_relu(const T* x, T* y, std::size_t n) {
    if constexpr (std::is_same_v<T, float>)
        simd::kernels().relu(x, y, n);
    else
        simd::ref::relu<T>(x, y, n);
}

template <typename T>
void vec_relu_backward(const T* x, const T* gy, T* gx, std::size_t n) {
    if constexpr (std::is_same_v<T, float>)
        simd::kernels().relu_backward(x, gy, gx, n);
    else
        simd::ref::relu_backward<T>(x, gy, gx, n);
}

// ---------------------------------------------------------------------------
// Broadcasting

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

void check_broadcast(const char* op, const Shape& a, const Shape& b) {
    bool ok = a.size() == b.size();
    for (std::size_t i = 0; ok && i < a.size(); ++i) ok = b[i] == a[i] || b[i] == 1;
    if (!ok)
        throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(b) + " onto " + shape_str(a));
}

// Calls f(ia, ib) for every element of `a` with the matching index into `b`.
// Iteration order is row-major over `a`, so accumulations are deterministic.
template <typename F>
void for_each_broadcast(const Shape& a, const Shape& b, F&& f) {
    const std::size_t rank = a.size();
    std::vector<std::size_t> bstride(rank, 0);
    std::size_t s = 1;
    for (std::size_t d = rank; d-- > 0;) {
        bstride[d] = b[d] == 1 ? 0 : s;
        s *= b[d];
    }
    const std::size_t inner = a[rank - 1];
    const std::size_t inner_step = bstride[rank - 1];
    const std::size_t outer = shape_numel(a) / inner;
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ia = 0;
    for (std::size_t o = 0; o < outer; ++o) {
        std::size_t ib = 0;
        for (std::size_t d = 0; d + 1 < rank; ++d) ib += idx[d] * bstride[d];
        for (std::size_t j = 0; j < inner; ++j, ++ia, ib += inner_step) f(ia, ib);
        for (std::size_t d = rank - 1; d-- > 0;) {
            if (++idx[d] < a[d]) break;
            idx[d] = 0;
        }
    }
}

enum class Binary { kAdd, kSub, kMul };

template <typename T>
BasicTensor<T> binary(Binary kind, const char* op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
    check_broadcast(op, a.shape(), b.shape());
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<T> out(av.size());
    const bool same = same_shape(a.shape(), b.shape());
    if (same) {
        switch (kind) {
            case Binary::kAdd:
                vec_add(av.data(), bv.data(), out.data(), out.size());
                break;
            case Binary::kMul:
                vec_mul(av.data(), bv.data(), out.data(), out.size());
                break;
            case Binary::kSub:
                for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
                break;
        }
    } else {
        for_each_broadcast(a.shape(), b.shape(), [&](std::size_t ia, std::size_t ib) {
            switch (kind) {
                case Binary::kAdd:
                    out[ia] = av[ia] + bv[ib];
                    break;
                case Binary::kSub:
                    out[ia] = av[ia] - bv[ib];
                    break;
                case Binary::kMul:
                    out[ia] = av[ia] * bv[ib];
                    break;
            }
        });
    }

    auto backward_fn = [kind, same](Node<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const auto& g = self.grad;
        if (pa.requires_grad) {
            auto& ga = pa.ensure_grad();
            if (kind == Binary::kMul) {
                if (same) {
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = std::fma(g[i], pb.value[i], ga[i]);
                } else {
                    for_each_broadcast(pa.shape, pb.shape, [&](std::size_t ia, std::size_t ib) {
                        ga[ia] = std::fma(g[ia], pb.value[ib], ga[ia]);
                    });
                }
            } else {
                vec_axpy(T(1), g.data(), ga.data(), g.size());
            }
        }
        if (pb.requires_grad) {
            auto& gb = pb.ensure_grad();
            const T sign = kind == Binary::kSub ? T(-1) : T(1);
            if (same) {
                if (kind == Binary::kMul)
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] = std::fma(g[i], pa.value[i], gb[i]);
                else
                    vec_axpy(sign, g.data(), gb.data(), g.size());
            } else {
                for_each_broadcast(pa.shape, pb.shape, [&](std::size_t ia, std::size_t ib) {
                    if (kind == Binary::kMul)
                        gb[ib] = std::fma(g[ia], pa.value[ia], gb[ib]);
                    else
                        gb[ib] = std::fma(sign, g[ia], gb[ib]);
                });
            }
        }
    };
    return make_result<T>(op, a.shape(), std::move(out), {a.node(), b.node()}, std::move(backward_fn));
}

void require_rank4(const char* op, const Shape& s) {
    if (s.size() != 4) throw ShapeError(std::string(op) + ": expected a 4-D tensor, got " + shape_str(s));
}

// ---------------------------------------------------------------------------
// Convolution helpers
//
// A k x k convolution is computed on a zero-padded copy of each image. With
// Wp = W + 2 pad, output position q = y * Wp + x reads input rows at the
// fixed offset ky * Wp + kx, so every (channel, ky, kx) tap is a contiguous
// row of the padded plane and the whole layer is one GEMM whose B rows are
// pointers into that plane. Columns x >= W of the q grid are scratch.

struct ConvGeom {
    std::size_t h, w, k, pad, wp, plane, npos;

    ConvGeom(std::size_t h_, std::size_t w_, std::size_t k_)
        : h(h_), w(w_), k(k_), pad(k_ / 2), wp(w_ + 2 * (k_ / 2)), plane((h_ + 2 * (k_ / 2)) * wp), npos(h_ * wp) {}

    // Floats needed for `channels` padded planes plus read slack past the end.
    std::size_t padded_size(std::size_t channels) const { return channels * plane + wp + k; }
};

template <typename T>
void pad_planes(const T* src, std::size_t channels, const ConvGeom& g, T* dst) {
    std::fill(dst, dst + g.padded_size(channels), T(0));
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < g.h; ++y)
            std::copy(src + (c * g.h + y) * g.w, src + (c * g.h + y + 1) * g.w,
                      dst + c * g.plane + (y + g.pad) * g.wp + g.pad);
}

// rows[(c * k + ky) * k + kx] = plane_c + ky * Wp + kx
template <typename T>
void tap_rows(const T* padded, std::size_t channels, const ConvGeom& g, std::vector<const T*>& rows) {
    rows.resize(channels * g.k * g.k);
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t ky = 0; ky < g.k; ++ky)
            for (std::size_t kx = 0; kx < g.k; ++kx)
                rows[(c * g.k + ky) * g.k + kx] = padded + c * g.plane + ky * g.wp + kx;
}

template <typename T>
void matrix_rows(const T* base, std::size_t count, std::size_t stride, std::vector<const T*>& rows) {
    rows.resize(count);
    for (std::size_t i = 0; i < count; ++i) rows[i] = base + i * stride;
}

// acc (channels x npos) <-> dense (channels x H x W)
template <typename T>
void load_grid(const T* dense, std::size_t channels, const ConvGeom& g, T* acc) {
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < g.h; ++y) {
            T* row = acc + c * g.npos + y * g.wp;
            std::copy(dense + (c * g.h + y) * g.w, dense + (c * g.h + y + 1) * g.w, row);
            std::fill(row + g.w, row + g.wp, T(0));
        }
}

template <typename T>
void store_grid(const T* acc, std::size_t channels, const ConvGeom& g, T* dense) {
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < g.h; ++y) {
            const T* row = acc + c * g.npos + y * g.wp;
            std::copy(row, row + g.w, dense + (c * g.h + y) * g.w);
        }
}

// dense[c] (+)= conv(img, weight) for one image; `acc` holds the running sums
// on the q grid and must be pre-loaded by the caller.
template <typename T>
void conv_image(const T* img, std::size_t cin, std::size_t cout, const T* weight, const ConvGeom& g, T* acc,
                std::vector<T>& padded, std::vector<const T*>& arows, std::vector<const T*>& brows) {
    const T* planes = img;
    if (g.pad > 0) {
        padded.resize(g.padded_size(cin));
        pad_planes(img, cin, g, padded.data());
        planes = padded.data();
    }
    tap_rows(planes, cin, g, brows);
    matrix_rows(weight, cout, cin * g.k * g.k, arows);
    gemm_rows_acc<T>(cout, g.npos, cin * g.k * g.k, arows.data(), brows.data(), acc, g.npos);
}

template <typename T>
struct ConvScratch {
    std::vector<T> padded, acc, aux, flipped;
    std::vector<const T*> arows, brows;
};

template <typename T>
ConvScratch<T>& conv_scratch() {
    thread_local ConvScratch<T> s;
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary(Binary::kAdd, "add", a, b);
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary(Binary::kSub, "sub", a, b);
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary(Binary::kMul, "mul", a, b);
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
    const auto av = a.data();
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
    return make_result<T>("scale", a.shape(), std::move(out), {a.node()}, [factor](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        vec_axpy(factor, self.grad.data(), g.data(), g.size());
    });
}

template <typename T>
BasicTensor<T> pow(const BasicTensor<T>& base, const BasicTensor<T>& exponent) {
    check_broadcast("pow", base.shape(), exponent.shape());
    for (auto e : exponent.data())
        if (!(e > T(0))) throw DomainError("pow: exponent must be > 0, got " + std::to_string(e));
    const auto bv = base.data();
    const auto ev = exponent.data();
    const T floor = static_cast<T>(kPowBaseFloor);
    std::vector<T> out(bv.size());
    for_each_broadcast(base.shape(), exponent.shape(), [&](std::size_t i, std::size_t j) {
        out[i] = std::pow(std::max(bv[i], floor), ev[j]);
    });
    return make_result<T>("pow", base.shape(), std::move(out), {base.node(), exponent.node()}, [floor](Node<T>& self) {
        auto& pb = *self.parents[0];
        auto& pe = *self.parents[1];
        const auto& g = self.grad;
        const auto& y = self.value;
        if (pb.requires_grad) {
            auto& gb = pb.ensure_grad();
            for_each_broadcast(pb.shape, pe.shape, [&](std::size_t i, std::size_t j) {
                if (pb.value[i] > floor) {
                    const T e = pe.value[j];
                    gb[i] += g[i] * e * std::pow(pb.value[i], e - T(1));
                }
            });
        }
        if (pe.requires_grad) {
            auto& ge = pe.ensure_grad();
            for_each_broadcast(pb.shape, pe.shape, [&](std::size_t i, std::size_t j) {
                ge[j] += g[i] * y[i] * std::log(std::max(pb.value[i], floor));
            });
        }
    });
}

template <typename T>
BasicTensor<T> pow(const BasicTensor<T>& base, T exponent) {
    Shape ones(base.rank(), 1);
    return pow(base, BasicTensor<T>::full(ones, exponent));
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
    const auto xv = x.data();
    std::vector<T> out(xv.size());
    vec_relu(xv.data(), out.data(), out.size());
    return make_result<T>("relu", x.shape(), std::move(out), {x.node()}, [](Node<T>& self) {
        auto& p = *self.parents[0];
        vec_relu_backward(p.value.data(), self.grad.data(), p.ensure_grad().data(), self.grad.size());
    });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
    const auto xv = x.data();
    std::vector<T> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-xv[i]));
    return make_result<T>("sigmoid", x.shape(), std::move(out), {x.node()}, [](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        const auto& y = self.value;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i] * (T(1) - y[i]);
    });
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
    require_rank4("conv2d input", x.shape());
    require_rank4("conv2d weight", weight.shape());
    const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t cout = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != cin)
        throw ShapeError("conv2d: weight " + shape_str(weight.shape()) + " expects " + std::to_string(weight.dim(1)) +
                         " input channels, got " + std::to_string(cin));
    if (weight.dim(3) != k || k % 2 == 0) throw ShapeError("conv2d: kernel must be square with odd size");
    if (bias.shape() != Shape{cout})
        throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()) + " does not match " + std::to_string(cout) +
                         " output channels");

    const std::size_t hw = h * w;
    const std::size_t kdim = cin * k * k;
    const ConvGeom geom(h, w, k);
    const auto xv = x.data();
    const auto wv = weight.data();
    const auto bv = bias.data();
    std::vector<T> out(batch * cout * hw);
    auto& sc = conv_scratch<T>();
    sc.acc.resize(cout * geom.npos);
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t co = 0; co < cout; ++co)
            std::fill(sc.acc.begin() + co * geom.npos, sc.acc.begin() + (co + 1) * geom.npos, bv[co]);
        conv_image(xv.data() + n * cin * hw, cin, cout, wv.data(), geom, sc.acc.data(), sc.padded, sc.arows,
                   sc.brows);
        store_grid(sc.acc.data(), cout, geom, out.data() + n * cout * hw);
    }

    auto backward_fn = [batch, cin, cout, k, hw, kdim, geom](Node<T>& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        auto& pb = *self.parents[2];
        const auto& g = self.grad;
        auto& sc = conv_scratch<T>();
        if (pb.requires_grad) {
            auto& gb = pb.ensure_grad();
            for (std::size_t n = 0; n < batch; ++n)
                for (std::size_t co = 0; co < cout; ++co) {
                    const T* gp = g.data() + (n * cout + co) * hw;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < hw; ++i) acc += gp[i];
                    gb[co] += static_cast<T>(acc);
                }
        }
        if (pw.requires_grad) {
            // grad_w^T (kdim x cout) = sum_n taps_n (kdim x npos) * gridT(g_n) (npos x cout)
            std::vector<T> gwt(kdim * cout, T(0));
            sc.aux.resize(geom.npos * cout);
            for (std::size_t n = 0; n < batch; ++n) {
                const T* gn = g.data() + n * cout * hw;
                std::fill(sc.aux.begin(), sc.aux.end(), T(0));
                for (std::size_t co = 0; co < cout; ++co)
                    for (std::size_t y = 0; y < geom.h; ++y)
                        for (std::size_t xx = 0; xx < geom.w; ++xx)
                            sc.aux[(y * geom.wp + xx) * cout + co] = gn[(co * geom.h + y) * geom.w + xx];
                const T* img = px.value.data() + n * cin * hw;
                const T* planes = img;
                if (geom.pad > 0) {
                    sc.padded.resize(geom.padded_size(cin));
                    pad_planes(img, cin, geom, sc.padded.data());
                    planes = sc.padded.data();
                }
                tap_rows(planes, cin, geom, sc.arows);
                matrix_rows<T>(sc.aux.data(), geom.npos, cout, sc.brows);
                gemm_rows_acc<T>(kdim, cout, geom.npos, sc.arows.data(), sc.brows.data(), gwt.data(), cout);
            }
            auto& gw = pw.ensure_grad();
            for (std::size_t co = 0; co < cout; ++co)
                for (std::size_t j = 0; j < kdim; ++j) gw[co * kdim + j] += gwt[j * cout + co];
        }
        if (px.requires_grad) {
            // Input gradient is the correlation of g with the spatially flipped,
            // channel-transposed kernel.
            const std::size_t kk = k * k;
            sc.flipped.resize(cin * cout * kk);
            for (std::size_t co = 0; co < cout; ++co)
                for (std::size_t ci = 0; ci < cin; ++ci)
                    for (std::size_t t = 0; t < kk; ++t)
                        sc.flipped[(ci * cout + co) * kk + (kk - 1 - t)] = pw.value[(co * cin + ci) * kk + t];
            auto& gx = px.ensure_grad();
            sc.acc.resize(cin * geom.npos);
            for (std::size_t n = 0; n < batch; ++n) {
                T* gxn = gx.data() + n * cin * hw;
                load_grid(gxn, cin, geom, sc.acc.data());
                conv_image(g.data() + n * cout * hw, cout, cin, sc.flipped.data(), geom, sc.acc.data(), sc.padded,
                           sc.arows, sc.brows);
                store_grid(sc.acc.data(), cin, geom, gxn);
            }
        }
    };
    return make_result<T>("conv2d", Shape{batch, cout, h, w}, std::move(out), {x.node(), weight.node(), bias.node()},
                          std::move(backward_fn));
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x) {
    require_rank4("global_avg_pool", x.shape());
    const std::size_t planes = x.dim(0) * x.dim(1);
    const std::size_t hw = x.dim(2) * x.dim(3);
    const auto xv = x.data();
    std::vector<T> out(planes);
    for (std::size_t p = 0; p < planes; ++p) {
        double acc = 0.0;
        for (std::size_t i = 0; i < hw; ++i) acc += xv[p * hw + i];
        out[p] = static_cast<T>(acc / static_cast<double>(hw));
    }
    return make_result<T>("global_avg_pool", Shape{x.dim(0), x.dim(1), 1, 1}, std::move(out), {x.node()},
                          [planes, hw](Node<T>& self) {
                              auto& g = self.parents[0]->ensure_grad();
                              const T inv = T(1) / static_cast<T>(hw);
                              for (std::size_t p = 0; p < planes; ++p) {
                                  const T v = self.grad[p] * inv;
                                  for (std::size_t i = 0; i < hw; ++i) g[p * hw + i] += v;
                              }
                          });
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_rank4("concat_channels", a.shape());
    require_rank4("concat_channels", b.shape());
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw ShapeError("concat_channels: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const std::size_t batch = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<T> out(batch * (ca + cb) * hw);
    for (std::size_t n = 0; n < batch; ++n) {
        std::copy_n(av.data() + n * ca * hw, ca * hw, out.data() + n * (ca + cb) * hw);
        std::copy_n(bv.data() + n * cb * hw, cb * hw, out.data() + (n * (ca + cb) + ca) * hw);
    }
    return make_result<T>("concat_channels", Shape{batch, ca + cb, a.dim(2), a.dim(3)}, std::move(out),
                          {a.node(), b.node()}, [batch, ca, cb, hw](Node<T>& self) {
                              auto& pa = *self.parents[0];
                              auto& pb = *self.parents[1];
                              for (std::size_t n = 0; n < batch; ++n) {
                                  const T* g = self.grad.data() + n * (ca + cb) * hw;
                                  if (pa.requires_grad)
                                      vec_axpy(T(1), g, pa.ensure_grad().data() + n * ca * hw, ca * hw);
                                  if (pb.requires_grad)
                                      vec_axpy(T(1), g + ca * hw, pb.ensure_grad().data() + n * cb * hw, cb * hw);
                              }
                          });
}

template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, std::size_t begin, std::size_t count) {
    require_rank4("slice_channels", x.shape());
    const std::size_t batch = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    if (count == 0 || begin + count > c)
        throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") outside " + std::to_string(c) + " channels");
    const auto xv = x.data();
    std::vector<T> out(batch * count * hw);
    for (std::size_t n = 0; n < batch; ++n)
        std::copy_n(xv.data() + (n * c + begin) * hw, count * hw, out.data() + n * count * hw);
    return make_result<T>("slice_channels", Shape{batch, count, x.dim(2), x.dim(3)}, std::move(out), {x.node()},
                          [batch, c, begin, count, hw](Node<T>& self) {
                              auto& g = self.parents[0]->ensure_grad();
                              for (std::size_t n = 0; n < batch; ++n)
                                  vec_axpy(T(1), self.grad.data() + n * count * hw, g.data() + (n * c + begin) * hw,
                                           count * hw);
                          });
}

template <typename T>
BasicTensor<T> mse(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("mse: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const auto av = a.data();
    const auto bv = b.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
        acc += d * d;
    }
    const std::size_t n = av.size();
    return make_result<T>("mse", Shape{1}, {static_cast<T>(acc / static_cast<double>(n))}, {a.node(), b.node()},
                          [n](Node<T>& self) {
                              auto& pa = *self.parents[0];
                              auto& pb = *self.parents[1];
                              const T k = T(2) * self.grad[0] / static_cast<T>(n);
                              if (pa.requires_grad) {
                                  auto& g = pa.ensure_grad();
                                  for (std::size_t i = 0; i < n; ++i) g[i] += k * (pa.value[i] - pb.value[i]);
                              }
                              if (pb.requires_grad) {
                                  auto& g = pb.ensure_grad();
                                  for (std::size_t i = 0; i < n; ++i) g[i] -= k * (pa.value[i] - pb.value[i]);
                              }
                          });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
    double acc = 0.0;
    for (auto v : x.data()) acc += v;
    return make_result<T>("sum", Shape{1}, {static_cast<T>(acc)}, {x.node()}, [](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (auto& v : g) v += self.grad[0];
    });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
    double acc = 0.0;
    for (auto v : x.data()) acc += v;
    const std::size_t n = x.numel();
    return make_result<T>("mean", Shape{1}, {static_cast<T>(acc / static_cast<double>(n))}, {x.node()},
                          [n](Node<T>& self) {
                              auto& g = self.parents[0]->ensure_grad();
                              const T v = self.grad[0] / static_cast<T>(n);
                              for (auto& e : g) e += v;
                          });
}

template <typename T>
BasicTensor<T> stop_gradient(const BasicTensor<T>& x) {
    const auto xv = x.data();
    return make_result<T>("stop_gradient", x.shape(), std::vector<T>(xv.begin(), xv.end()), {}, {});
}

template <typename T>
BasicTensor<T> log_offset(const BasicTensor<T>& x, T offset) {
    const auto xv = x.data();
    std::vector<T> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T v = xv[i] + offset;
        if (!(v > T(0))) throw DomainError("log_offset: argument must be positive");
        out[i] = std::log(v);
    }
    return make_result<T>("log_offset", x.shape(), std::move(out), {x.node()}, [offset](Node<T>& self) {
        auto& p = *self.parents[0];
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / (p.value[i] + offset);
    });
}

template <typename T>
BasicTensor<T> luminance(const BasicTensor<T>& x) {
    require_rank4("luminance", x.shape());
    const std::size_t c = x.dim(1);
    if (c == 1) return slice_channels(x, 0, 1);
    if (c != 3) throw ShapeError("luminance: expected 1 or 3 channels, got " + std::to_string(c));
    static constexpr T kWeights[3] = {T(0.299), T(0.587), T(0.114)};
    const std::size_t batch = x.dim(0), hw = x.dim(2) * x.dim(3);
    const auto xv = x.data();
    std::vector<T> out(batch * hw);
    for (std::size_t n = 0; n < batch; ++n) {
        const T* r = xv.data() + n * 3 * hw;
        const T* g = r + hw;
        const T* b = g + hw;
        T* y = out.data() + n * hw;
        for (std::size_t i = 0; i < hw; ++i) y[i] = kWeights[0] * r[i] + kWeights[1] * g[i] + kWeights[2] * b[i];
    }
    return make_result<T>("luminance", Shape{batch, 1, x.dim(2), x.dim(3)}, std::move(out), {x.node()},
                          [batch, hw](Node<T>& self) {
                              auto& gx = self.parents[0]->ensure_grad();
                              for (std::size_t n = 0; n < batch; ++n)
                                  for (std::size_t ch = 0; ch < 3; ++ch)
                                      vec_axpy(kWeights[ch], self.grad.data() + n * hw, gx.data() + (n * 3 + ch) * hw,
                                               hw);
                          });
}

template <typename T>
BasicTensor<T> diff_x(const BasicTensor<T>& x) {
    if (x.rank() < 2 || x.shape().back() < 2)
        throw ShapeError("diff_x: width must be >= 2, got shape " + shape_str(x.shape()));
    const std::size_t w = x.shape().back();
    const std::size_t rows = x.numel() / w;
    const auto xv = x.data();
    std::vector<T> out(xv.size(), T(0));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j + 1 < w; ++j) out[r * w + j] = xv[r * w + j + 1] - xv[r * w + j];
    return make_result<T>("diff_x", x.shape(), std::move(out), {x.node()}, [rows, w](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j + 1 < w; ++j) {
                const T v = self.grad[r * w + j];
                g[r * w + j + 1] += v;
                g[r * w + j] -= v;
            }
    });
}

template <typename T>
BasicTensor<T> diff_y(const BasicTensor<T>& x) {
    if (x.rank() < 2 || x.shape()[x.rank() - 2] < 2)
        throw ShapeError("diff_y: height must be >= 2, got shape " + shape_str(x.shape()));
    const std::size_t w = x.shape().back();
    const std::size_t h = x.shape()[x.rank() - 2];
    const std::size_t planes = x.numel() / (h * w);
    const auto xv = x.data();
    std::vector<T> out(xv.size(), T(0));
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i + 1 < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                const std::size_t at = (p * h + i) * w + j;
                out[at] = xv[at + w] - xv[at];
            }
    return make_result<T>("diff_y", x.shape(), std::move(out), {x.node()}, [planes, h, w](Node<T>& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t p = 0; p < planes; ++p)
            for (std::size_t i = 0; i + 1 < h; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    const std::size_t at = (p * h + i) * w + j;
                    const T v = self.grad[at];
                    g[at + w] += v;
                    g[at] -= v;
                }
    });
}

template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& x, T lo, T hi) {
    const auto xv = x.data();
    std::vector<T> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(std::max(xv[i], lo), hi);
    return make_result<T>("clamp", x.shape(), std::move(out), {x.node()}, [lo, hi](Node<T>& self) {
        auto& p = *self.parents[0];
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (p.value[i] > lo && p.value[i] < hi) g[i] += self.grad[i];
    });
}

#define SELFEN_INSTANTIATE_OPS(T)                                                               \
    template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                  \
    template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                  \
    template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                  \
    template BasicTensor<T> scale(const BasicTensor<T>&, T);                                    \
    template BasicTensor<T> pow(const BasicTensor<T>&, const BasicTensor<T>&);                  \
    template BasicTensor<T> pow(const BasicTensor<T>&, T);                                      \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                        \
    template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                     \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
    template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                             \
    template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);      \
    template BasicTensor<T> slice_channels(const BasicTensor<T>&, std::size_t, std::size_t);    \
    template BasicTensor<T> mse(const BasicTensor<T>&, const BasicTensor<T>&);                  \
    template BasicTensor<T> mean(const BasicTensor<T>&);                                        \
    template BasicTensor<T> sum(const BasicTensor<T>&);                                         \
    template BasicTensor<T> stop_gradient(const BasicTensor<T>&);                               \
    template BasicTensor<T> log_offset(const BasicTensor<T>&, T);                               \
    template BasicTensor<T> luminance(const BasicTensor<T>&);                                   \
    template BasicTensor<T> diff_x(const BasicTensor<T>&);                                      \
    template BasicTensor<T> diff_y(const BasicTensor<T>&);                                      \
    template BasicTensor<T> clamp(const BasicTensor<T>&, T, T);

SELFEN_INSTANTIATE_OPS(float)
SELFEN_INSTANTIATE_OPS(double)

#undef SELFEN_INSTANTIATE_OPS

}  // namespace selfen
