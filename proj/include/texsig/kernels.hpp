#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "texsig/tensor.hpp"

// Differentiable layer kernels: 3x3 same-padding convolution, 2x2 max pool,
// 2x nearest-neighbor upsampling, dense affine, relu/sigmoid, mse.
//
// Two layers of API:
//   texsig::kernels  — pointer cores used by the hot training path. Loops are
//                      arranged so the innermost dimension is unit-stride.
//   texsig::ref      — naive per-pixel implementations kept as the reference
//                      the optimized cores are tested against.
//
// Per output element both paths accumulate taps in (ci, ky, kx) order.

#if defined(__GNUC__)
#define TEXSIG_NOINLINE __attribute__((noinline))
#else
#define TEXSIG_NOINLINE
#endif

namespace texsig::kernels {

// Dot product in 8 independent lanes so the loop vectorizes without
// reassociating a single accumulator chain. Summation order is fixed.
template <class T>
TEXSIG_NOINLINE T dot(const T* a, const T* b, int n) {
  T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
  int i = 0;
  for (; i + 8 <= n; i += 8)
    for (int l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  for (int l = 0; i < n; ++i, ++l) acc[l] += a[i] * b[i];
  const T s0 = acc[0] + acc[4];
  const T s1 = acc[1] + acc[5];
  const T s2 = acc[2] + acc[6];
  const T s3 = acc[3] + acc[7];
  return (s0 + s2) + (s1 + s3);
}

// out[co][y][x] = b[co] + sum_{ci,ky,kx} k[co][ci][ky][kx] * in[ci][y+ky-1][x+kx-1]
// Zero padding of 1: out-of-bounds taps contribute nothing. Each tap sweeps
// a shifted plane, restricted to the rows/columns where it lands in bounds.
template <class T>
void conv2d_fwd(const T* in, int cin, int h, int w, const T* k, const T* b,
                int cout, T* out) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int co = 0; co < cout; ++co)
    std::fill(out + co * plane, out + (co + 1) * plane, b[co]);
  for (int co = 0; co < cout; ++co) {
    T* op = out + co * plane;
    for (int ci = 0; ci < cin; ++ci) {
      const T* ip = in + ci * plane;
      const T* kp = k + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          const T kv = kp[ky * 3 + kx];
          for (int y = y0; y < y1; ++y) {
            T* orow = op + static_cast<std::size_t>(y) * w;
            const T* irow = ip + static_cast<std::size_t>(y + dy) * w + dx;
            for (int x = x0; x < x1; ++x) orow[x] += kv * irow[x];
          }
        }
      }
    }
  }
}

// Overwrites d_in, d_k, d_b.
template <class T>
void conv2d_bwd(const T* in, const T* k, const T* d_out, int cin, int h, int w,
                int cout, T* d_in, T* d_k, T* d_b) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::fill(d_in, d_in + cin * plane, T(0));
  std::fill(d_k, d_k + static_cast<std::size_t>(cout) * cin * 9, T(0));
  for (int co = 0; co < cout; ++co) {
    const T* gp = d_out + co * plane;
    T acc = T(0);
    for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
    d_b[co] = acc;
    for (int ci = 0; ci < cin; ++ci) {
      const T* ip = in + ci * plane;
      T* dip = d_in + ci * plane;
      const T* kp = k + (static_cast<std::size_t>(co) * cin + ci) * 9;
      T* dkp = d_k + (static_cast<std::size_t>(co) * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
          const T kv = kp[ky * 3 + kx];
          T kgrad = T(0);
          for (int y = y0; y < y1; ++y) {
            const T* grow = gp + static_cast<std::size_t>(y) * w;
            const T* irow = ip + static_cast<std::size_t>(y + dy) * w + dx;
            T* drow = dip + static_cast<std::size_t>(y + dy) * w + dx;
            for (int x = x0; x < x1; ++x) drow[x] += kv * grow[x];
            kgrad += dot(grow + x0, irow + x0, x1 - x0);
          }
          dkp[ky * 3 + kx] = kgrad;
        }
      }
    }
  }
}

// Non-overlapping 2x2 max; argmax holds the flat input index per output cell.
// Ties resolve to the first candidate in row-major scan order.
template <class T>
void maxpool2_fwd(const T* in, int c, int h, int w, T* out, int* argmax) {
  const int oh = h / 2, ow = w / 2;
  for (int ci = 0; ci < c; ++ci) {
    const T* ip = in + static_cast<std::size_t>(ci) * h * w;
    T* op = out + static_cast<std::size_t>(ci) * oh * ow;
    int* ap = argmax + static_cast<std::size_t>(ci) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        int best = (2 * y) * w + 2 * x;
        T bv = ip[best];
        const int cand[3] = {(2 * y) * w + 2 * x + 1, (2 * y + 1) * w + 2 * x,
                             (2 * y + 1) * w + 2 * x + 1};
        for (int idx : cand) {
          if (ip[idx] > bv) {
            bv = ip[idx];
            best = idx;
          }
        }
        op[y * ow + x] = bv;
        ap[y * ow + x] = best + ci * h * w;
      }
    }
  }
}

template <class T>
void maxpool2_bwd(const T* d_out, const int* argmax, int c, int h, int w,
                  T* d_in) {
  const std::size_t n_out = static_cast<std::size_t>(c) * (h / 2) * (w / 2);
  std::fill(d_in, d_in + static_cast<std::size_t>(c) * h * w, T(0));
  for (std::size_t i = 0; i < n_out; ++i) d_in[argmax[i]] += d_out[i];
}

// Nearest-neighbor replication of each pixel into a 2x2 block.
template <class T>
void upsample2_fwd(const T* in, int c, int h, int w, T* out) {
  const int oh = 2 * h, ow = 2 * w;
  for (int ci = 0; ci < c; ++ci) {
    const T* ip = in + static_cast<std::size_t>(ci) * h * w;
    T* op = out + static_cast<std::size_t>(ci) * oh * ow;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const T v = ip[y * w + x];
        op[(2 * y) * ow + 2 * x] = v;
        op[(2 * y) * ow + 2 * x + 1] = v;
        op[(2 * y + 1) * ow + 2 * x] = v;
        op[(2 * y + 1) * ow + 2 * x + 1] = v;
      }
    }
  }
}

// Sums the four upstream gradients per source pixel.
template <class T>
void upsample2_bwd(const T* d_out, int c, int h, int w, T* d_in) {
  const int oh = 2 * h, ow = 2 * w;
  for (int ci = 0; ci < c; ++ci) {
    const T* gp = d_out + static_cast<std::size_t>(ci) * oh * ow;
    T* dp = d_in + static_cast<std::size_t>(ci) * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        dp[y * w + x] = (gp[(2 * y) * ow + 2 * x] + gp[(2 * y) * ow + 2 * x + 1]) +
                        (gp[(2 * y + 1) * ow + 2 * x] + gp[(2 * y + 1) * ow + 2 * x + 1]);
  }
}

// out[m] = b[m] + W[m,:] . in
template <class T>
void dense_fwd(const T* in, const T* wgt, const T* b, int m, int n, T* out) {
  for (int i = 0; i < m; ++i) out[i] = b[i] + dot(wgt + static_cast<std::size_t>(i) * n, in, n);
}

// Overwrites d_in, d_w, d_b.
template <class T>
void dense_bwd(const T* in, const T* wgt, const T* d_out, int m, int n, T* d_in,
               T* d_w, T* d_b) {
  std::fill(d_in, d_in + n, T(0));
  for (int i = 0; i < m; ++i) {
    const T g = d_out[i];
    d_b[i] = g;
    const T* wrow = wgt + static_cast<std::size_t>(i) * n;
    T* dwrow = d_w + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      d_in[j] += g * wrow[j];
      dwrow[j] = g * in[j];
    }
  }
}

template <class T>
void relu_fwd(const T* in, std::size_t n, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

// Derivative from the stored activation; act == 0 (including pre-activation
// exactly 0) propagates nothing.
template <class T>
void relu_bwd(const T* act, const T* d_out, std::size_t n, T* d_in) {
  for (std::size_t i = 0; i < n; ++i) d_in[i] = act[i] > T(0) ? d_out[i] : T(0);
}

template <class T>
void sigmoid_fwd(const T* in, std::size_t n, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = T(1) / (T(1) + std::exp(-in[i]));
}

template <class T>
void sigmoid_bwd(const T* act, const T* d_out, std::size_t n, T* d_in) {
  for (std::size_t i = 0; i < n; ++i) d_in[i] = d_out[i] * act[i] * (T(1) - act[i]);
}

// Mean over all elements of the squared difference. Accumulated in double.
template <class T>
double mse(const T* pred, const T* target, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(n);
}

// d/dpred = 2 (pred - target) / n, scaled by `scale`.
template <class T>
void mse_grad(const T* pred, const T* target, std::size_t n, T scale, T* d_pred) {
  const T f = T(2) * scale / static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) d_pred[i] = f * (pred[i] - target[i]);
}

}  // namespace texsig::kernels

namespace texsig::ref {

// Naive bounds-checked convolution, the reference for kernels::conv2d_fwd.
template <class T>
void conv2d_fwd(const T* in, int cin, int h, int w, const T* k, const T* b,
                int cout, T* out) {
  for (int co = 0; co < cout; ++co) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        T acc = b[co];
        for (int ci = 0; ci < cin; ++ci)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = y + ky - 1, ix = x + kx - 1;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += k[((static_cast<std::size_t>(co) * cin + ci) * 3 + ky) * 3 + kx] *
                     in[(static_cast<std::size_t>(ci) * h + iy) * w + ix];
            }
        out[(static_cast<std::size_t>(co) * h + y) * w + x] = acc;
      }
    }
  }
}

template <class T>
void conv2d_bwd(const T* in, const T* k, const T* d_out, int cin, int h, int w,
                int cout, T* d_in, T* d_k, T* d_b) {
  std::fill(d_in, d_in + static_cast<std::size_t>(cin) * h * w, T(0));
  std::fill(d_k, d_k + static_cast<std::size_t>(cout) * cin * 9, T(0));
  std::fill(d_b, d_b + cout, T(0));
  for (int co = 0; co < cout; ++co) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const T g = d_out[(static_cast<std::size_t>(co) * h + y) * w + x];
        d_b[co] += g;
        for (int ci = 0; ci < cin; ++ci)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = y + ky - 1, ix = x + kx - 1;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              const std::size_t ki = ((static_cast<std::size_t>(co) * cin + ci) * 3 + ky) * 3 + kx;
              const std::size_t ii = (static_cast<std::size_t>(ci) * h + iy) * w + ix;
              d_in[ii] += k[ki] * g;
              d_k[ki] += in[ii] * g;
            }
      }
    }
  }
}

template <class T>
void dense_fwd(const T* in, const T* wgt, const T* b, int m, int n, T* out) {
  for (int i = 0; i < m; ++i) {
    T acc = b[i];
    for (int j = 0; j < n; ++j) acc += wgt[static_cast<std::size_t>(i) * n + j] * in[j];
    out[i] = acc;
  }
}

}  // namespace texsig::ref

namespace texsig::ops {

// Tensor-level wrappers with shape validation. These are the public layer
// API; the trainer calls the pointer cores directly on preallocated buffers.

template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels,
                 const Tensor<T>& bias) {
  if (input.shape.size() != 3)
    throw ShapeError("conv2d input must be CxHxW, got " + shape_str(input.shape));
  if (kernels.shape.size() != 4 || kernels.shape[2] != 3 || kernels.shape[3] != 3)
    throw ShapeError("conv2d kernels must be Cout x Cin x 3 x 3, got " +
                     shape_str(kernels.shape));
  if (kernels.shape[1] != input.shape[0])
    throw ShapeError("conv2d channel mismatch: input " + shape_str(input.shape) +
                     " vs kernels " + shape_str(kernels.shape));
  if (bias.shape != std::vector<int>{kernels.shape[0]})
    throw ShapeError("conv2d bias must be length Cout");
  Tensor<T> out({kernels.shape[0], input.shape[1], input.shape[2]});
  kernels::conv2d_fwd(input.data.data(), input.shape[0], input.shape[1],
                      input.shape[2], kernels.data.data(), bias.data.data(),
                      kernels.shape[0], out.data.data());
  return out;
}

template <class T>
LayerGrad<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernels,
                             const Tensor<T>& d_out) {
  if (d_out.shape != std::vector<int>{kernels.shape[0], input.shape[1], input.shape[2]})
    throw ShapeError("conv2d_backward upstream gradient shape mismatch");
  LayerGrad<T> g;
  g.d_input = Tensor<T>(input.shape);
  g.d_params = {Tensor<T>(kernels.shape), Tensor<T>({kernels.shape[0]})};
  kernels::conv2d_bwd(input.data.data(), kernels.data.data(), d_out.data.data(),
                      input.shape[0], input.shape[1], input.shape[2],
                      kernels.shape[0], g.d_input.data.data(),
                      g.d_params[0].data.data(), g.d_params[1].data.data());
  return g;
}

template <class T>
struct PoolResult {
  Tensor<T> out;
  std::vector<int> argmax;
};

template <class T>
PoolResult<T> maxpool2(const Tensor<T>& input) {
  if (input.shape.size() != 3)
    throw ShapeError("maxpool2 input must be CxHxW");
  if (input.shape[1] % 2 != 0 || input.shape[2] % 2 != 0)
    throw ShapeError("maxpool2 requires even H and W, got " + shape_str(input.shape));
  PoolResult<T> r;
  r.out = Tensor<T>({input.shape[0], input.shape[1] / 2, input.shape[2] / 2});
  r.argmax.resize(r.out.numel());
  kernels::maxpool2_fwd(input.data.data(), input.shape[0], input.shape[1],
                        input.shape[2], r.out.data.data(), r.argmax.data());
  return r;
}

template <class T>
Tensor<T> maxpool2_backward(const Tensor<T>& d_out, const std::vector<int>& argmax,
                            const std::vector<int>& input_shape) {
  Tensor<T> d_in(input_shape);
  kernels::maxpool2_bwd(d_out.data.data(), argmax.data(), input_shape[0],
                        input_shape[1], input_shape[2], d_in.data.data());
  return d_in;
}

template <class T>
Tensor<T> upsample2(const Tensor<T>& input) {
  if (input.shape.size() != 3)
    throw ShapeError("upsample2 input must be CxHxW");
  Tensor<T> out({input.shape[0], input.shape[1] * 2, input.shape[2] * 2});
  kernels::upsample2_fwd(input.data.data(), input.shape[0], input.shape[1],
                         input.shape[2], out.data.data());
  return out;
}

template <class T>
Tensor<T> upsample2_backward(const Tensor<T>& d_out, const std::vector<int>& input_shape) {
  Tensor<T> d_in(input_shape);
  kernels::upsample2_bwd(d_out.data.data(), input_shape[0], input_shape[1],
                         input_shape[2], d_in.data.data());
  return d_in;
}

template <class T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights,
                const Tensor<T>& bias) {
  if (input.shape.size() != 1 || weights.shape.size() != 2 ||
      weights.shape[1] != input.shape[0] ||
      bias.shape != std::vector<int>{weights.shape[0]})
    throw ShapeError("dense shape mismatch: input " + shape_str(input.shape) +
                     ", weights " + shape_str(weights.shape));
  Tensor<T> out({weights.shape[0]});
  kernels::dense_fwd(input.data.data(), weights.data.data(), bias.data.data(),
                     weights.shape[0], weights.shape[1], out.data.data());
  return out;
}

template <class T>
LayerGrad<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights,
                            const Tensor<T>& d_out) {
  if (d_out.shape != std::vector<int>{weights.shape[0]})
    throw ShapeError("dense_backward upstream gradient shape mismatch");
  LayerGrad<T> g;
  g.d_input = Tensor<T>(input.shape);
  g.d_params = {Tensor<T>(weights.shape), Tensor<T>({weights.shape[0]})};
  kernels::dense_bwd(input.data.data(), weights.data.data(), d_out.data.data(),
                     weights.shape[0], weights.shape[1], g.d_input.data.data(),
                     g.d_params[0].data.data(), g.d_params[1].data.data());
  return g;
}

template <class T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out(input.shape);
  kernels::relu_fwd(input.data.data(), input.numel(), out.data.data());
  return out;
}

template <class T>
Tensor<T> relu_backward(const Tensor<T>& activation, const Tensor<T>& d_out) {
  Tensor<T> d_in(activation.shape);
  kernels::relu_bwd(activation.data.data(), d_out.data.data(), activation.numel(),
                    d_in.data.data());
  return d_in;
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& input) {
  Tensor<T> out(input.shape);
  kernels::sigmoid_fwd(input.data.data(), input.numel(), out.data.data());
  return out;
}

template <class T>
Tensor<T> sigmoid_backward(const Tensor<T>& activation, const Tensor<T>& d_out) {
  Tensor<T> d_in(activation.shape);
  kernels::sigmoid_bwd(activation.data.data(), d_out.data.data(),
                       activation.numel(), d_in.data.data());
  return d_in;
}

template <class T>
double mse(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target))
    throw ShapeError("mse shape mismatch: " + shape_str(pred.shape) + " vs " +
                     shape_str(target.shape));
  return kernels::mse(pred.data.data(), target.data.data(), pred.numel());
}

template <class T>
Tensor<T> mse_backward(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target)) throw ShapeError("mse shape mismatch");
  Tensor<T> d(pred.shape);
  kernels::mse_grad(pred.data.data(), target.data.data(), pred.numel(), T(1),
                    d.data.data());
  return d;
}

}  // namespace texsig::ops
