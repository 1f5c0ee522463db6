#pragma once

#include <algorithm>
#include <cstddef>
#include <span>

namespace shield::nn::kernels {

// Dot product with eight independent partial sums so the loop vectorizes
// without reassociation flags. The summation order is fixed, so results are
// reproducible for a given build.
inline double dot(const double* __restrict a, const double* __restrict b, int n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  int i = 0;
  for (; i + 8 <= n; i += 8)
    for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

inline double sum(const double* a, int n) {
  double acc[4] = {0, 0, 0, 0};
  int i = 0;
  for (; i + 4 <= n; i += 4)
    for (int j = 0; j < 4; ++j) acc[j] += a[i + j];
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i];
  return (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail;
}

// y += a * x
inline void axpy(double* __restrict y, double a, const double* __restrict x, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

struct Conv1dGeom {
  int in_ch, in_len, out_ch, kernel, stride, pad, dilation;

  int out_len() const { return (in_len + 2 * pad - dilation * (kernel - 1) - 1) / stride + 1; }

  // Output positions t for which t*stride + k*dilation - pad lies in [0, in_len).
  std::pair<int, int> valid_range(int k) const {
    const int off = k * dilation - pad;
    int lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
    const int last = in_len - 1 - off;
    int hi = last < 0 ? 0 : last / stride + 1;
    hi = std::min(hi, out_len());
    lo = std::min(lo, hi);
    return {lo, hi};
  }
};

// out[co][t] = b[co] + sum_{ci,k} w[co][ci][k] * in[ci][t*s + k*d - p]
inline void conv1d_forward(const Conv1dGeom& g, const double* in, const double* w, const double* b, double* out) {
  const int lout = g.out_len();
  const bool strided = g.stride > 1 && g.dilation == 1 && g.kernel >= 8;
  for (int co = 0; co < g.out_ch; ++co) {
    double* orow = out + static_cast<std::size_t>(co) * lout;
    std::fill(orow, orow + lout, b ? b[co] : 0.0);
    for (int ci = 0; ci < g.in_ch; ++ci) {
      const double* irow = in + static_cast<std::size_t>(ci) * g.in_len;
      const double* wk = w + (static_cast<std::size_t>(co) * g.in_ch + ci) * g.kernel;
      if (strided) {
        // Each output is a short contiguous dot product over the kernel.
        for (int t = 0; t < lout; ++t) {
          const int base = t * g.stride - g.pad;
          const int k0 = std::max(0, -base), k1 = std::min(g.kernel, g.in_len - base);
          if (k1 > k0) orow[t] += dot(wk + k0, irow + base + k0, k1 - k0);
        }
        continue;
      }
      for (int k = 0; k < g.kernel; ++k) {
        const auto [lo, hi] = g.valid_range(k);
        const int off = k * g.dilation - g.pad;
        if (g.stride == 1) {
          axpy(orow + lo, wk[k], irow + off + lo, hi - lo);
        } else {
          for (int t = lo; t < hi; ++t) orow[t] += wk[k] * irow[t * g.stride + off];
        }
      }
    }
  }
}

// Accumulates gradients; any of gin/gw/gb may be null.
inline void conv1d_backward(const Conv1dGeom& g, const double* in, const double* w, const double* gout, double* gin,
                            double* gw, double* gb) {
  const int lout = g.out_len();
  const bool strided = g.stride > 1 && g.dilation == 1 && g.kernel >= 8;
  for (int co = 0; co < g.out_ch; ++co) {
    const double* grow = gout + static_cast<std::size_t>(co) * lout;
    if (gb) gb[co] += sum(grow, lout);
    for (int ci = 0; ci < g.in_ch; ++ci) {
      const double* irow = in + static_cast<std::size_t>(ci) * g.in_len;
      double* girow = gin ? gin + static_cast<std::size_t>(ci) * g.in_len : nullptr;
      const std::size_t widx = (static_cast<std::size_t>(co) * g.in_ch + ci) * g.kernel;
      if (strided) {
        for (int t = 0; t < lout; ++t) {
          const double gv = grow[t];
          if (gv == 0.0) continue;
          const int base = t * g.stride - g.pad;
          const int k0 = std::max(0, -base), k1 = std::min(g.kernel, g.in_len - base);
          if (k1 <= k0) continue;
          if (gw) axpy(gw + widx + k0, gv, irow + base + k0, k1 - k0);
          if (girow) axpy(girow + base + k0, gv, w + widx + k0, k1 - k0);
        }
        continue;
      }
      for (int k = 0; k < g.kernel; ++k) {
        const auto [lo, hi] = g.valid_range(k);
        const int off = k * g.dilation - g.pad;
        if (g.stride == 1) {
          if (gw) gw[widx + k] += dot(grow + lo, irow + off + lo, hi - lo);
          if (girow) axpy(girow + off + lo, w[widx + k], grow + lo, hi - lo);
        } else {
          double acc = 0.0;
          for (int t = lo; t < hi; ++t) acc += grow[t] * irow[t * g.stride + off];
          if (gw) gw[widx + k] += acc;
          if (girow)
            for (int t = lo; t < hi; ++t) girow[t * g.stride + off] += w[widx + k] * grow[t];
        }
      }
    }
  }
}

// Stride 1, zero "same" padding of kernel/2 in both axes.
struct Conv2dGeom {
  int in_ch, height, width, out_ch, kh, kw;
  int pad_h() const { return kh / 2; }
  int pad_w() const { return kw / 2; }
};

inline void conv2d_forward(const Conv2dGeom& g, const double* in, const double* w, const double* b, double* out) {
  const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
  for (int co = 0; co < g.out_ch; ++co) {
    double* oplane = out + co * plane;
    std::fill(oplane, oplane + plane, b ? b[co] : 0.0);
    for (int ci = 0; ci < g.in_ch; ++ci) {
      const double* iplane = in + ci * plane;
      for (int dy = 0; dy < g.kh; ++dy) {
        const int oy = dy - g.pad_h();
        const int ylo = std::max(0, -oy), yhi = std::min(g.height, g.height - oy);
        for (int dx = 0; dx < g.kw; ++dx) {
          const int ox = dx - g.pad_w();
          const int xlo = std::max(0, -ox), xhi = std::min(g.width, g.width - ox);
          const double wv = w[((static_cast<std::size_t>(co) * g.in_ch + ci) * g.kh + dy) * g.kw + dx];
          for (int y = ylo; y < yhi; ++y) {
            double* orow = oplane + static_cast<std::size_t>(y) * g.width;
            const double* irow = iplane + static_cast<std::size_t>(y + oy) * g.width + ox;
            axpy(orow + xlo, wv, irow + xlo, xhi - xlo);
          }
        }
      }
    }
  }
}

inline void conv2d_backward(const Conv2dGeom& g, const double* in, const double* w, const double* gout, double* gin,
                            double* gw, double* gb) {
  const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
  for (int co = 0; co < g.out_ch; ++co) {
    const double* gplane = gout + co * plane;
    if (gb) gb[co] += sum(gplane, static_cast<int>(plane));
    for (int ci = 0; ci < g.in_ch; ++ci) {
      const double* iplane = in + ci * plane;
      double* giplane = gin ? gin + ci * plane : nullptr;
      for (int dy = 0; dy < g.kh; ++dy) {
        const int oy = dy - g.pad_h();
        const int ylo = std::max(0, -oy), yhi = std::min(g.height, g.height - oy);
        for (int dx = 0; dx < g.kw; ++dx) {
          const int ox = dx - g.pad_w();
          const int xlo = std::max(0, -ox), xhi = std::min(g.width, g.width - ox);
          const std::size_t widx = ((static_cast<std::size_t>(co) * g.in_ch + ci) * g.kh + dy) * g.kw + dx;
          const double wv = w[widx];
          double acc = 0.0;
          for (int y = ylo; y < yhi; ++y) {
            const double* grow = gplane + static_cast<std::size_t>(y) * g.width;
            const std::size_t ioff = static_cast<std::size_t>(y + oy) * g.width + ox;
            if (gw) acc += dot(grow + xlo, iplane + ioff + xlo, xhi - xlo);
            if (giplane) axpy(giplane + ioff + xlo, wv, grow + xlo, xhi - xlo);
          }
          if (gw) gw[widx] += acc;
        }
      }
    }
  }
}

}  // namespace shield::nn::kernels
