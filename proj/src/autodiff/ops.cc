#include "pdistill/autodiff/ops.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pdistill/common/error.h"

namespace pdistill::ad {

namespace {

void require_2d(const char* op, Var x) {
  if (x.shape().size() != 2) {
    throw Error(std::string(op) + ": expected a 2-D tensor, got " + shape_str(x.shape()));
  }
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw Error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                " vs " + shape_str(b.shape()));
  }
}

template <typename F>
Var unary(const char* op, Var x, F&& f_and_df) {
  const auto& xv = x.value();
  std::vector<double> y(xv.size()), dy(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    auto [v, d] = f_and_df(xv[i]);
    y[i] = v;
    dy[i] = d;
  }
  return x.graph().make(op, x.shape(), std::move(y), {x},
                        [x, dy = std::move(dy)](Graph& g, const std::vector<double>& og) {
                          auto& gx = g.grad_buffer(x);
                          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += og[i] * dy[i];
                        });
}

}  // namespace

Var matmul(Var a, Var b) {
  require_2d("matmul", a);
  require_2d("matmul", b);
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw Error("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                shape_str(b.shape()));
  }
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    double* ci = c.data() + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double aip = av[static_cast<std::size_t>(i) * k + p];
      if (aip == 0.0) continue;
      const double* bp = bv.data() + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
  return a.graph().make("matmul", {m, n}, std::move(c), {a, b},
                        [a, b, m, k, n](Graph& g, const std::vector<double>& og) {
                          const auto& av = a.value();
                          const auto& bv = b.value();
                          if (a.requires_grad()) {
                            auto& ga = g.grad_buffer(a);
                            for (int i = 0; i < m; ++i) {
                              const double* oi = og.data() + static_cast<std::size_t>(i) * n;
                              for (int p = 0; p < k; ++p) {
                                const double* bp = bv.data() + static_cast<std::size_t>(p) * n;
                                double s = 0.0;
                                for (int j = 0; j < n; ++j) s += oi[j] * bp[j];
                                ga[static_cast<std::size_t>(i) * k + p] += s;
                              }
                            }
                          }
                          if (b.requires_grad()) {
                            auto& gb = g.grad_buffer(b);
                            for (int i = 0; i < m; ++i) {
                              const double* oi = og.data() + static_cast<std::size_t>(i) * n;
                              for (int p = 0; p < k; ++p) {
                                const double aip = av[static_cast<std::size_t>(i) * k + p];
                                double* gp = gb.data() + static_cast<std::size_t>(p) * n;
                                for (int j = 0; j < n; ++j) gp[j] += aip * oi[j];
                              }
                            }
                          }
                        });
}

Var transpose(Var a) {
  require_2d("transpose", a);
  const int m = a.dim(0), n = a.dim(1);
  const auto& av = a.value();
  std::vector<double> t(av.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) t[static_cast<std::size_t>(j) * m + i] = av[static_cast<std::size_t>(i) * n + j];
  return a.graph().make("transpose", {n, m}, std::move(t), {a},
                        [a, m, n](Graph& g, const std::vector<double>& og) {
                          auto& ga = g.grad_buffer(a);
                          for (int i = 0; i < m; ++i)
                            for (int j = 0; j < n; ++j)
                              ga[static_cast<std::size_t>(i) * n + j] += og[static_cast<std::size_t>(j) * m + i];
                        });
}

Var reshape(Var a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw Error("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  return a.graph().make("reshape", std::move(shape), a.value(), {a},
                        [a](Graph& g, const std::vector<double>& og) { g.accumulate(a, og); });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  std::vector<double> y(a.value());
  const auto& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return a.graph().make("add", a.shape(), std::move(y), {a, b},
                        [a, b](Graph& g, const std::vector<double>& og) {
                          g.accumulate(a, og);
                          g.accumulate(b, og);
                        });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  std::vector<double> y(a.value());
  const auto& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return a.graph().make("sub", a.shape(), std::move(y), {a, b},
                        [a, b](Graph& g, const std::vector<double>& og) {
                          g.accumulate(a, og);
                          if (b.requires_grad()) {
                            auto& gb = g.grad_buffer(b);
                            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= og[i];
                          }
                        });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  std::vector<double> y(a.value());
  const auto& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return a.graph().make("mul", a.shape(), std::move(y), {a, b},
                        [a, b](Graph& g, const std::vector<double>& og) {
                          if (a.requires_grad()) {
                            auto& ga = g.grad_buffer(a);
                            const auto& bv = b.value();
                            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og[i] * bv[i];
                          }
                          if (b.requires_grad()) {
                            auto& gb = g.grad_buffer(b);
                            const auto& av = a.value();
                            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += og[i] * av[i];
                          }
                        });
}

Var scale(Var a, double s) {
  std::vector<double> y(a.value());
  for (double& v : y) v *= s;
  return a.graph().make("scale", a.shape(), std::move(y), {a},
                        [a, s](Graph& g, const std::vector<double>& og) {
                          auto& ga = g.grad_buffer(a);
                          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og[i] * s;
                        });
}

Var add_bias(Var x, Var bias) {
  require_2d("add_bias", x);
  const int T = x.dim(0), C = x.dim(1);
  if (bias.size() != static_cast<std::size_t>(C)) {
    throw Error("add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                shape_str(x.shape()));
  }
  std::vector<double> y(x.value());
  const auto& bv = bias.value();
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < C; ++c) y[static_cast<std::size_t>(t) * C + c] += bv[c];
  return x.graph().make("add_bias", x.shape(), std::move(y), {x, bias},
                        [x, bias, T, C](Graph& g, const std::vector<double>& og) {
                          g.accumulate(x, og);
                          if (bias.requires_grad()) {
                            auto& gb = g.grad_buffer(bias);
                            for (int t = 0; t < T; ++t)
                              for (int c = 0; c < C; ++c) gb[c] += og[static_cast<std::size_t>(t) * C + c];
                          }
                        });
}

Var sigmoid(Var x) {
  return unary("sigmoid", x, [](double v) {
    const double s = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    return std::pair{s, s * (1.0 - s)};
  });
}

Var tanh(Var x) {
  return unary("tanh", x, [](double v) {
    const double t = std::tanh(v);
    return std::pair{t, 1.0 - t * t};
  });
}

Var gelu(Var x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kA = 0.044715;
  return unary("gelu", x, [](double v) {
    const double u = kC * (v + kA * v * v * v);
    const double t = std::tanh(u);
    const double y = 0.5 * v * (1.0 + t);
    const double dy = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * v * v);
    return std::pair{y, dy};
  });
}

Var softmax_over_time(Var x) {
  const auto& xv = x.value();
  if (xv.empty()) throw Error("softmax_over_time: empty input");
  const double mx = *std::max_element(xv.begin(), xv.end());
  std::vector<double> y(xv.size());
  double z = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    y[i] = std::exp(xv[i] - mx);
    z += y[i];
  }
  for (double& v : y) v /= z;
  return x.graph().make("softmax", x.shape(), y, {x},
                        [x, y](Graph& g, const std::vector<double>& og) {
                          double dot = 0.0;
                          for (std::size_t i = 0; i < y.size(); ++i) dot += og[i] * y[i];
                          auto& gx = g.grad_buffer(x);
                          for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (og[i] - dot);
                        });
}

Var normalize_sum(Var x) {
  const auto& xv = x.value();
  double s = 0.0;
  for (double v : xv) s += v;
  if (s == 0.0) throw Error("normalize_sum: input sums to zero");
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] / s;
  return x.graph().make("normalize_sum", x.shape(), y, {x},
                        [x, s, y](Graph& g, const std::vector<double>& og) {
                          double dot = 0.0;
                          for (std::size_t i = 0; i < y.size(); ++i) dot += og[i] * y[i];
                          auto& gx = g.grad_buffer(x);
                          for (std::size_t i = 0; i < y.size(); ++i) gx[i] += (og[i] - dot) / s;
                        });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value()) s += v;
  return x.graph().make("sum", {1}, {s}, {x}, [x](Graph& g, const std::vector<double>& og) {
    auto& gx = g.grad_buffer(x);
    for (double& v : gx) v += og[0];
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.size());
  return scale(sum(x), 1.0 / n);
}

Var cross_entropy(Var logits, int label) {
  const auto& lv = logits.value();
  const int K = static_cast<int>(lv.size());
  if (label < 0 || label >= K) {
    throw Error("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                std::to_string(K) + ")");
  }
  const double mx = *std::max_element(lv.begin(), lv.end());
  double z = 0.0;
  for (double v : lv) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  std::vector<double> p(K);
  for (int i = 0; i < K; ++i) p[i] = std::exp(lv[i] - lse);
  return logits.graph().make("cross_entropy", {1}, {lse - lv[label]}, {logits},
                             [logits, label, p = std::move(p)](Graph& g, const std::vector<double>& og) {
                               auto& gl = g.grad_buffer(logits);
                               for (std::size_t i = 0; i < p.size(); ++i) gl[i] += og[0] * p[i];
                               gl[label] -= og[0];
                             });
}

Var mse(Var a, Var b) {
  require_same_shape("mse", a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t n = av.size();
  if (n == 0) throw Error("mse: empty tensors");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  return a.graph().make("mse", {1}, {s / static_cast<double>(n)}, {a, b},
                        [a, b, n](Graph& g, const std::vector<double>& og) {
                          const auto& av = a.value();
                          const auto& bv = b.value();
                          const double k = 2.0 * og[0] / static_cast<double>(n);
                          if (a.requires_grad()) {
                            auto& ga = g.grad_buffer(a);
                            for (std::size_t i = 0; i < n; ++i) ga[i] += k * (av[i] - bv[i]);
                          }
                          if (b.requires_grad()) {
                            auto& gb = g.grad_buffer(b);
                            for (std::size_t i = 0; i < n; ++i) gb[i] -= k * (av[i] - bv[i]);
                          }
                        });
}

Var slice_rows(Var x, int begin, int end) {
  require_2d("slice_rows", x);
  const int T = x.dim(0), C = x.dim(1);
  if (begin < 0 || end > T || begin >= end) {
    throw Error("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                ") outside " + shape_str(x.shape()));
  }
  const auto& xv = x.value();
  std::vector<double> y(xv.begin() + static_cast<std::ptrdiff_t>(begin) * C,
                        xv.begin() + static_cast<std::ptrdiff_t>(end) * C);
  return x.graph().make("slice_rows", {end - begin, C}, std::move(y), {x},
                        [x, begin, C](Graph& g, const std::vector<double>& og) {
                          auto& gx = g.grad_buffer(x);
                          const std::size_t off = static_cast<std::size_t>(begin) * C;
                          for (std::size_t i = 0; i < og.size(); ++i) gx[off + i] += og[i];
                        });
}

Var slice_cols(Var x, int begin, int end) {
  require_2d("slice_cols", x);
  const int T = x.dim(0), C = x.dim(1);
  if (begin < 0 || end > C || begin >= end) {
    throw Error("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                ") outside " + shape_str(x.shape()));
  }
  const int W = end - begin;
  const auto& xv = x.value();
  std::vector<double> y(static_cast<std::size_t>(T) * W);
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < W; ++c)
      y[static_cast<std::size_t>(t) * W + c] = xv[static_cast<std::size_t>(t) * C + begin + c];
  return x.graph().make("slice_cols", {T, W}, std::move(y), {x},
                        [x, begin, T, C, W](Graph& g, const std::vector<double>& og) {
                          auto& gx = g.grad_buffer(x);
                          for (int t = 0; t < T; ++t)
                            for (int c = 0; c < W; ++c)
                              gx[static_cast<std::size_t>(t) * C + begin + c] += og[static_cast<std::size_t>(t) * W + c];
                        });
}

Var concat_cols(Var a, Var b) {
  require_2d("concat_cols", a);
  require_2d("concat_cols", b);
  const int T = a.dim(0), Ca = a.dim(1), Cb = b.dim(1);
  if (b.dim(0) != T) {
    throw Error("concat_cols: row counts differ, " + shape_str(a.shape()) + " vs " +
                shape_str(b.shape()));
  }
  const int C = Ca + Cb;
  std::vector<double> y(static_cast<std::size_t>(T) * C);
  const auto& av = a.value();
  const auto& bv = b.value();
  for (int t = 0; t < T; ++t) {
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(t) * Ca, Ca, y.begin() + static_cast<std::ptrdiff_t>(t) * C);
    std::copy_n(bv.begin() + static_cast<std::ptrdiff_t>(t) * Cb, Cb, y.begin() + static_cast<std::ptrdiff_t>(t) * C + Ca);
  }
  return a.graph().make("concat_cols", {T, C}, std::move(y), {a, b},
                        [a, b, T, Ca, Cb, C](Graph& g, const std::vector<double>& og) {
                          if (a.requires_grad()) {
                            auto& ga = g.grad_buffer(a);
                            for (int t = 0; t < T; ++t)
                              for (int c = 0; c < Ca; ++c)
                                ga[static_cast<std::size_t>(t) * Ca + c] += og[static_cast<std::size_t>(t) * C + c];
                          }
                          if (b.requires_grad()) {
                            auto& gb = g.grad_buffer(b);
                            for (int t = 0; t < T; ++t)
                              for (int c = 0; c < Cb; ++c)
                                gb[static_cast<std::size_t>(t) * Cb + c] += og[static_cast<std::size_t>(t) * C + Ca + c];
                          }
                        });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error("concat_rows: no inputs");
  const int C = parts[0].dim(1);
  int T = 0;
  for (const Var& p : parts) {
    require_2d("concat_rows", p);
    if (p.dim(1) != C) {
      throw Error("concat_rows: column counts differ, " + shape_str(parts[0].shape()) +
                  " vs " + shape_str(p.shape()));
    }
    T += p.dim(0);
  }
  std::vector<double> y;
  y.reserve(static_cast<std::size_t>(T) * C);
  for (const Var& p : parts) y.insert(y.end(), p.value().begin(), p.value().end());
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].graph().make("concat_rows", {T, C}, std::move(y), inputs,
                               [inputs](Graph& g, const std::vector<double>& og) {
                                 std::size_t off = 0;
                                 for (const Var& p : inputs) {
                                   const std::size_t n = p.size();
                                   if (p.requires_grad()) {
                                     auto& gp = g.grad_buffer(p);
                                     for (std::size_t i = 0; i < n; ++i) gp[i] += og[off + i];
                                   }
                                   off += n;
                                 }
                               });
}

Var conv1d_same(Var x, Var kernel, Var bias, int stride) {
  require_2d("conv1d_same", x);
  if (kernel.shape().size() != 3) {
    throw Error("conv1d_same: kernel must be K x C_in x C_out, got " + shape_str(kernel.shape()));
  }
  const int T = x.dim(0), Cin = x.dim(1);
  const int K = kernel.dim(0), Cout = kernel.dim(2);
  if (K % 2 == 0) throw Error("conv1d_same: kernel size must be odd, got " + std::to_string(K));
  if (kernel.dim(1) != Cin) {
    throw Error("conv1d_same: channel mismatch, input " + shape_str(x.shape()) + " kernel " +
                shape_str(kernel.shape()));
  }
  if (bias.size() != static_cast<std::size_t>(Cout)) {
    throw Error("conv1d_same: bias " + shape_str(bias.shape()) + " does not match C_out " +
                std::to_string(Cout));
  }
  if (stride < 1) throw Error("conv1d_same: stride must be >= 1");
  const int pad = (K - 1) / 2;
  const int Tout = (T + stride - 1) / stride;
  const auto& xv = x.value();
  const auto& wv = kernel.value();
  const auto& bv = bias.value();

  std::vector<double> y(static_cast<std::size_t>(Tout) * Cout);
  for (int t = 0; t < Tout; ++t) {
    double* yt = y.data() + static_cast<std::size_t>(t) * Cout;
    std::copy(bv.begin(), bv.end(), yt);
    for (int k = 0; k < K; ++k) {
      const int r = t * stride + k - pad;
      if (r < 0 || r >= T) continue;
      const double* xr = xv.data() + static_cast<std::size_t>(r) * Cin;
      const double* wk = wv.data() + static_cast<std::size_t>(k) * Cin * Cout;
      for (int ci = 0; ci < Cin; ++ci) {
        const double a = xr[ci];
        if (a == 0.0) continue;
        const double* w = wk + static_cast<std::size_t>(ci) * Cout;
        for (int co = 0; co < Cout; ++co) yt[co] += a * w[co];
      }
    }
  }

  return x.graph().make(
      "conv1d_same", {Tout, Cout}, std::move(y), {x, kernel, bias},
      [x, kernel, bias, T, Cin, K, Cout, Tout, stride, pad](Graph& g, const std::vector<double>& og) {
        const auto& xv = x.value();
        const auto& wv = kernel.value();
        std::vector<double>* gx = x.requires_grad() ? &g.grad_buffer(x) : nullptr;
        std::vector<double>* gw = kernel.requires_grad() ? &g.grad_buffer(kernel) : nullptr;
        if (bias.requires_grad()) {
          auto& gb = g.grad_buffer(bias);
          for (int t = 0; t < Tout; ++t)
            for (int co = 0; co < Cout; ++co) gb[co] += og[static_cast<std::size_t>(t) * Cout + co];
        }
        for (int t = 0; t < Tout; ++t) {
          const double* ot = og.data() + static_cast<std::size_t>(t) * Cout;
          for (int k = 0; k < K; ++k) {
            const int r = t * stride + k - pad;
            if (r < 0 || r >= T) continue;
            const std::size_t xoff = static_cast<std::size_t>(r) * Cin;
            const std::size_t woff = static_cast<std::size_t>(k) * Cin * Cout;
            for (int ci = 0; ci < Cin; ++ci) {
              const std::size_t wrow = woff + static_cast<std::size_t>(ci) * Cout;
              if (gx) {
                double s = 0.0;
                for (int co = 0; co < Cout; ++co) s += ot[co] * wv[wrow + co];
                (*gx)[xoff + ci] += s;
              }
              if (gw) {
                const double a = xv[xoff + ci];
                if (a == 0.0) continue;
                double* dw = gw->data() + wrow;
                for (int co = 0; co < Cout; ++co) dw[co] += a * ot[co];
              }
            }
          }
        }
      });
}

Var pool_pairs(Var x, int rows) {
  require_2d("pool_pairs", x);
  const int T = x.dim(0), C = x.dim(1);
  if (rows < 1 || rows > (T + 1) / 2 || rows < T / 2) {
    throw Error("pool_pairs: cannot pool " + std::to_string(T) + " rows into " +
                std::to_string(rows));
  }
  const auto& xv = x.value();
  std::vector<double> y(static_cast<std::size_t>(rows) * C, 0.0);
  std::vector<int> counts(rows);
  for (int i = 0; i < rows; ++i) {
    const int lo = 2 * i, hi = std::min(2 * i + 2, T);
    counts[i] = hi - lo;
    for (int r = lo; r < hi; ++r)
      for (int c = 0; c < C; ++c)
        y[static_cast<std::size_t>(i) * C + c] += xv[static_cast<std::size_t>(r) * C + c];
    for (int c = 0; c < C; ++c) y[static_cast<std::size_t>(i) * C + c] /= counts[i];
  }
  return x.graph().make("pool_pairs", {rows, C}, std::move(y), {x},
                        [x, rows, C, counts](Graph& g, const std::vector<double>& og) {
                          auto& gx = g.grad_buffer(x);
                          for (int i = 0; i < rows; ++i)
                            for (int r = 2 * i; r < 2 * i + counts[i]; ++r)
                              for (int c = 0; c < C; ++c)
                                gx[static_cast<std::size_t>(r) * C + c] +=
                                    og[static_cast<std::size_t>(i) * C + c] / counts[i];
                        });
}

Var detach(Var x) { return x.graph().constant(x.tensor()); }

}  // namespace pdistill::ad
