#include "manet/ops.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace manet::ops {

namespace {

using detail::TensorImpl;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

// C[m,n] = A[m,k] * B[k,n], double accumulation, fixed loop order.
void gemm(const float* a, const float* b, float* c, int m, int k, int n) {
  std::vector<double> acc(static_cast<size_t>(n));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) acc[static_cast<size_t>(j)] = 0.0;
    const float* arow = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      double av = arow[p];
      const float* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) acc[static_cast<size_t>(j)] += av * brow[j];
    }
    float* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = static_cast<float>(acc[static_cast<size_t>(j)]);
  }
}

// C[m,n] += A^T[m,k] * B[k,n]  with A stored [k,m].
void gemm_tn_acc(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    const float* arow = a + static_cast<size_t>(p) * m;
    const float* brow = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      float av = arow[i];
      float* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] += A[m,k] * B^T[k,n]  with B stored [n,k].
void gemm_nt_acc(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<size_t>(i) * k;
    float* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const float* brow = b + static_cast<size_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += static_cast<double>(arow[p]) * brow[p];
      crow[j] += static_cast<float>(acc);
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<float> out(a.numel());
  const float* pa = a.ptr();
  const float* pb = b.ptr();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
  return make_node(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
    for (int side = 0; side < 2; ++side) {
      TensorImpl* p = self.parents[static_cast<size_t>(side)].get();
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<float> out(a.numel());
  const float* pa = a.ptr();
  const float* pb = b.ptr();
  for (size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
  return make_node(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
    TensorImpl* a = self.parents[0].get();
    TensorImpl* b = self.parents[1].get();
    if (a->requires_grad) {
      auto& g = a->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b->data[i];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a->data[i];
    }
  });
}

Tensor scale(const Tensor& x, float k) {
  std::vector<float> out(x.numel());
  const float* px = x.ptr();
  for (size_t i = 0; i < out.size(); ++i) out[i] = px[i] * k;
  return make_node(x.shape(), std::move(out), {x}, [k](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * k;
  });
}

Tensor scale_scalar(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) {
    throw std::invalid_argument("scale_scalar: scale must be a {1} tensor, got " + shape_str(s.shape()));
  }
  float sv = s.ptr()[0];
  std::vector<float> out(x.numel());
  const float* px = x.ptr();
  for (size_t i = 0; i < out.size(); ++i) out[i] = px[i] * sv;
  return make_node(x.shape(), std::move(out), {x, s}, [](TensorImpl& self) {
    TensorImpl* x = self.parents[0].get();
    TensorImpl* s = self.parents[1].get();
    float sv = s->data[0];
    if (x->requires_grad) {
      auto& g = x->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * sv;
    }
    if (s->requires_grad) {
      double acc = 0.0;
      for (size_t i = 0; i < self.grad.size(); ++i) {
        acc += static_cast<double>(self.grad[i]) * x->data[i];
      }
      s->ensure_grad()[0] += static_cast<float>(acc);
    }
  });
}

Tensor relu(const Tensor& x) {
  std::vector<float> out(x.numel());
  const float* px = x.ptr();
  for (size_t i = 0; i < out.size(); ++i) out[i] = px[i] > 0.0f ? px[i] : 0.0f;
  return make_node(x.shape(), std::move(out), {x}, [](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) {
      if (p->data[i] > 0.0f) g[i] += self.grad[i];
    }
  });
}

Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.7071067811865475;
  std::vector<float> out(x.numel());
  const float* px = x.ptr();
  for (size_t i = 0; i < out.size(); ++i) {
    double v = px[i];
    out[i] = static_cast<float>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  }
  return make_node(x.shape(), std::move(out), {x}, [](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    constexpr double kInvSqrt2 = 0.7071067811865475;
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    auto& g = p->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) {
      double v = p->data[i];
      double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      g[i] += self.grad[i] * static_cast<float>(cdf + v * pdf);
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<float> out(x.numel());
  const float* px = x.ptr();
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(px[i]))));
  }
  return make_node(x.shape(), std::move(out), {x}, [](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) {
      float y = self.data[i];
      g[i] += self.grad[i] * y * (1.0f - y);
    }
  });
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
  if (x.ndim() < 1 || b.ndim() != 1 || x.dim(x.ndim() - 1) != b.dim(0)) {
    throw std::invalid_argument("add_rowvec: last axis of " + shape_str(x.shape()) +
                                " must match " + shape_str(b.shape()));
  }
  int c = b.dim(0);
  size_t rows = x.numel() / static_cast<size_t>(c);
  std::vector<float> out(x.numel());
  const float* px = x.ptr();
  const float* pb = b.ptr();
  for (size_t r = 0; r < rows; ++r) {
    for (int j = 0; j < c; ++j) {
      out[r * c + j] = px[r * c + j] + pb[j];
    }
  }
  return make_node(x.shape(), std::move(out), {x, b}, [c, rows](TensorImpl& self) {
    TensorImpl* x = self.parents[0].get();
    TensorImpl* b = self.parents[1].get();
    if (x->requires_grad) {
      auto& g = x->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (int j = 0; j < c; ++j) {
        double acc = 0.0;
        for (size_t r = 0; r < rows; ++r) acc += self.grad[r * c + j];
        g[static_cast<size_t>(j)] += static_cast<float>(acc);
      }
    }
  });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  if (x.ndim() != 3 || b.ndim() != 1 || x.dim(0) != b.dim(0)) {
    throw std::invalid_argument("add_channel_bias: expected [c,h,w] and [c], got " +
                                shape_str(x.shape()) + " and " + shape_str(b.shape()));
  }
  int c = x.dim(0);
  size_t hw = static_cast<size_t>(x.dim(1)) * x.dim(2);
  std::vector<float> out(x.numel());
  const float* px = x.ptr();
  const float* pb = b.ptr();
  for (int ch = 0; ch < c; ++ch) {
    for (size_t i = 0; i < hw; ++i) out[ch * hw + i] = px[ch * hw + i] + pb[ch];
  }
  return make_node(x.shape(), std::move(out), {x, b}, [c, hw](TensorImpl& self) {
    TensorImpl* x = self.parents[0].get();
    TensorImpl* b = self.parents[1].get();
    if (x->requires_grad) {
      auto& g = x->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (size_t i = 0; i < hw; ++i) acc += self.grad[ch * hw + i];
        g[static_cast<size_t>(ch)] += static_cast<float>(acc);
      }
    }
  });
}

Tensor mul_channel(const Tensor& x, const Tensor& g) {
  if (x.ndim() != 3 || g.ndim() != 1 || x.dim(0) != g.dim(0)) {
    throw std::invalid_argument("mul_channel: expected [c,h,w] and [c], got " +
                                shape_str(x.shape()) + " and " + shape_str(g.shape()));
  }
  int c = x.dim(0);
  size_t hw = static_cast<size_t>(x.dim(1)) * x.dim(2);
  std::vector<float> out(x.numel());
  const float* px = x.ptr();
  const float* pg = g.ptr();
  for (int ch = 0; ch < c; ++ch) {
    for (size_t i = 0; i < hw; ++i) out[ch * hw + i] = px[ch * hw + i] * pg[ch];
  }
  return make_node(x.shape(), std::move(out), {x, g}, [c, hw](TensorImpl& self) {
    TensorImpl* x = self.parents[0].get();
    TensorImpl* gate = self.parents[1].get();
    if (x->requires_grad) {
      auto& gx = x->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        float gv = gate->data[static_cast<size_t>(ch)];
        for (size_t i = 0; i < hw; ++i) gx[ch * hw + i] += self.grad[ch * hw + i] * gv;
      }
    }
    if (gate->requires_grad) {
      auto& gg = gate->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (size_t i = 0; i < hw; ++i) {
          acc += static_cast<double>(self.grad[ch * hw + i]) * x->data[ch * hw + i];
        }
        gg[static_cast<size_t>(ch)] += static_cast<float>(acc);
      }
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) +
                                " x " + shape_str(b.shape()));
  }
  int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<float> out(static_cast<size_t>(m) * n);
  gemm(a.ptr(), b.ptr(), out.data(), m, k, n);
  return make_node({m, n}, std::move(out), {a, b}, [m, k, n](TensorImpl& self) {
    TensorImpl* a = self.parents[0].get();
    TensorImpl* b = self.parents[1].get();
    if (a->requires_grad) {
      // dA = dC * B^T
      gemm_nt_acc(self.grad.data(), b->data.data(), a->ensure_grad().data(), m, n, k);
    }
    if (b->requires_grad) {
      // dB = A^T * dC
      gemm_tn_acc(a->data.data(), self.grad.data(), b->ensure_grad().data(), k, m, n);
    }
  });
}

Tensor batched_matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw std::invalid_argument("batched_matmul: incompatible shapes " + shape_str(a.shape()) +
                                " x " + shape_str(b.shape()));
  }
  int bs = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  std::vector<float> out(static_cast<size_t>(bs) * m * n);
  for (int i = 0; i < bs; ++i) {
    gemm(a.ptr() + static_cast<size_t>(i) * m * k, b.ptr() + static_cast<size_t>(i) * k * n,
         out.data() + static_cast<size_t>(i) * m * n, m, k, n);
  }
  return make_node({bs, m, n}, std::move(out), {a, b}, [bs, m, k, n](TensorImpl& self) {
    TensorImpl* a = self.parents[0].get();
    TensorImpl* b = self.parents[1].get();
    for (int i = 0; i < bs; ++i) {
      const float* ga = self.grad.data() + static_cast<size_t>(i) * m * n;
      if (a->requires_grad) {
        gemm_nt_acc(ga, b->data.data() + static_cast<size_t>(i) * k * n,
                    a->ensure_grad().data() + static_cast<size_t>(i) * m * k, m, n, k);
      }
      if (b->requires_grad) {
        gemm_tn_acc(a->data.data() + static_cast<size_t>(i) * m * k, ga,
                    b->ensure_grad().data() + static_cast<size_t>(i) * k * n, k, m, n);
      }
    }
  });
}

Tensor transpose_last2(const Tensor& x) {
  if (x.ndim() != 3) {
    throw std::invalid_argument("transpose_last2: expected rank 3, got " + shape_str(x.shape()));
  }
  int b = x.dim(0), m = x.dim(1), n = x.dim(2);
  std::vector<float> out(x.numel());
  const float* px = x.ptr();
  for (int i = 0; i < b; ++i) {
    const float* src = px + static_cast<size_t>(i) * m * n;
    float* dst = out.data() + static_cast<size_t>(i) * m * n;
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < n; ++c) dst[static_cast<size_t>(c) * m + r] = src[static_cast<size_t>(r) * n + c];
    }
  }
  return make_node({b, n, m}, std::move(out), {x}, [b, m, n](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    for (int i = 0; i < b; ++i) {
      const float* src = self.grad.data() + static_cast<size_t>(i) * m * n;  // [n,m]
      float* dst = g.data() + static_cast<size_t>(i) * m * n;                // [m,n]
      for (int c = 0; c < n; ++c) {
        for (int r = 0; r < m; ++r) dst[static_cast<size_t>(r) * n + c] += src[static_cast<size_t>(c) * m + r];
      }
    }
  });
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  if (shape_numel(shape) != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " +
                                shape_str(shape));
  }
  std::vector<float> out(x.data());
  return make_node(std::move(shape), std::move(out), {x}, [](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor split_heads(const Tensor& x, int heads) {
  if (x.ndim() != 2 || heads < 1 || x.dim(1) % heads != 0) {
    throw std::invalid_argument("split_heads: cannot split " + shape_str(x.shape()) + " into " +
                                std::to_string(heads) + " heads");
  }
  int n = x.dim(0), c = x.dim(1), d = c / heads;
  std::vector<float> out(x.numel());
  const float* px = x.ptr();
  for (int h = 0; h < heads; ++h) {
    for (int t = 0; t < n; ++t) {
      for (int j = 0; j < d; ++j) {
        out[(static_cast<size_t>(h) * n + t) * d + j] = px[static_cast<size_t>(t) * c + h * d + j];
      }
    }
  }
  return make_node({heads, n, d}, std::move(out), {x}, [heads, n, c, d](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    for (int h = 0; h < heads; ++h) {
      for (int t = 0; t < n; ++t) {
        for (int j = 0; j < d; ++j) {
          g[static_cast<size_t>(t) * c + h * d + j] += self.grad[(static_cast<size_t>(h) * n + t) * d + j];
        }
      }
    }
  });
}

Tensor merge_heads(const Tensor& x) {
  if (x.ndim() != 3) {
    throw std::invalid_argument("merge_heads: expected [h,n,d], got " + shape_str(x.shape()));
  }
  int heads = x.dim(0), n = x.dim(1), d = x.dim(2), c = heads * d;
  std::vector<float> out(x.numel());
  const float* px = x.ptr();
  for (int h = 0; h < heads; ++h) {
    for (int t = 0; t < n; ++t) {
      for (int j = 0; j < d; ++j) {
        out[static_cast<size_t>(t) * c + h * d + j] = px[(static_cast<size_t>(h) * n + t) * d + j];
      }
    }
  }
  return make_node({n, c}, std::move(out), {x}, [heads, n, d, c](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    for (int h = 0; h < heads; ++h) {
      for (int t = 0; t < n; ++t) {
        for (int j = 0; j < d; ++j) {
          g[(static_cast<size_t>(h) * n + t) * d + j] += self.grad[static_cast<size_t>(t) * c + h * d + j];
        }
      }
    }
  });
}

Tensor chw_to_nc(const Tensor& x) {
  if (x.ndim() != 3) {
    throw std::invalid_argument("chw_to_nc: expected [c,h,w], got " + shape_str(x.shape()));
  }
  int c = x.dim(0);
  int hw = x.dim(1) * x.dim(2);
  std::vector<float> out(x.numel());
  const float* px = x.ptr();
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < hw; ++i) {
      out[static_cast<size_t>(i) * c + ch] = px[static_cast<size_t>(ch) * hw + i];
    }
  }
  return make_node({hw, c}, std::move(out), {x}, [c, hw](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < hw; ++i) {
        g[static_cast<size_t>(ch) * hw + i] += self.grad[static_cast<size_t>(i) * c + ch];
      }
    }
  });
}

Tensor nc_to_chw(const Tensor& x, int h, int w) {
  if (x.ndim() != 2 || x.dim(0) != h * w) {
    throw std::invalid_argument("nc_to_chw: cannot view " + shape_str(x.shape()) + " as grid " +
                                std::to_string(h) + "x" + std::to_string(w));
  }
  int c = x.dim(1);
  int hw = h * w;
  std::vector<float> out(x.numel());
  const float* px = x.ptr();
  for (int i = 0; i < hw; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      out[static_cast<size_t>(ch) * hw + i] = px[static_cast<size_t>(i) * c + ch];
    }
  }
  return make_node({c, h, w}, std::move(out), {x}, [c, hw](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    for (int i = 0; i < hw; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        g[static_cast<size_t>(i) * c + ch] += self.grad[static_cast<size_t>(ch) * hw + i];
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  if (x.ndim() < 1) throw std::invalid_argument("layer_norm: rank-0 input");
  int c = x.dim(x.ndim() - 1);
  if (gamma.ndim() != 1 || gamma.dim(0) != c || beta.ndim() != 1 || beta.dim(0) != c) {
    throw std::invalid_argument("layer_norm: affine params " + shape_str(gamma.shape()) + "/" +
                                shape_str(beta.shape()) + " do not match last axis of " +
                                shape_str(x.shape()));
  }
  if (eps <= 0.0f) throw std::invalid_argument("layer_norm: eps must be positive");
  size_t rows = x.numel() / static_cast<size_t>(c);
  std::vector<float> out(x.numel());
  std::vector<float> inv_std(rows);
  std::vector<float> means(rows);
  const float* px = x.ptr();
  const float* pg = gamma.ptr();
  const float* pb = beta.ptr();
  for (size_t r = 0; r < rows; ++r) {
    const float* row = px + r * c;
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += row[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      double d = row[j] - mean;
      var += d * d;
    }
    var /= c;
    double is = 1.0 / std::sqrt(var + eps);
    means[r] = static_cast<float>(mean);
    inv_std[r] = static_cast<float>(is);
    for (int j = 0; j < c; ++j) {
      double xhat = (row[j] - mean) * is;
      out[r * c + j] = static_cast<float>(xhat * pg[j] + pb[j]);
    }
  }
  return make_node(x.shape(), std::move(out),
                   {x, gamma, beta},
                   [c, rows, means = std::move(means), inv_std = std::move(inv_std)](TensorImpl& self) {
    TensorImpl* x = self.parents[0].get();
    TensorImpl* gamma = self.parents[1].get();
    TensorImpl* beta = self.parents[2].get();
    for (size_t r = 0; r < rows; ++r) {
      const float* xrow = x->data.data() + r * c;
      const float* dy = self.grad.data() + r * c;
      float mean = means[r];
      float is = inv_std[r];
      // dyg = dy * gamma ; dx = is * (dyg - mean(dyg) - xhat * mean(dyg*xhat))
      double sum_dyg = 0.0, sum_dyg_xhat = 0.0;
      for (int j = 0; j < c; ++j) {
        double xhat = (xrow[j] - mean) * is;
        double dyg = static_cast<double>(dy[j]) * gamma->data[static_cast<size_t>(j)];
        sum_dyg += dyg;
        sum_dyg_xhat += dyg * xhat;
      }
      double m1 = sum_dyg / c;
      double m2 = sum_dyg_xhat / c;
      if (x->requires_grad) {
        float* gx = x->ensure_grad().data() + r * c;
        for (int j = 0; j < c; ++j) {
          double xhat = (xrow[j] - mean) * is;
          double dyg = static_cast<double>(dy[j]) * gamma->data[static_cast<size_t>(j)];
          gx[j] += static_cast<float>(is * (dyg - m1 - xhat * m2));
        }
      }
      if (gamma->requires_grad) {
        auto& gg = gamma->ensure_grad();
        for (int j = 0; j < c; ++j) {
          double xhat = (xrow[j] - mean) * is;
          gg[static_cast<size_t>(j)] += static_cast<float>(dy[j] * xhat);
        }
      }
      if (beta->requires_grad) {
        auto& gb = beta->ensure_grad();
        for (int j = 0; j < c; ++j) gb[static_cast<size_t>(j)] += dy[j];
      }
    }
  });
}

Tensor softmax(const Tensor& x, int axis) {
  if (axis < 0) axis += x.ndim();
  if (axis < 0 || axis >= x.ndim()) {
    throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " out of range for " +
                                shape_str(x.shape()));
  }
  int n = x.dim(axis);
  size_t inner = 1, outer = 1;
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= static_cast<size_t>(x.dim(i));
  for (int i = 0; i < axis; ++i) outer *= static_cast<size_t>(x.dim(i));
  std::vector<float> out(x.numel());
  const float* px = x.ptr();
  for (size_t o = 0; o < outer; ++o) {
    for (size_t in = 0; in < inner; ++in) {
      size_t base = o * n * inner + in;
      double mx = -1e300;
      for (int j = 0; j < n; ++j) mx = std::max(mx, static_cast<double>(px[base + j * inner]));
      double denom = 0.0;
      for (int j = 0; j < n; ++j) denom += std::exp(static_cast<double>(px[base + j * inner]) - mx);
      for (int j = 0; j < n; ++j) {
        out[base + j * inner] =
            static_cast<float>(std::exp(static_cast<double>(px[base + j * inner]) - mx) / denom);
      }
    }
  }
  return make_node(x.shape(), std::move(out), {x}, [n, inner, outer](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    for (size_t o = 0; o < outer; ++o) {
      for (size_t in = 0; in < inner; ++in) {
        size_t base = o * n * inner + in;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) {
          dot += static_cast<double>(self.grad[base + j * inner]) * self.data[base + j * inner];
        }
        for (int j = 0; j < n; ++j) {
          size_t idx = base + j * inner;
          g[idx] += static_cast<float>((self.grad[idx] - dot) * self.data[idx]);
        }
      }
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, int stride, int pad) {
  if (x.ndim() != 3 || kernels.ndim() != 4 || kernels.dim(1) != x.dim(0) ||
      kernels.dim(2) != kernels.dim(3)) {
    throw std::invalid_argument("conv2d: incompatible input " + shape_str(x.shape()) +
                                " and kernels " + shape_str(kernels.shape()));
  }
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  int ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  int co = kernels.dim(0), k = kernels.dim(2);
  int num = h + 2 * pad - k;
  int numw = w + 2 * pad - k;
  if (num < 0 || numw < 0 || num % stride != 0 || numw % stride != 0) {
    throw std::invalid_argument("conv2d: non-integral output extent for input " +
                                shape_str(x.shape()) + ", kernel " + std::to_string(k) +
                                ", stride " + std::to_string(stride) + ", pad " + std::to_string(pad));
  }
  int ho = num / stride + 1;
  int wo = numw / stride + 1;
  std::vector<float> out(static_cast<size_t>(co) * ho * wo);
  const float* px = x.ptr();
  const float* pk = kernels.ptr();
  for (int o = 0; o < co; ++o) {
    for (int y = 0; y < ho; ++y) {
      for (int xx = 0; xx < wo; ++xx) {
        double acc = 0.0;
        for (int i = 0; i < ci; ++i) {
          const float* kern = pk + ((static_cast<size_t>(o) * ci + i) * k) * k;
          const float* chan = px + static_cast<size_t>(i) * h * w;
          for (int p = 0; p < k; ++p) {
            int sy = y * stride - pad + p;
            if (sy < 0 || sy >= h) continue;
            for (int q = 0; q < k; ++q) {
              int sx = xx * stride - pad + q;
              if (sx < 0 || sx >= w) continue;
              acc += static_cast<double>(chan[static_cast<size_t>(sy) * w + sx]) * kern[p * k + q];
            }
          }
        }
        out[(static_cast<size_t>(o) * ho + y) * wo + xx] = static_cast<float>(acc);
      }
    }
  }
  return make_node({co, ho, wo}, std::move(out), {x, kernels},
                   [ci, h, w, co, k, ho, wo, stride, pad](TensorImpl& self) {
    TensorImpl* x = self.parents[0].get();
    TensorImpl* kern = self.parents[1].get();
    float* gx = x->requires_grad ? x->ensure_grad().data() : nullptr;
    float* gk = kern->requires_grad ? kern->ensure_grad().data() : nullptr;
    if (!gx && !gk) return;
    for (int o = 0; o < co; ++o) {
      for (int y = 0; y < ho; ++y) {
        for (int xx = 0; xx < wo; ++xx) {
          float go = self.grad[(static_cast<size_t>(o) * ho + y) * wo + xx];
          if (go == 0.0f) continue;
          for (int i = 0; i < ci; ++i) {
            const float* kslice = kern->data.data() + ((static_cast<size_t>(o) * ci + i) * k) * k;
            const float* chan = x->data.data() + static_cast<size_t>(i) * h * w;
            for (int p = 0; p < k; ++p) {
              int sy = y * stride - pad + p;
              if (sy < 0 || sy >= h) continue;
              for (int q = 0; q < k; ++q) {
                int sx = xx * stride - pad + q;
                if (sx < 0 || sx >= w) continue;
                size_t xin = static_cast<size_t>(i) * h * w + static_cast<size_t>(sy) * w + sx;
                size_t kin = ((static_cast<size_t>(o) * ci + i) * k + p) * k + q;
                if (gx) gx[xin] += go * kslice[p * k + q];
                if (gk) gk[kin] += go * chan[static_cast<size_t>(sy) * w + sx];
              }
            }
          }
        }
      }
    }
  });
}

Tensor deconv2d(const Tensor& x, const Tensor& kernels, int up_factor) {
  if (up_factor != 2 && up_factor != 4) {
    throw std::invalid_argument("deconv2d: unsupported up_factor " + std::to_string(up_factor));
  }
  if (x.ndim() != 3 || kernels.ndim() != 4 || kernels.dim(0) != x.dim(0) ||
      kernels.dim(2) != up_factor || kernels.dim(3) != up_factor) {
    throw std::invalid_argument("deconv2d: incompatible input " + shape_str(x.shape()) +
                                " and kernels " + shape_str(kernels.shape()));
  }
  int ci = x.dim(0), h = x.dim(1), w = x.dim(2);
  int co = kernels.dim(1), u = up_factor;
  int ho = h * u, wo = w * u;
  // stride == kernel, so output cells are written exactly once per (i, y, x).
  std::vector<float> out(static_cast<size_t>(co) * ho * wo, 0.0f);
  const float* px = x.ptr();
  const float* pk = kernels.ptr();
  for (int i = 0; i < ci; ++i) {
    const float* chan = px + static_cast<size_t>(i) * h * w;
    for (int o = 0; o < co; ++o) {
      const float* kern = pk + ((static_cast<size_t>(i) * co + o) * u) * u;
      float* ochan = out.data() + static_cast<size_t>(o) * ho * wo;
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          float v = chan[static_cast<size_t>(y) * w + xx];
          if (v == 0.0f) continue;
          for (int p = 0; p < u; ++p) {
            float* orow = ochan + static_cast<size_t>(y * u + p) * wo + xx * u;
            for (int q = 0; q < u; ++q) orow[q] += v * kern[p * u + q];
          }
        }
      }
    }
  }
  return make_node({co, ho, wo}, std::move(out), {x, kernels},
                   [ci, h, w, co, u, ho, wo](TensorImpl& self) {
    TensorImpl* x = self.parents[0].get();
    TensorImpl* kern = self.parents[1].get();
    float* gx = x->requires_grad ? x->ensure_grad().data() : nullptr;
    float* gk = kern->requires_grad ? kern->ensure_grad().data() : nullptr;
    if (!gx && !gk) return;
    for (int i = 0; i < ci; ++i) {
      for (int o = 0; o < co; ++o) {
        const float* kslice = kern->data.data() + ((static_cast<size_t>(i) * co + o) * u) * u;
        const float* gout = self.grad.data() + static_cast<size_t>(o) * ho * wo;
        for (int y = 0; y < h; ++y) {
          for (int xx = 0; xx < w; ++xx) {
            size_t xin = static_cast<size_t>(i) * h * w + static_cast<size_t>(y) * w + xx;
            double acc = 0.0;
            for (int p = 0; p < u; ++p) {
              const float* grow = gout + static_cast<size_t>(y * u + p) * wo + xx * u;
              for (int q = 0; q < u; ++q) {
                acc += static_cast<double>(grow[q]) * kslice[p * u + q];
                if (gk) {
                  gk[((static_cast<size_t>(i) * co + o) * u + p) * u + q] +=
                      grow[q] * x->data[xin];
                }
              }
            }
            if (gx) gx[xin] += static_cast<float>(acc);
          }
        }
      }
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.ndim() != 3) {
    throw std::invalid_argument("global_avg_pool: expected [c,h,w], got " + shape_str(x.shape()));
  }
  int c = x.dim(0);
  size_t hw = static_cast<size_t>(x.dim(1)) * x.dim(2);
  std::vector<float> out(static_cast<size_t>(c));
  const float* px = x.ptr();
  for (int ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (size_t i = 0; i < hw; ++i) acc += px[ch * hw + i];
    out[static_cast<size_t>(ch)] = static_cast<float>(acc / static_cast<double>(hw));
  }
  return make_node({c}, std::move(out), {x}, [c, hw](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    float inv = 1.0f / static_cast<float>(hw);
    for (int ch = 0; ch < c; ++ch) {
      float gv = self.grad[static_cast<size_t>(ch)] * inv;
      for (size_t i = 0; i < hw; ++i) g[ch * hw + i] += gv;
    }
  });
}

Tensor upsample_bilinear(const Tensor& x, int factor) {
  if (x.ndim() != 3) {
    throw std::invalid_argument("upsample_bilinear: expected [c,h,w], got " + shape_str(x.shape()));
  }
  if (factor < 1) throw std::invalid_argument("upsample_bilinear: factor must be >= 1");
  int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  int ho = h * factor, wo = w * factor;
  // Precompute the source taps once per output coordinate (align_corners=false).
  struct Tap {
    int lo, hi;
    float w_hi;
  };
  auto make_taps = [factor](int out_n, int in_n) {
    std::vector<Tap> taps(static_cast<size_t>(out_n));
    for (int i = 0; i < out_n; ++i) {
      float src = (static_cast<float>(i) + 0.5f) / static_cast<float>(factor) - 0.5f;
      int lo = static_cast<int>(std::floor(src));
      float frac = src - static_cast<float>(lo);
      int hi = lo + 1;
      if (lo < 0) lo = 0;
      if (hi > in_n - 1) hi = in_n - 1;
      if (lo > in_n - 1) lo = in_n - 1;
      taps[static_cast<size_t>(i)] = {lo, hi, frac};
    }
    return taps;
  };
  std::vector<Tap> ty = make_taps(ho, h);
  std::vector<Tap> tx = make_taps(wo, w);
  std::vector<float> out(static_cast<size_t>(c) * ho * wo);
  const float* px = x.ptr();
  for (int ch = 0; ch < c; ++ch) {
    const float* chan = px + static_cast<size_t>(ch) * h * w;
    float* ochan = out.data() + static_cast<size_t>(ch) * ho * wo;
    for (int y = 0; y < ho; ++y) {
      const Tap& a = ty[static_cast<size_t>(y)];
      for (int xx = 0; xx < wo; ++xx) {
        const Tap& b = tx[static_cast<size_t>(xx)];
        float v00 = chan[static_cast<size_t>(a.lo) * w + b.lo];
        float v01 = chan[static_cast<size_t>(a.lo) * w + b.hi];
        float v10 = chan[static_cast<size_t>(a.hi) * w + b.lo];
        float v11 = chan[static_cast<size_t>(a.hi) * w + b.hi];
        float top = v00 + (v01 - v00) * b.w_hi;
        float bot = v10 + (v11 - v10) * b.w_hi;
        ochan[static_cast<size_t>(y) * wo + xx] = top + (bot - top) * a.w_hi;
      }
    }
  }
  return make_node({c, ho, wo}, std::move(out), {x},
                   [c, h, w, ho, wo, ty = std::move(ty), tx = std::move(tx)](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      float* gchan = g.data() + static_cast<size_t>(ch) * h * w;
      const float* gout = self.grad.data() + static_cast<size_t>(ch) * ho * wo;
      for (int y = 0; y < ho; ++y) {
        const Tap& a = ty[static_cast<size_t>(y)];
        for (int xx = 0; xx < wo; ++xx) {
          const Tap& b = tx[static_cast<size_t>(xx)];
          float go = gout[static_cast<size_t>(y) * wo + xx];
          if (go == 0.0f) continue;
          float wy1 = a.w_hi, wy0 = 1.0f - a.w_hi;
          float wx1 = b.w_hi, wx0 = 1.0f - b.w_hi;
          gchan[static_cast<size_t>(a.lo) * w + b.lo] += go * wy0 * wx0;
          gchan[static_cast<size_t>(a.lo) * w + b.hi] += go * wy0 * wx1;
          gchan[static_cast<size_t>(a.hi) * w + b.lo] += go * wy1 * wx0;
          gchan[static_cast<size_t>(a.hi) * w + b.hi] += go * wy1 * wx1;
        }
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  const float* px = x.ptr();
  for (size_t i = 0; i < x.numel(); ++i) acc += px[i];
  return make_node({1}, {static_cast<float>(acc)}, {x}, [](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    float gv = self.grad[0];
    for (size_t i = 0; i < g.size(); ++i) g[i] += gv;
  });
}

Tensor mean(const Tensor& x) {
  double acc = 0.0;
  const float* px = x.ptr();
  size_t n = x.numel();
  for (size_t i = 0; i < n; ++i) acc += px[i];
  return make_node({1}, {static_cast<float>(acc / static_cast<double>(n))}, {x},
                   [n](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    float gv = self.grad[0] / static_cast<float>(n);
    for (size_t i = 0; i < g.size(); ++i) g[i] += gv;
  });
}

Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 3) {
    throw std::invalid_argument("cross_entropy_mean: expected logits [K,h,w], got " +
                                shape_str(logits.shape()));
  }
  int k = logits.dim(0);
  size_t hw = static_cast<size_t>(logits.dim(1)) * logits.dim(2);
  if (labels.size() != hw) {
    throw std::invalid_argument("cross_entropy_mean: label count " + std::to_string(labels.size()) +
                                " does not match " + shape_str(logits.shape()));
  }
  const float* pl = logits.ptr();
  std::vector<float> probs(static_cast<size_t>(k) * hw);
  double loss = 0.0;
  for (size_t p = 0; p < hw; ++p) {
    int label = labels[p];
    if (label < 0 || label >= k) {
      throw std::invalid_argument("cross_entropy_mean: label " + std::to_string(label) +
                                  " out of range [0, " + std::to_string(k) + ")");
    }
    double mx = -1e300;
    for (int j = 0; j < k; ++j) mx = std::max(mx, static_cast<double>(pl[j * hw + p]));
    double denom = 0.0;
    for (int j = 0; j < k; ++j) denom += std::exp(static_cast<double>(pl[j * hw + p]) - mx);
    double lse = mx + std::log(denom);
    for (int j = 0; j < k; ++j) {
      probs[j * hw + p] = static_cast<float>(std::exp(static_cast<double>(pl[j * hw + p]) - lse));
    }
    loss += lse - static_cast<double>(pl[static_cast<size_t>(label) * hw + p]);
  }
  loss /= static_cast<double>(hw);
  return make_node({1}, {static_cast<float>(loss)}, {logits},
                   [k, hw, labels, probs = std::move(probs)](TensorImpl& self) {
    TensorImpl* p = self.parents[0].get();
    if (!p->requires_grad) return;
    auto& g = p->ensure_grad();
    float gv = self.grad[0] / static_cast<float>(hw);
    for (size_t pix = 0; pix < hw; ++pix) {
      int label = labels[pix];
      for (int j = 0; j < k; ++j) {
        float delta = (j == label) ? 1.0f : 0.0f;
        g[static_cast<size_t>(j) * hw + pix] += gv * (probs[static_cast<size_t>(j) * hw + pix] - delta);
      }
    }
  });
}

}  // namespace manet::ops
