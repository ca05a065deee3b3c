#pragma once

#include <vector>

#include "manet/tensor.hpp"

// Differentiable primitives. Every op validates shapes up front and throws
// std::invalid_argument naming the offending shapes; reduction kernels
// accumulate in double and store fp32.
namespace manet::ops {

// ---- elementwise -----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);        // same shape
Tensor mul(const Tensor& a, const Tensor& b);        // Hadamard, same shape
Tensor scale(const Tensor& x, float k);              // constant factor
Tensor scale_scalar(const Tensor& x, const Tensor& s);  // s is a {1} tensor, differentiable in both
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);  // exact erf form
Tensor sigmoid(const Tensor& x);

// ---- broadcasts ------------------------------------------------------------
Tensor add_rowvec(const Tensor& x, const Tensor& b);        // x[... , c] + b[c]
Tensor add_channel_bias(const Tensor& x, const Tensor& b);  // x[c,h,w] + b[c] per channel
Tensor mul_channel(const Tensor& x, const Tensor& g);       // x[c,h,w] * g[c] per channel

// ---- matrix ----------------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);          // [m,k]x[k,n]
Tensor batched_matmul(const Tensor& a, const Tensor& b);  // [B,m,k]x[B,k,n]
Tensor transpose_last2(const Tensor& x);                  // [B,m,n] -> [B,n,m]

// ---- shape -----------------------------------------------------------------
Tensor reshape(const Tensor& x, std::vector<int> shape);  // same element count
Tensor split_heads(const Tensor& x, int heads);           // [n,c] -> [h,n,c/h]
Tensor merge_heads(const Tensor& x);                      // [h,n,d] -> [n,h*d]
Tensor chw_to_nc(const Tensor& x);                        // [c,h,w] -> [h*w,c]
Tensor nc_to_chw(const Tensor& x, int h, int w);          // [h*w,c] -> [c,h,w]

// ---- normalization / softmax -----------------------------------------------
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps);
Tensor softmax(const Tensor& x, int axis);

// ---- convolution -----------------------------------------------------------
// x[c_in,h,w] cross-correlated with kernels[c_out,c_in,k,k].
Tensor conv2d(const Tensor& x, const Tensor& kernels, int stride, int pad);
// Transposed convolution, kernels[c_in,c_out,up,up] with stride == kernel == up_factor.
Tensor deconv2d(const Tensor& x, const Tensor& kernels, int up_factor);

// ---- spatial ----------------------------------------------------------------
Tensor global_avg_pool(const Tensor& x);                 // [c,h,w] -> [c]
Tensor upsample_bilinear(const Tensor& x, int factor);   // [c,h,w] -> [c,h*f,w*f]

// ---- reductions / losses -----------------------------------------------------
Tensor sum(const Tensor& x);   // -> {1}
Tensor mean(const Tensor& x);  // -> {1}
// Mean per-pixel cross entropy of softmax(logits[K,h,w]) against labels[h*w]
// (row-major); labels must lie in [0, K).
Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& labels);

}  // namespace manet::ops
