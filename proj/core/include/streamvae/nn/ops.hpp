#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "streamvae/nn/tape.hpp"

/// Differentiable primitives. Every op checks shapes (ShapeError naming both
/// shapes) and output finiteness (NumericalError naming the op), and records
/// an exact reverse-mode rule. Non-smooth ops (clamp, abs, relu,
/// soft_threshold) use the almost-everywhere derivative with 0 at kinks.
///
/// "Rows" and "cols" follow Tensor: cols is the last axis. Time-axis ops
/// (ema, diff_rows, reverse_rows) treat rows as timesteps.
namespace streamvae::nn {

// Linear algebra
Var matmul(Var a, Var b);
Var transpose(Var a);

// Elementwise binary (equal shapes)
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);

// Broadcasting
/// a + row, where row holds a.cols() elements.
Var add_row(Var a, Var row);
/// a * row (per-column factor), row holds a.cols() elements.
Var mul_row(Var a, Var row);
/// a * s for a single-element s.
Var mul_scalar(Var a, Var s);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);

// Elementwise unary
Var sigmoid(Var a);
Var tanh(Var a);
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);
Var abs(Var a);
Var relu(Var a);
Var clamp(Var a, double lo, double hi);

// Last-axis ops
Var softmax(Var a);
/// Row-wise x / max(|x|, 1e-12).
Var l2_normalize(Var a);
/// Sum over the last axis; output keeps leading dims with last axis 1.
Var sum_cols(Var a);

// Reductions
Var sum(Var a);
Var mean(Var a);

// Structure
Var reshape(Var a, Shape shape);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var reverse_rows(Var a);

// Time-series ops
/// y_0 = x_0, y_t = m*y_{t-1} + (1-m)*x_t along rows; m is a single element.
Var ema(Var x, Var m);
/// y_0 = 0, y_t = x_t - x_{t-1} along rows.
Var diff_rows(Var x);
/// sign(x) * max(|x| - tau, 0); tau holds one element or one per column.
Var soft_threshold(Var x, Var tau);

// Recurrent cells (gate order i, f, g, o in the 4H axis)
/// One LSTM step. x [1 x in], h, c [1 x H], W [in x 4H], U [H x 4H],
/// b [4H]. Returns [1 x 2H] holding (h', c').
Var lstm_cell(Var x, Var h, Var c, Var W, Var U, Var b);
/// Runs lstm_cell over all rows of X [T x in] from a zero state and
/// returns the hidden states [T x H]. With `reverse` the sweep starts at the
/// last row; output row t is always the state at input row t.
Var lstm_layer(Var X, Var W, Var U, Var b, bool reverse);

// Raw kernels shared with the model code. C (m x n) += op(A) * op(B).
void gemm_nn(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n);

}  // namespace streamvae::nn
