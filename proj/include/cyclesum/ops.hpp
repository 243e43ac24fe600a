#pragma once

#include <vector>

#include "cyclesum/tensor.hpp"

namespace cyclesum::ad {

// Matrix product of rank-2 operands (m x n)(n x p).
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise binary ops. `b` may also be a rank-1 tensor matching the last
// extent of a rank-2 `a`, in which case it is broadcast over rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Rejects any zero in the denominator.
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor neg(const Tensor& a);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
// Rejects non-positive entries.
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// Euclidean norm of all entries; subgradient 0 at the origin.
Tensor l2_norm(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// axis 0 collapses rows (result has `cols` entries), axis 1 collapses columns.
Tensor sum(const Tensor& a, int axis);
Tensor mean(const Tensor& a, int axis);

// Concatenate rank-2 tensors along axis 0 (rows) or 1 (columns).
Tensor concat(const std::vector<Tensor>& parts, int axis);
// Rows [begin, end) of a rank-2 tensor (time slicing).
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor reverse_rows(const Tensor& a);
// Tiles a rank-1 (n) or (1 x n) tensor into (count x n).
Tensor repeat_rows(const Tensor& row, std::size_t count);
// out[t, :] = a[t, :] * weights[t]; weights is rank-1 of length rows(a).
Tensor scale_rows(const Tensor& a, const Tensor& weights);
Tensor reshape(const Tensor& a, Shape shape);

}  // namespace cyclesum::ad

namespace cyclesum::ad {

struct LstmSequence {
  Tensor hidden;  // (k x h), time order
  Tensor cell;    // (k x h)
};

// Fused single-layer LSTM over a whole sequence with hand-written BPTT.
// x: (k x d_in), w_in: (d_in x 4h), w_rec: (h x 4h), bias: (4h), h0/c0: (h).
// Gate column blocks are ordered input, forget, candidate, output.
LstmSequence lstm_sequence(const Tensor& x, const Tensor& w_in, const Tensor& w_rec,
                           const Tensor& bias, const Tensor& h0, const Tensor& c0);

}  // namespace cyclesum::ad
