#include <Eigen/Core>
#include <cmath>
#include <utility>

#include "cyclesum/ops.hpp"

namespace cyclesum::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

ConstMatMap cmap(const Buffer& v, std::size_t r, std::size_t c) {
  return ConstMatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

MatMap mmap(Buffer& v, std::size_t r, std::size_t c) {
  return MatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

struct Cache {
  RowMat gates;  // activated i, f, g, o per step (k x 4h)
  RowMat cells;  // c_t (k x h)
  RowMat tanh_cells;
  RowMat hidden;
};

}  // namespace

LstmSequence lstm_sequence(const Tensor& x, const Tensor& w_in, const Tensor& w_rec,
                           const Tensor& bias, const Tensor& h0, const Tensor& c0) {
  if (x.rank() != 2 || w_in.rank() != 2 || w_rec.rank() != 2) {
    throw ShapeError("lstm_sequence: x, w_in and w_rec must be rank-2");
  }
  const std::size_t k = x.rows();
  const std::size_t din = x.cols();
  const std::size_t h = w_rec.rows();
  if (w_rec.cols() != 4 * h) {
    throw ShapeError("lstm_sequence: recurrent weights " + shape_string(w_rec.shape()) +
                     " are not (h x 4h)");
  }
  if (w_in.rows() != din || w_in.cols() != 4 * h) {
    throw ShapeError("lstm_sequence: input weights " + shape_string(w_in.shape()) +
                     " do not match input " + shape_string(x.shape()) + " and hidden size " +
                     std::to_string(h));
  }
  if (bias.size() != 4 * h || h0.size() != h || c0.size() != h) {
    throw ShapeError("lstm_sequence: bias/h0/c0 sizes " + shape_string(bias.shape()) + ", " +
                     shape_string(h0.shape()) + ", " + shape_string(c0.shape()) +
                     " inconsistent with hidden size " + std::to_string(h));
  }

  const auto H = static_cast<Eigen::Index>(h);
  const bool f32 = current_precision() == Precision::f32;
  auto cache = std::make_shared<Cache>();
  RowMat pre = cmap(x.node()->value, k, din) * cmap(w_in.node()->value, din, 4 * h);
  pre.rowwise() += Eigen::Map<const RowVec>(bias.node()->value.data(), 4 * H);
  cache->gates.resize(static_cast<Eigen::Index>(k), 4 * H);
  cache->cells.resize(static_cast<Eigen::Index>(k), H);
  cache->tanh_cells.resize(static_cast<Eigen::Index>(k), H);
  cache->hidden.resize(static_cast<Eigen::Index>(k), H);

  const auto U = cmap(w_rec.node()->value, h, 4 * h);
  RowVec h_prev = cmap(h0.node()->value, 1, h);
  RowVec c_prev = cmap(c0.node()->value, 1, h);
  RowVec z(4 * H);
  for (std::size_t t = 0; t < k; ++t) {
    const auto T = static_cast<Eigen::Index>(t);
    z.noalias() = pre.row(T);
    z.noalias() += h_prev * U;
    // tanh(u) = 2 sigmoid(2u) - 1 lets one vectorized exp serve all four gates.
    z.segment(2 * H, H) *= 2.0;
    auto act = cache->gates.row(T).array();
    act = 1.0 / (1.0 + (-z.array()).exp());
    act.segment(2 * H, H) = 2.0 * act.segment(2 * H, H) - 1.0;
    auto c = cache->cells.row(T).array();
    c = act.segment(H, H) * c_prev.array() + act.segment(0, H) * act.segment(2 * H, H);
    if (f32) c = c.cast<float>().cast<double>();
    auto tc = cache->tanh_cells.row(T).array();
    tc = 2.0 / (1.0 + (-2.0 * c).exp()) - 1.0;
    auto hv = cache->hidden.row(T).array();
    hv = act.segment(3 * H, H) * tc;
    if (f32) hv = hv.cast<float>().cast<double>();
    c_prev = cache->cells.row(T);
    h_prev = cache->hidden.row(T);
  }

  Buffer out(2 * k * h);
  mmap(out, k, h) = cache->hidden;
  MatMap(out.data() + k * h, static_cast<Eigen::Index>(k), H) = cache->cells;

  Tensor joint = make_node(
      {2 * k, h}, std::move(out), {x, w_in, w_rec, bias, h0, c0},
      [cache, k, din, h](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        Node& pu = *self.parents[2];
        Node& pb = *self.parents[3];
        Node& ph0 = *self.parents[4];
        Node& pc0 = *self.parents[5];
        const auto H = static_cast<Eigen::Index>(h);
        const auto U = cmap(pu.value, h, 4 * h);
        const auto dH = cmap(self.grad, k, h);
        const ConstMatMap dC(self.grad.data() + k * h, static_cast<Eigen::Index>(k), H);
        const auto c_init = cmap(pc0.value, 1, h);

        RowMat dG(static_cast<Eigen::Index>(k), 4 * H);
        RowVec dh_rec = RowVec::Zero(H);
        RowVec dc_rec = RowVec::Zero(H);
        for (std::size_t tt = k; tt-- > 0;) {
          const auto T = static_cast<Eigen::Index>(tt);
          for (Eigen::Index j = 0; j < H; ++j) {
            const double ig = cache->gates(T, j);
            const double fg = cache->gates(T, H + j);
            const double gg = cache->gates(T, 2 * H + j);
            const double og = cache->gates(T, 3 * H + j);
            const double tc = cache->tanh_cells(T, j);
            const double cp = tt > 0 ? cache->cells(T - 1, j) : c_init(0, j);
            const double dh = dH(T, j) + dh_rec(j);
            const double dc = dC(T, j) + dc_rec(j) + dh * og * (1.0 - tc * tc);
            dG(T, j) = dc * gg * ig * (1.0 - ig);
            dG(T, H + j) = dc * cp * fg * (1.0 - fg);
            dG(T, 2 * H + j) = dc * ig * (1.0 - gg * gg);
            dG(T, 3 * H + j) = dh * tc * og * (1.0 - og);
            dc_rec(j) = dc * fg;
          }
          dh_rec.noalias() = dG.row(T) * U.transpose();
        }

        if (px.requires_grad) {
          mmap(px.grad, k, din).noalias() += dG * cmap(pw.value, din, 4 * h).transpose();
        }
        if (pw.requires_grad) {
          mmap(pw.grad, din, 4 * h).noalias() += cmap(px.value, k, din).transpose() * dG;
        }
        if (pu.requires_grad) {
          auto dU = mmap(pu.grad, h, 4 * h);
          dU.noalias() += cmap(ph0.value, h, 1) * dG.row(0);
          if (k > 1) {
            const auto K1 = static_cast<Eigen::Index>(k - 1);
            dU.noalias() += cache->hidden.topRows(K1).transpose() * dG.bottomRows(K1);
          }
        }
        if (pb.requires_grad) mmap(pb.grad, 1, 4 * h) += dG.colwise().sum();
        if (ph0.requires_grad) mmap(ph0.grad, 1, h) += dh_rec;
        if (pc0.requires_grad) mmap(pc0.grad, 1, h) += dc_rec;
      });

  return {slice_rows(joint, 0, k), slice_rows(joint, k, 2 * k)};
}

}  // namespace cyclesum::ad
