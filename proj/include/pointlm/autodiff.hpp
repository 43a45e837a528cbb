#pragma once
// Reverse-mode autodiff over dense row-major matrices. A Tape owns an arena
// of nodes recorded in forward order; backward() walks it once in reverse.
// Granularity is tensor-level (one node per matrix op), so graphs stay small
// even for multi-layer models and the hot loops are Eigen products.
//
// Scalar is a template parameter: float for training, double when gradients
// are being verified against finite differences.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pointlm/common.hpp"

namespace pointlm {

// Layer-norm epsilon. Double gets a value small enough that normalized rows
// have variance equal to 1 within 1e-8; float needs more slack to stay well
// conditioned.
template <typename S>
struct ln_eps_of;
template <>
struct ln_eps_of<float> {
  static constexpr float value = 1e-6f;
};
template <>
struct ln_eps_of<double> {
  static constexpr double value = 1e-12;
};

enum class Op : std::uint8_t {
  kLeaf,
  kMatMul,
  kAdd,
  kAddRowVec,
  kHadamard,
  kScale,
  kRelu,
  kLayerNorm,
  kSoftmaxRows,
  kCausalSoftmaxRows,
  kGatherRows,
  kMaxPoolRows,
  kMeanPoolRows,
  kSliceRows,
  kSliceCols,
  kConcatRows,
  kConcatCols,
  kTranspose,
  kCrossEntropy,
  kSelectedLogProbSum,
  kMseVsConst,
  kStraightThrough,
};

template <typename S>
class Tape;

// Cheap handle into a tape. Copyable; never outlives its tape.
template <typename S>
struct Value {
  Tape<S>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Mat<S>& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  // Scalar payload of a 1x1 node (losses).
  S item() const;
};

template <typename S>
class Tape {
 public:
  struct Node {
    Op op = Op::kLeaf;
    std::vector<int> inputs;
    Mat<S> value;
    Mat<S> grad;  // sized lazily in backward()

    // Per-op auxiliary storage.
    std::vector<int> ids;            // gather rows / class targets / argmax
    std::vector<std::uint8_t> mask;  // loss position mask
    Mat<S> aux;                      // probs / xhat / constant target
    Vec<S> aux_vec;                  // layer-norm inv-stddev per row
    S scalar = S(0);                 // scale factor
    int i0 = 0;                      // slice offset
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int size() const { return int(nodes_.size()); }
  const Node& node(int id) const { return nodes_[id]; }

  Value<S> leaf(const Mat<S>& m) {
    Node n;
    n.op = Op::kLeaf;
    n.value = m;
    return push(std::move(n));
  }

  // ---- forward ops -------------------------------------------------------

  Value<S> matmul(Value<S> a, Value<S> b) {
    check_same_tape({a, b}, "matmul");
    const auto& A = val(a);
    const auto& B = val(b);
    if (A.cols() != B.rows())
      throw shape_error("matmul: inner dims disagree, " +
                        shape_str(A.rows(), A.cols()) + " * " +
                        shape_str(B.rows(), B.cols()));
    Node n;
    n.op = Op::kMatMul;
    n.inputs = {a.id, b.id};
    n.value.noalias() = A * B;
    return push(std::move(n));
  }

  Value<S> add(Value<S> a, Value<S> b) {
    check_same_tape({a, b}, "add");
    const auto& A = val(a);
    const auto& B = val(b);
    if (A.rows() != B.rows() || A.cols() != B.cols())
      throw shape_error("add: shape mismatch, " + shape_str(A.rows(), A.cols()) +
                        " vs " + shape_str(B.rows(), B.cols()));
    Node n;
    n.op = Op::kAdd;
    n.inputs = {a.id, b.id};
    n.value = A + B;
    return push(std::move(n));
  }

  // x: [n,c], bias: [1,c], broadcast over rows.
  Value<S> add_row_vec(Value<S> x, Value<S> bias) {
    check_same_tape({x, bias}, "add_row_vec");
    const auto& X = val(x);
    const auto& B = val(bias);
    if (B.rows() != 1 || B.cols() != X.cols())
      throw shape_error("add_row_vec: bias " + shape_str(B.rows(), B.cols()) +
                        " does not broadcast over " +
                        shape_str(X.rows(), X.cols()));
    Node n;
    n.op = Op::kAddRowVec;
    n.inputs = {x.id, bias.id};
    n.value = X.rowwise() + B.row(0);
    return push(std::move(n));
  }

  Value<S> hadamard(Value<S> a, Value<S> b) {
    check_same_tape({a, b}, "hadamard");
    const auto& A = val(a);
    const auto& B = val(b);
    if (A.rows() != B.rows() || A.cols() != B.cols())
      throw shape_error("hadamard: shape mismatch, " +
                        shape_str(A.rows(), A.cols()) + " vs " +
                        shape_str(B.rows(), B.cols()));
    Node n;
    n.op = Op::kHadamard;
    n.inputs = {a.id, b.id};
    n.value = A.cwiseProduct(B);
    return push(std::move(n));
  }

  Value<S> scale(Value<S> a, S factor) {
    check_same_tape({a}, "scale");
    Node n;
    n.op = Op::kScale;
    n.inputs = {a.id};
    n.scalar = factor;
    n.value = val(a) * factor;
    return push(std::move(n));
  }

  Value<S> relu(Value<S> a) {
    check_same_tape({a}, "relu");
    Node n;
    n.op = Op::kRelu;
    n.inputs = {a.id};
    n.value = val(a).cwiseMax(S(0));
    return push(std::move(n));
  }

  // Row-wise layer norm with affine parameters gamma, beta: [1,c].
  Value<S> layer_norm(Value<S> x, Value<S> gamma, Value<S> beta) {
    check_same_tape({x, gamma, beta}, "layer_norm");
    const auto& X = val(x);
    const auto& G = val(gamma);
    const auto& B = val(beta);
    if (G.rows() != 1 || G.cols() != X.cols() || B.rows() != 1 ||
        B.cols() != X.cols())
      throw shape_error("layer_norm: affine params must be [1," +
                        std::to_string(X.cols()) + "], got gamma " +
                        shape_str(G.rows(), G.cols()) + " beta " +
                        shape_str(B.rows(), B.cols()));
    const S eps = ln_eps_of<S>::value;
    Node n;
    n.op = Op::kLayerNorm;
    n.inputs = {x.id, gamma.id, beta.id};
    n.aux.resize(X.rows(), X.cols());
    n.aux_vec.resize(X.rows());
    n.value.resize(X.rows(), X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const S mu = X.row(r).mean();
      const S var = (X.row(r).array() - mu).square().mean();
      const S inv = S(1) / std::sqrt(var + eps);
      n.aux_vec(r) = inv;
      n.aux.row(r) = (X.row(r).array() - mu) * inv;
      n.value.row(r) =
          n.aux.row(r).cwiseProduct(G.row(0)) + B.row(0);
    }
    return push(std::move(n));
  }

  Value<S> softmax_rows(Value<S> x) {
    check_same_tape({x}, "softmax_rows");
    const auto& X = val(x);
    Node n;
    n.op = Op::kSoftmaxRows;
    n.inputs = {x.id};
    n.value.resize(X.rows(), X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const S mx = X.row(r).maxCoeff();
      Eigen::Array<S, 1, Eigen::Dynamic> e = (X.row(r).array() - mx).exp();
      n.value.row(r) = e / e.sum();
    }
    return push(std::move(n));
  }

  // Square attention matrix: row i is a softmax over columns 0..i, columns
  // beyond the diagonal are exactly zero.
  Value<S> causal_softmax_rows(Value<S> x) {
    check_same_tape({x}, "causal_softmax_rows");
    const auto& X = val(x);
    if (X.rows() != X.cols())
      throw shape_error("causal_softmax_rows: needs a square matrix, got " +
                        shape_str(X.rows(), X.cols()));
    Node n;
    n.op = Op::kCausalSoftmaxRows;
    n.inputs = {x.id};
    n.value = Mat<S>::Zero(X.rows(), X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const Eigen::Index w = r + 1;
      const S mx = X.row(r).head(w).maxCoeff();
      Eigen::Array<S, 1, Eigen::Dynamic> e =
          (X.row(r).head(w).array() - mx).exp();
      n.value.row(r).head(w) = e / e.sum();
    }
    return push(std::move(n));
  }

  // out.row(k) = table.row(ids[k]); repeated ids accumulate in backward.
  Value<S> gather_rows(Value<S> table, const std::vector<int>& ids) {
    check_same_tape({table}, "gather_rows");
    const auto& T = val(table);
    Node n;
    n.op = Op::kGatherRows;
    n.inputs = {table.id};
    n.ids = ids;
    n.value.resize(Eigen::Index(ids.size()), T.cols());
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (ids[k] < 0 || ids[k] >= T.rows())
        throw shape_error("gather_rows: index " + std::to_string(ids[k]) +
                          " out of range for table " +
                          shape_str(T.rows(), T.cols()));
      n.value.row(Eigen::Index(k)) = T.row(ids[k]);
    }
    return push(std::move(n));
  }

  // Column-wise max over rows -> [1,c]. Ties keep the lowest row index so the
  // subgradient choice is deterministic.
  Value<S> max_pool_rows(Value<S> x) {
    check_same_tape({x}, "max_pool_rows");
    const auto& X = val(x);
    require(X.rows() > 0, "max_pool_rows: empty input");
    Node n;
    n.op = Op::kMaxPoolRows;
    n.inputs = {x.id};
    n.value.resize(1, X.cols());
    n.ids.resize(std::size_t(X.cols()));
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      Eigen::Index best = 0;
      for (Eigen::Index r = 1; r < X.rows(); ++r)
        if (X(r, c) > X(best, c)) best = r;
      n.ids[std::size_t(c)] = int(best);
      n.value(0, c) = X(best, c);
    }
    return push(std::move(n));
  }

  Value<S> mean_pool_rows(Value<S> x) {
    check_same_tape({x}, "mean_pool_rows");
    const auto& X = val(x);
    require(X.rows() > 0, "mean_pool_rows: empty input");
    Node n;
    n.op = Op::kMeanPoolRows;
    n.inputs = {x.id};
    n.value = X.colwise().mean();
    return push(std::move(n));
  }

  Value<S> slice_rows(Value<S> x, Eigen::Index r0, Eigen::Index nr) {
    check_same_tape({x}, "slice_rows");
    const auto& X = val(x);
    if (r0 < 0 || nr < 0 || r0 + nr > X.rows())
      throw shape_error("slice_rows: [" + std::to_string(r0) + "," +
                        std::to_string(r0 + nr) + ") out of range for " +
                        shape_str(X.rows(), X.cols()));
    Node n;
    n.op = Op::kSliceRows;
    n.inputs = {x.id};
    n.i0 = int(r0);
    n.value = X.middleRows(r0, nr);
    return push(std::move(n));
  }

  Value<S> slice_cols(Value<S> x, Eigen::Index c0, Eigen::Index nc) {
    check_same_tape({x}, "slice_cols");
    const auto& X = val(x);
    if (c0 < 0 || nc < 0 || c0 + nc > X.cols())
      throw shape_error("slice_cols: [" + std::to_string(c0) + "," +
                        std::to_string(c0 + nc) + ") out of range for " +
                        shape_str(X.rows(), X.cols()));
    Node n;
    n.op = Op::kSliceCols;
    n.inputs = {x.id};
    n.i0 = int(c0);
    n.value = X.middleCols(c0, nc);
    return push(std::move(n));
  }

  Value<S> concat_rows(const std::vector<Value<S>>& parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    check_same_tape(parts, "concat_rows");
    Eigen::Index total = 0;
    const Eigen::Index c = val(parts[0]).cols();
    for (const auto& p : parts) {
      if (val(p).cols() != c)
        throw shape_error("concat_rows: column mismatch, " +
                          std::to_string(val(p).cols()) + " vs " +
                          std::to_string(c));
      total += val(p).rows();
    }
    Node n;
    n.op = Op::kConcatRows;
    n.value.resize(total, c);
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      n.inputs.push_back(p.id);
      n.value.middleRows(r, val(p).rows()) = val(p);
      r += val(p).rows();
    }
    return push(std::move(n));
  }

  Value<S> concat_cols(const std::vector<Value<S>>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    check_same_tape(parts, "concat_cols");
    Eigen::Index total = 0;
    const Eigen::Index r = val(parts[0]).rows();
    for (const auto& p : parts) {
      if (val(p).rows() != r)
        throw shape_error("concat_cols: row mismatch, " +
                          std::to_string(val(p).rows()) + " vs " +
                          std::to_string(r));
      total += val(p).cols();
    }
    Node n;
    n.op = Op::kConcatCols;
    n.value.resize(r, total);
    Eigen::Index c = 0;
    for (const auto& p : parts) {
      n.inputs.push_back(p.id);
      n.value.middleCols(c, val(p).cols()) = val(p);
      c += val(p).cols();
    }
    return push(std::move(n));
  }

  Value<S> transpose(Value<S> x) {
    check_same_tape({x}, "transpose");
    Node n;
    n.op = Op::kTranspose;
    n.inputs = {x.id};
    n.value = val(x).transpose();
    return push(std::move(n));
  }

  // Mean negative log-likelihood of targets over masked positions.
  // logits: [T,V]; targets, mask: length T. mask[t] != 0 marks positions that
  // contribute. Stores the row-wise softmax for backward.
  Value<S> cross_entropy(Value<S> logits, const std::vector<int>& targets,
                         const std::vector<std::uint8_t>& mask) {
    check_same_tape({logits}, "cross_entropy");
    const auto& L = val(logits);
    check_loss_args(L, targets, mask, "cross_entropy");
    Node n;
    n.op = Op::kCrossEntropy;
    n.inputs = {logits.id};
    n.ids = targets;
    n.mask = mask;
    n.aux = softmax_of(L);
    S total = S(0);
    int count = 0;
    for (Eigen::Index t = 0; t < L.rows(); ++t) {
      if (!mask[std::size_t(t)]) continue;
      ++count;
      total -= stable_log_prob(L, t, targets[std::size_t(t)]);
    }
    require(count > 0, "cross_entropy: mask selects no positions");
    n.scalar = S(1) / S(count);
    n.value = Mat<S>::Constant(1, 1, total / S(count));
    return push(std::move(n));
  }

  // Sum of log-probabilities of targets over masked positions (policy
  // gradient building block).
  Value<S> selected_log_prob_sum(Value<S> logits,
                                 const std::vector<int>& targets,
                                 const std::vector<std::uint8_t>& mask) {
    check_same_tape({logits}, "selected_log_prob_sum");
    const auto& L = val(logits);
    check_loss_args(L, targets, mask, "selected_log_prob_sum");
    Node n;
    n.op = Op::kSelectedLogProbSum;
    n.inputs = {logits.id};
    n.ids = targets;
    n.mask = mask;
    n.aux = softmax_of(L);
    S total = S(0);
    int count = 0;
    for (Eigen::Index t = 0; t < L.rows(); ++t) {
      if (!mask[std::size_t(t)]) continue;
      ++count;
      total += stable_log_prob(L, t, targets[std::size_t(t)]);
    }
    require(count > 0, "selected_log_prob_sum: mask selects no positions");
    n.value = Mat<S>::Constant(1, 1, total);
    return push(std::move(n));
  }

  // Mean squared difference against a constant matrix (mean over elements).
  Value<S> mse_vs_const(Value<S> x, const Mat<S>& target) {
    check_same_tape({x}, "mse_vs_const");
    const auto& X = val(x);
    if (X.rows() != target.rows() || X.cols() != target.cols())
      throw shape_error("mse_vs_const: shape mismatch, " +
                        shape_str(X.rows(), X.cols()) + " vs " +
                        shape_str(target.rows(), target.cols()));
    Node n;
    n.op = Op::kMseVsConst;
    n.inputs = {x.id};
    n.aux = target;
    n.value = Mat<S>::Constant(
        1, 1, (X - target).array().square().sum() / S(X.size()));
    return push(std::move(n));
  }

  // Forward: emit `hard` as the value. Backward: copy the incoming gradient
  // onto `soft` unchanged. Optionally also scatter it into rows `ids` of
  // `extra` (used when a row lookup table should see downstream gradients).
  Value<S> straight_through(Value<S> soft, const Mat<S>& hard) {
    check_same_tape({soft}, "straight_through");
    const auto& X = val(soft);
    if (X.rows() != hard.rows() || X.cols() != hard.cols())
      throw shape_error("straight_through: shape mismatch, " +
                        shape_str(X.rows(), X.cols()) + " vs " +
                        shape_str(hard.rows(), hard.cols()));
    Node n;
    n.op = Op::kStraightThrough;
    n.inputs = {soft.id};
    n.value = hard;
    return push(std::move(n));
  }

  Value<S> straight_through(Value<S> soft, const Mat<S>& hard,
                            Value<S> extra, const std::vector<int>& ids) {
    check_same_tape({soft, extra}, "straight_through");
    const auto& X = val(soft);
    if (X.rows() != hard.rows() || X.cols() != hard.cols())
      throw shape_error("straight_through: shape mismatch, " +
                        shape_str(X.rows(), X.cols()) + " vs " +
                        shape_str(hard.rows(), hard.cols()));
    require(ids.size() == std::size_t(hard.rows()),
            "straight_through: one row index per output row expected");
    Node n;
    n.op = Op::kStraightThrough;
    n.inputs = {soft.id, extra.id};
    n.ids = ids;
    n.value = hard;
    return push(std::move(n));
  }

  // ---- backward ----------------------------------------------------------

  void backward(Value<S> loss) {
    check_same_tape({loss}, "backward");
    const auto& L = val(loss);
    if (L.rows() != 1 || L.cols() != 1)
      throw shape_error("backward: loss must be [1x1], got " +
                        shape_str(L.rows(), L.cols()));
    for (auto& n : nodes_) n.grad.resize(0, 0);
    ensure_grad(loss.id);
    nodes_[loss.id].grad(0, 0) = S(1);
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.grad.size() == 0) continue;  // not on any path to the loss
      backward_node(n);
    }
  }

  // Gradient of the last backward() w.r.t. node `v`. Zero matrix if the node
  // did not participate.
  Mat<S> grad(Value<S> v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.size() == 0)
      return Mat<S>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

 private:
  friend struct Value<S>;

  Value<S> push(Node&& n) {
    nodes_.push_back(std::move(n));
    return Value<S>{this, int(nodes_.size()) - 1};
  }

  const Mat<S>& val(Value<S> v) const { return nodes_[v.id].value; }

  void check_same_tape(const std::vector<Value<S>>& vs, const char* op) {
    for (const auto& v : vs)
      require(v.tape == this && v.id >= 0 && v.id < size(),
              std::string(op) + ": value belongs to a different tape");
  }

  void check_loss_args(const Mat<S>& logits, const std::vector<int>& targets,
                       const std::vector<std::uint8_t>& mask, const char* op) {
    if (targets.size() != std::size_t(logits.rows()) ||
        mask.size() != std::size_t(logits.rows()))
      throw shape_error(std::string(op) + ": logits " +
                        shape_str(logits.rows(), logits.cols()) + " vs " +
                        std::to_string(targets.size()) + " targets, " +
                        std::to_string(mask.size()) + " mask entries");
    for (std::size_t t = 0; t < targets.size(); ++t)
      if (mask[t] && (targets[t] < 0 || targets[t] >= logits.cols()))
        throw shape_error(std::string(op) + ": target " +
                          std::to_string(targets[t]) + " at position " +
                          std::to_string(t) + " outside vocab of " +
                          std::to_string(logits.cols()));
  }

  static Mat<S> softmax_of(const Mat<S>& L) {
    Mat<S> P(L.rows(), L.cols());
    for (Eigen::Index r = 0; r < L.rows(); ++r) {
      const S mx = L.row(r).maxCoeff();
      Eigen::Array<S, 1, Eigen::Dynamic> e = (L.row(r).array() - mx).exp();
      P.row(r) = e / e.sum();
    }
    return P;
  }

  static S stable_log_prob(const Mat<S>& L, Eigen::Index row, int target) {
    const S mx = L.row(row).maxCoeff();
    const S lse = std::log((L.row(row).array() - mx).exp().sum()) + mx;
    return L(row, target) - lse;
  }

  void ensure_grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0)
      n.grad = Mat<S>::Zero(n.value.rows(), n.value.cols());
  }

  Mat<S>& in_grad(const Node& n, int slot) {
    ensure_grad(n.inputs[std::size_t(slot)]);
    return nodes_[n.inputs[std::size_t(slot)]].grad;
  }

  const Mat<S>& in_val(const Node& n, int slot) const {
    return nodes_[n.inputs[std::size_t(slot)]].value;
  }

  void backward_node(Node& n) {
    const Mat<S>& G = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul: {
        in_grad(n, 0).noalias() += G * in_val(n, 1).transpose();
        in_grad(n, 1).noalias() += in_val(n, 0).transpose() * G;
        break;
      }
      case Op::kAdd: {
        in_grad(n, 0) += G;
        in_grad(n, 1) += G;
        break;
      }
      case Op::kAddRowVec: {
        in_grad(n, 0) += G;
        in_grad(n, 1).row(0) += G.colwise().sum();
        break;
      }
      case Op::kHadamard: {
        in_grad(n, 0) += G.cwiseProduct(in_val(n, 1));
        in_grad(n, 1) += G.cwiseProduct(in_val(n, 0));
        break;
      }
      case Op::kScale: {
        in_grad(n, 0) += G * n.scalar;
        break;
      }
      case Op::kRelu: {
        in_grad(n, 0) +=
            G.cwiseProduct((in_val(n, 0).array() > S(0)).template cast<S>().matrix());
        break;
      }
      case Op::kLayerNorm: {
        const Mat<S>& gamma = in_val(n, 1);
        Mat<S>& dx = in_grad(n, 0);
        Mat<S>& dgamma = in_grad(n, 1);
        Mat<S>& dbeta = in_grad(n, 2);
        for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
          Eigen::Array<S, 1, Eigen::Dynamic> g =
              G.row(r).cwiseProduct(gamma.row(0)).array();
          Eigen::Array<S, 1, Eigen::Dynamic> xhat = n.aux.row(r).array();
          const S m1 = g.mean();
          const S m2 = (g * xhat).mean();
          dx.row(r) += (n.aux_vec(r) * (g - m1 - xhat * m2)).matrix();
          dgamma.row(0) += G.row(r).cwiseProduct(n.aux.row(r));
          dbeta.row(0) += G.row(r);
        }
        break;
      }
      case Op::kSoftmaxRows:
      case Op::kCausalSoftmaxRows: {
        Mat<S>& dx = in_grad(n, 0);
        for (Eigen::Index r = 0; r < n.value.rows(); ++r) {
          const S dot = G.row(r).dot(n.value.row(r));
          dx.row(r) += (G.row(r).array() - dot).matrix().cwiseProduct(
              n.value.row(r));
        }
        break;
      }
      case Op::kGatherRows: {
        Mat<S>& dt = in_grad(n, 0);
        for (std::size_t k = 0; k < n.ids.size(); ++k)
          dt.row(n.ids[k]) += G.row(Eigen::Index(k));
        break;
      }
      case Op::kMaxPoolRows: {
        Mat<S>& dx = in_grad(n, 0);
        for (Eigen::Index c = 0; c < n.value.cols(); ++c)
          dx(n.ids[std::size_t(c)], c) += G(0, c);
        break;
      }
      case Op::kMeanPoolRows: {
        Mat<S>& dx = in_grad(n, 0);
        const S inv = S(1) / S(dx.rows());
        dx.rowwise() += (G.row(0) * inv).eval();
        break;
      }
      case Op::kSliceRows: {
        in_grad(n, 0).middleRows(n.i0, n.value.rows()) += G;
        break;
      }
      case Op::kSliceCols: {
        in_grad(n, 0).middleCols(n.i0, n.value.cols()) += G;
        break;
      }
      case Op::kConcatRows: {
        Eigen::Index r = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          Mat<S>& d = in_grad(n, int(k));
          d += G.middleRows(r, d.rows());
          r += d.rows();
        }
        break;
      }
      case Op::kConcatCols: {
        Eigen::Index c = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          Mat<S>& d = in_grad(n, int(k));
          d += G.middleCols(c, d.cols());
          c += d.cols();
        }
        break;
      }
      case Op::kTranspose: {
        in_grad(n, 0) += G.transpose();
        break;
      }
      case Op::kCrossEntropy: {
        const S g = G(0, 0) * n.scalar;  // scalar holds 1/count
        Mat<S>& dl = in_grad(n, 0);
        for (Eigen::Index t = 0; t < dl.rows(); ++t) {
          if (!n.mask[std::size_t(t)]) continue;
          dl.row(t) += g * n.aux.row(t);
          dl(t, n.ids[std::size_t(t)]) -= g;
        }
        break;
      }
      case Op::kSelectedLogProbSum: {
        const S g = G(0, 0);
        Mat<S>& dl = in_grad(n, 0);
        for (Eigen::Index t = 0; t < dl.rows(); ++t) {
          if (!n.mask[std::size_t(t)]) continue;
          dl.row(t) -= g * n.aux.row(t);
          dl(t, n.ids[std::size_t(t)]) += g;
        }
        break;
      }
      case Op::kMseVsConst: {
        Mat<S>& dx = in_grad(n, 0);
        const Mat<S>& X = in_val(n, 0);
        dx += (G(0, 0) * S(2) / S(X.size())) * (X - n.aux);
        break;
      }
      case Op::kStraightThrough: {
        in_grad(n, 0) += G;
        if (n.inputs.size() == 2) {
          Mat<S>& de = in_grad(n, 1);
          for (std::size_t k = 0; k < n.ids.size(); ++k)
            de.row(n.ids[k]) += G.row(Eigen::Index(k));
        }
        break;
      }
    }
  }

  std::vector<Node> nodes_;
};

template <typename S>
const Mat<S>& Value<S>::value() const {
  return tape->node(id).value;
}

template <typename S>
S Value<S>::item() const {
  const auto& v = value();
  require(v.rows() == 1 && v.cols() == 1, "Value::item: node is not scalar");
  return v(0, 0);
}

}  // namespace pointlm
