#ifndef MAGEC_TENSOR_HPP_
#define MAGEC_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace magec {

/// Dense row-major 64-bit matrix. Vectors are 1xN or Nx1 matrices.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), v(size_t(r) * c, fill) {}

  double& operator()(int r, int c) { return v[size_t(r) * cols + c]; }
  double operator()(int r, int c) const { return v[size_t(r) * cols + c]; }
  int size() const { return rows * cols; }

  static Mat row(std::vector<double> vals) {
    Mat m;
    m.rows = 1;
    m.cols = static_cast<int>(vals.size());
    m.v = std::move(vals);
    return m;
  }
};

inline bool same_shape(const Mat& a, const Mat& b) {
  return a.rows == b.rows && a.cols == b.cols;
}

/// A named learnable weight with gradient accumulator and Adam state.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;

  Param(std::string n, int rows, int cols)
      : name(std::move(n)),
        value(rows, cols),
        grad(rows, cols),
        adam_m(rows, cols),
        adam_v(rows, cols) {}

  void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

inline void xavier_init(Param& p, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / (p.value.rows + p.value.cols));
  std::uniform_real_distribution<double> u(-a, a);
  for (auto& x : p.value.v) x = u(rng);
}

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Standard Adam with bias correction; state lives on the Param.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(std::span<Param* const> params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (Param* p : params) {
      for (int i = 0; i < p->value.size(); ++i) {
        const double g = p->grad.v[i];
        p->adam_m.v[i] = cfg_.beta1 * p->adam_m.v[i] + (1.0 - cfg_.beta1) * g;
        p->adam_v.v[i] = cfg_.beta2 * p->adam_v.v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = p->adam_m.v[i] / bc1;
        const double vhat = p->adam_v.v[i] / bc2;
        p->value.v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  const AdamConfig& config() const { return cfg_; }
  long steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
};

class Tape;

/// Handle to a value recorded on a Tape.
struct Tensor {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& val() const;
};

/// Append-only record of forward operations; backward() replays it in
/// reverse, accumulating gradients into the referenced Params.
class Tape {
 public:
  Tensor constant(Mat m) { return make(std::move(m), false, {}); }

  Tensor scalar(double x) { return constant(Mat(1, 1, x)); }

  Tensor param(Param& p) {
    Tensor t = make(p.value, true, {});
    params_.push_back({t.id, &p});
    return t;
  }

  const Mat& val(int id) const { return nodes_[id].val; }
  Mat& grad(int id) { return nodes_[id].grad; }
  size_t num_nodes() const { return nodes_.size(); }

  // ---- forward ops -------------------------------------------------------

  Tensor matmul(Tensor a, Tensor b) {
    const Mat& A = val(a.id);
    const Mat& B = val(b.id);
    if (A.cols != B.rows) throw std::runtime_error("matmul: shape mismatch");
    Mat out(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i)
      for (int k = 0; k < A.cols; ++k) {
        const double aik = A(i, k);
        if (aik == 0.0) continue;
        const double* brow = &B.v[size_t(k) * B.cols];
        double* orow = &out.v[size_t(i) * out.cols];
        for (int j = 0; j < B.cols; ++j) orow[j] += aik * brow[j];
      }
    return make(std::move(out), needs(a) || needs(b),
                [ai = a.id, bi = b.id](Tape& t, int self) {
                  const Mat& G = t.grad(self);
                  const Mat& A = t.val(ai);
                  const Mat& B = t.val(bi);
                  if (t.nodes_[ai].needs_grad) {
                    Mat& GA = t.grad(ai);
                    for (int i = 0; i < A.rows; ++i)
                      for (int j = 0; j < B.cols; ++j) {
                        const double g = G(i, j);
                        if (g == 0.0) continue;
                        for (int k = 0; k < A.cols; ++k)
                          GA(i, k) += g * B(k, j);
                      }
                  }
                  if (t.nodes_[bi].needs_grad) {
                    Mat& GB = t.grad(bi);
                    for (int i = 0; i < A.rows; ++i)
                      for (int k = 0; k < A.cols; ++k) {
                        const double aik = A(i, k);
                        if (aik == 0.0) continue;
                        for (int j = 0; j < B.cols; ++j)
                          GB(k, j) += aik * G(i, j);
                      }
                  }
                });
  }

  // b may be a 1xC bias broadcast over rows of a.
  Tensor add(Tensor a, Tensor b) {
    const Mat& A = val(a.id);
    const Mat& B = val(b.id);
    const bool bias = (B.rows == 1 && A.cols == B.cols && A.rows != 1);
    if (!bias && !same_shape(A, B)) throw std::runtime_error("add: shape mismatch");
    Mat out = A;
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j) out(i, j) += bias ? B(0, j) : B(i, j);
    return make(std::move(out), needs(a) || needs(b),
                [ai = a.id, bi = b.id, bias](Tape& t, int self) {
                  const Mat& G = t.grad(self);
                  if (t.nodes_[ai].needs_grad)
                    for (int i = 0; i < G.size(); ++i)
                      t.grad(ai).v[i] += G.v[i];
                  if (t.nodes_[bi].needs_grad) {
                    Mat& GB = t.grad(bi);
                    if (bias) {
                      for (int i = 0; i < G.rows; ++i)
                        for (int j = 0; j < G.cols; ++j) GB(0, j) += G(i, j);
                    } else {
                      for (int i = 0; i < G.size(); ++i) GB.v[i] += G.v[i];
                    }
                  }
                });
  }

  Tensor sub(Tensor a, Tensor b) {
    const Mat& A = val(a.id);
    const Mat& B = val(b.id);
    if (!same_shape(A, B)) throw std::runtime_error("sub: shape mismatch");
    Mat out = A;
    for (int i = 0; i < out.size(); ++i) out.v[i] -= B.v[i];
    return make(std::move(out), needs(a) || needs(b),
                [ai = a.id, bi = b.id](Tape& t, int self) {
                  const Mat& G = t.grad(self);
                  if (t.nodes_[ai].needs_grad)
                    for (int i = 0; i < G.size(); ++i) t.grad(ai).v[i] += G.v[i];
                  if (t.nodes_[bi].needs_grad)
                    for (int i = 0; i < G.size(); ++i) t.grad(bi).v[i] -= G.v[i];
                });
  }

  Tensor mul(Tensor a, Tensor b) {
    const Mat& A = val(a.id);
    const Mat& B = val(b.id);
    if (!same_shape(A, B)) throw std::runtime_error("mul: shape mismatch");
    Mat out = A;
    for (int i = 0; i < out.size(); ++i) out.v[i] *= B.v[i];
    return make(std::move(out), needs(a) || needs(b),
                [ai = a.id, bi = b.id](Tape& t, int self) {
                  const Mat& G = t.grad(self);
                  if (t.nodes_[ai].needs_grad)
                    for (int i = 0; i < G.size(); ++i)
                      t.grad(ai).v[i] += G.v[i] * t.val(bi).v[i];
                  if (t.nodes_[bi].needs_grad)
                    for (int i = 0; i < G.size(); ++i)
                      t.grad(bi).v[i] += G.v[i] * t.val(ai).v[i];
                });
  }

  Tensor scale(Tensor a, double s) {
    Mat out = val(a.id);
    for (auto& x : out.v) x *= s;
    return make(std::move(out), needs(a), [ai = a.id, s](Tape& t, int self) {
      if (!t.nodes_[ai].needs_grad) return;
      const Mat& G = t.grad(self);
      for (int i = 0; i < G.size(); ++i) t.grad(ai).v[i] += s * G.v[i];
    });
  }

  Tensor add_scalar(Tensor a, double s) {
    Mat out = val(a.id);
    for (auto& x : out.v) x += s;
    return make(std::move(out), needs(a), [ai = a.id](Tape& t, int self) {
      if (!t.nodes_[ai].needs_grad) return;
      const Mat& G = t.grad(self);
      for (int i = 0; i < G.size(); ++i) t.grad(ai).v[i] += G.v[i];
    });
  }

  Tensor relu(Tensor a) {
    Mat out = val(a.id);
    for (auto& x : out.v) x = x > 0.0 ? x : 0.0;
    return make(std::move(out), needs(a), [ai = a.id](Tape& t, int self) {
      if (!t.nodes_[ai].needs_grad) return;
      const Mat& G = t.grad(self);
      const Mat& A = t.val(ai);
      for (int i = 0; i < G.size(); ++i)
        if (A.v[i] > 0.0) t.grad(ai).v[i] += G.v[i];
    });
  }

  Tensor exp(Tensor a) {
    Mat out = val(a.id);
    for (auto& x : out.v) x = std::exp(x);
    return make(std::move(out), needs(a), [ai = a.id](Tape& t, int self) {
      if (!t.nodes_[ai].needs_grad) return;
      const Mat& G = t.grad(self);
      const Mat& Y = t.val(self);
      for (int i = 0; i < G.size(); ++i) t.grad(ai).v[i] += G.v[i] * Y.v[i];
    });
  }

  Tensor square(Tensor a) {
    Mat out = val(a.id);
    for (auto& x : out.v) x = x * x;
    return make(std::move(out), needs(a), [ai = a.id](Tape& t, int self) {
      if (!t.nodes_[ai].needs_grad) return;
      const Mat& G = t.grad(self);
      const Mat& A = t.val(ai);
      for (int i = 0; i < G.size(); ++i)
        t.grad(ai).v[i] += 2.0 * A.v[i] * G.v[i];
    });
  }

  Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::runtime_error("concat_cols: empty input");
    const int rows = val(parts[0].id).rows;
    int cols = 0;
    bool ng = false;
    std::vector<int> ids;
    for (const auto& p : parts) {
      if (val(p.id).rows != rows)
        throw std::runtime_error("concat_cols: row mismatch");
      cols += val(p.id).cols;
      ng = ng || needs(p);
      ids.push_back(p.id);
    }
    Mat out(rows, cols);
    int off = 0;
    for (const auto& p : parts) {
      const Mat& P = val(p.id);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < P.cols; ++j) out(i, off + j) = P(i, j);
      off += P.cols;
    }
    return make(std::move(out), ng, [ids](Tape& t, int self) {
      const Mat& G = t.grad(self);
      int off = 0;
      for (int id : ids) {
        const Mat& P = t.val(id);
        if (t.nodes_[id].needs_grad) {
          Mat& GP = t.grad(id);
          for (int i = 0; i < P.rows; ++i)
            for (int j = 0; j < P.cols; ++j) GP(i, j) += G(i, off + j);
        }
        off += P.cols;
      }
    });
  }

  Tensor gather_rows(Tensor a, std::vector<int> indices) {
    const Mat& A = val(a.id);
    Mat out(static_cast<int>(indices.size()), A.cols);
    for (size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] < 0 || indices[i] >= A.rows)
        throw std::runtime_error("gather_rows: index out of range");
      for (int j = 0; j < A.cols; ++j)
        out(static_cast<int>(i), j) = A(indices[i], j);
    }
    return make(std::move(out), needs(a),
                [ai = a.id, idx = std::move(indices)](Tape& t, int self) {
                  if (!t.nodes_[ai].needs_grad) return;
                  const Mat& G = t.grad(self);
                  Mat& GA = t.grad(ai);
                  for (size_t i = 0; i < idx.size(); ++i)
                    for (int j = 0; j < G.cols; ++j)
                      GA(idx[i], j) += G(static_cast<int>(i), j);
                });
  }

  Tensor pad_rows(Tensor a, int total_rows) {
    const Mat& A = val(a.id);
    if (total_rows < A.rows) throw std::runtime_error("pad_rows: shrinking");
    Mat out(total_rows, A.cols);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j) out(i, j) = A(i, j);
    return make(std::move(out), needs(a), [ai = a.id](Tape& t, int self) {
      if (!t.nodes_[ai].needs_grad) return;
      const Mat& G = t.grad(self);
      Mat& GA = t.grad(ai);
      for (int i = 0; i < GA.rows; ++i)
        for (int j = 0; j < GA.cols; ++j) GA(i, j) += G(i, j);
    });
  }

  Tensor transpose(Tensor a) {
    const Mat& A = val(a.id);
    Mat out(A.cols, A.rows);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j) out(j, i) = A(i, j);
    return make(std::move(out), needs(a), [ai = a.id](Tape& t, int self) {
      if (!t.nodes_[ai].needs_grad) return;
      const Mat& G = t.grad(self);
      Mat& GA = t.grad(ai);
      for (int i = 0; i < GA.rows; ++i)
        for (int j = 0; j < GA.cols; ++j) GA(i, j) += G(j, i);
    });
  }

  Tensor sum_rows(Tensor a) {
    const Mat& A = val(a.id);
    Mat out(1, A.cols);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < A.cols; ++j) out(0, j) += A(i, j);
    return make(std::move(out), needs(a), [ai = a.id](Tape& t, int self) {
      if (!t.nodes_[ai].needs_grad) return;
      const Mat& G = t.grad(self);
      Mat& GA = t.grad(ai);
      for (int i = 0; i < GA.rows; ++i)
        for (int j = 0; j < GA.cols; ++j) GA(i, j) += G(0, j);
    });
  }

  Tensor mean_rows(Tensor a) {
    const int n = val(a.id).rows;
    return scale(sum_rows(a), 1.0 / n);
  }

  Tensor sum_all(Tensor a) {
    const Mat& A = val(a.id);
    double s = 0.0;
    for (double x : A.v) s += x;
    return make(Mat(1, 1, s), needs(a), [ai = a.id](Tape& t, int self) {
      if (!t.nodes_[ai].needs_grad) return;
      const double g = t.grad(self)(0, 0);
      for (auto& x : t.grad(ai).v) x += g;
    });
  }

  Tensor mean_all(Tensor a) {
    return scale(sum_all(a), 1.0 / val(a.id).size());
  }

  Tensor l2_normalize_rows(Tensor a) {
    const Mat& A = val(a.id);
    Mat out = A;
    std::vector<double> norms(A.rows, 0.0);
    for (int i = 0; i < A.rows; ++i) {
      double s = 0.0;
      for (int j = 0; j < A.cols; ++j) s += A(i, j) * A(i, j);
      norms[i] = std::sqrt(s);
      if (norms[i] > 0.0)
        for (int j = 0; j < A.cols; ++j) out(i, j) /= norms[i];
      // zero rows stay zero
    }
    return make(std::move(out), needs(a),
                [ai = a.id, norms = std::move(norms)](Tape& t, int self) {
                  if (!t.nodes_[ai].needs_grad) return;
                  const Mat& G = t.grad(self);
                  const Mat& Y = t.val(self);
                  Mat& GA = t.grad(ai);
                  for (int i = 0; i < G.rows; ++i) {
                    if (norms[i] == 0.0) continue;
                    double dot = 0.0;
                    for (int j = 0; j < G.cols; ++j) dot += Y(i, j) * G(i, j);
                    for (int j = 0; j < G.cols; ++j)
                      GA(i, j) += (G(i, j) - Y(i, j) * dot) / norms[i];
                  }
                });
  }

  /// Row-wise log-softmax restricted to unmasked entries; masked entries get
  /// -inf log-probability and receive exactly zero gradient.
  Tensor masked_log_softmax(Tensor a, const std::vector<bool>& mask) {
    const Mat& A = val(a.id);
    if (static_cast<int>(mask.size()) != A.cols)
      throw std::runtime_error("masked_log_softmax: mask length mismatch");
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
      throw std::runtime_error("masked_log_softmax: all entries masked");
    Mat out(A.rows, A.cols);
    for (int i = 0; i < A.rows; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < A.cols; ++j)
        if (mask[j]) mx = std::max(mx, A(i, j));
      double se = 0.0;
      for (int j = 0; j < A.cols; ++j)
        if (mask[j]) se += std::exp(A(i, j) - mx);
      const double lse = mx + std::log(se);
      for (int j = 0; j < A.cols; ++j)
        out(i, j) = mask[j] ? A(i, j) - lse
                            : -std::numeric_limits<double>::infinity();
    }
    return make(std::move(out), needs(a), [ai = a.id, mask](Tape& t, int self) {
      if (!t.nodes_[ai].needs_grad) return;
      const Mat& G = t.grad(self);
      const Mat& Y = t.val(self);
      Mat& GA = t.grad(ai);
      for (int i = 0; i < G.rows; ++i) {
        double gsum = 0.0;
        for (int j = 0; j < G.cols; ++j)
          if (mask[j]) gsum += G(i, j);
        for (int j = 0; j < G.cols; ++j)
          if (mask[j]) GA(i, j) += G(i, j) - std::exp(Y(i, j)) * gsum;
      }
    });
  }

  Tensor pick(Tensor a, int r, int c) {
    const Mat& A = val(a.id);
    if (r < 0 || r >= A.rows || c < 0 || c >= A.cols)
      throw std::runtime_error("pick: index out of range");
    return make(Mat(1, 1, A(r, c)), needs(a), [ai = a.id, r, c](Tape& t, int self) {
      if (!t.nodes_[ai].needs_grad) return;
      t.grad(ai)(r, c) += t.grad(self)(0, 0);
    });
  }

  /// Entropy of a masked categorical given row log-probs: -sum p*logp over
  /// unmasked entries.
  Tensor entropy_masked(Tensor logp, const std::vector<bool>& mask) {
    const Mat& L = val(logp.id);
    if (L.rows != 1) throw std::runtime_error("entropy_masked: expects a row");
    double h = 0.0;
    for (int j = 0; j < L.cols; ++j)
      if (mask[j]) h -= std::exp(L(0, j)) * L(0, j);
    return make(Mat(1, 1, h), needs(logp), [li = logp.id, mask](Tape& t, int self) {
      if (!t.nodes_[li].needs_grad) return;
      const double g = t.grad(self)(0, 0);
      const Mat& L = t.val(li);
      for (int j = 0; j < L.cols; ++j)
        if (mask[j])
          t.grad(li)(0, j) += -g * std::exp(L(0, j)) * (L(0, j) + 1.0);
    });
  }

  Tensor min_elem(Tensor a, Tensor b) {
    const Mat& A = val(a.id);
    const Mat& B = val(b.id);
    if (!same_shape(A, B)) throw std::runtime_error("min_elem: shape mismatch");
    Mat out = A;
    for (int i = 0; i < out.size(); ++i) out.v[i] = std::min(A.v[i], B.v[i]);
    return make(std::move(out), needs(a) || needs(b),
                [ai = a.id, bi = b.id](Tape& t, int self) {
                  const Mat& G = t.grad(self);
                  const Mat& A = t.val(ai);
                  const Mat& B = t.val(bi);
                  for (int i = 0; i < G.size(); ++i) {
                    const bool left = A.v[i] <= B.v[i];
                    if (left && t.nodes_[ai].needs_grad)
                      t.grad(ai).v[i] += G.v[i];
                    if (!left && t.nodes_[bi].needs_grad)
                      t.grad(bi).v[i] += G.v[i];
                  }
                });
  }

  Tensor clamp(Tensor a, double lo, double hi) {
    Mat out = val(a.id);
    for (auto& x : out.v) x = std::min(hi, std::max(lo, x));
    return make(std::move(out), needs(a), [ai = a.id, lo, hi](Tape& t, int self) {
      if (!t.nodes_[ai].needs_grad) return;
      const Mat& G = t.grad(self);
      const Mat& A = t.val(ai);
      for (int i = 0; i < G.size(); ++i)
        if (A.v[i] > lo && A.v[i] < hi) t.grad(ai).v[i] += G.v[i];
    });
  }

  // ---- backward ----------------------------------------------------------

  /// Accumulates d(loss)/d(param) into each touched Param's grad field.
  void backward(const Tensor& loss) {
    if (done_)
      throw std::runtime_error("backward: tape already consumed");
    if (loss.tape != this || loss.id < 0 ||
        loss.id >= static_cast<int>(nodes_.size()))
      throw std::runtime_error("backward: tensor not recorded on this tape");
    const Mat& L = val(loss.id);
    if (L.size() != 1) throw std::runtime_error("backward: loss must be scalar");
    grad(loss.id)(0, 0) += 1.0;
    for (int i = loss.id; i >= 0; --i)
      if (nodes_[i].needs_grad && nodes_[i].backprop) nodes_[i].backprop(*this, i);
    for (auto& [id, p] : params_)
      for (int i = 0; i < p->grad.size(); ++i) p->grad.v[i] += nodes_[id].grad.v[i];
    // A second backward on the same tape would double-count; forbid it.
    done_ = true;
  }

  bool consumed() const { return done_; }

 private:
  struct Node {
    Mat val;
    Mat grad;
    bool needs_grad = false;
    std::function<void(Tape&, int)> backprop;
  };

  bool needs(const Tensor& t) const { return nodes_[t.id].needs_grad; }

  Tensor make(Mat m, bool needs_grad, std::function<void(Tape&, int)> bp) {
    if (done_) throw std::runtime_error("tape already consumed by backward");
    Node n;
    n.grad = Mat(m.rows, m.cols);
    n.val = std::move(m);
    n.needs_grad = needs_grad;
    n.backprop = std::move(bp);
    nodes_.push_back(std::move(n));
    return Tensor{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
  std::vector<std::pair<int, Param*>> params_;
  bool done_ = false;
};

inline const Mat& Tensor::val() const { return tape->val(id); }

// ---------------------------------------------------------------------------
// Checkpoint IO: text format with hexfloat values for exact round-trips.
// ---------------------------------------------------------------------------

inline void save_params(std::ostream& out, std::span<const Param* const> params) {
  out << "magec-checkpoint 1\n";
  for (const Param* p : params) {
    out << "param " << p->name << " " << p->value.rows << " " << p->value.cols
        << "\n";
    char buf[64];
    for (int i = 0; i < p->value.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%a", p->value.v[i]);
      out << buf << (i + 1 == p->value.size() ? "\n" : " ");
    }
  }
}

inline void save_checkpoint(const std::string& path,
                            std::span<const Param* const> params) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  save_params(f, params);
}

inline void load_params(std::istream& in, std::span<Param* const> params) {
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "magec-checkpoint" || version != 1)
    throw std::runtime_error("bad checkpoint header");
  std::vector<Param*> remaining(params.begin(), params.end());
  std::string kw;
  while (in >> kw) {
    if (kw != "param") throw std::runtime_error("bad checkpoint record: " + kw);
    std::string name;
    int rows, cols;
    if (!(in >> name >> rows >> cols))
      throw std::runtime_error("truncated checkpoint record");
    auto it = std::find_if(remaining.begin(), remaining.end(),
                           [&](Param* p) { return p->name == name; });
    if (it == remaining.end())
      throw std::runtime_error("checkpoint has unknown param: " + name);
    Param* p = *it;
    if (p->value.rows != rows || p->value.cols != cols)
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    for (int i = 0; i < p->value.size(); ++i) {
      std::string tok;
      if (!(in >> tok))
        throw std::runtime_error("truncated values for " + name);
      p->value.v[i] = std::strtod(tok.c_str(), nullptr);
    }
    remaining.erase(it);
  }
  if (!remaining.empty())
    throw std::runtime_error("checkpoint missing param: " + remaining[0]->name);
}

inline void load_checkpoint(const std::string& path,
                            std::span<Param* const> params) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
  load_params(f, params);
}

}  // namespace magec

#endif  // MAGEC_TENSOR_HPP_
