#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "dqjl/matrix.hpp"
#include "dqjl/rng.hpp"

namespace dqjl {

// All layers run batch-first (inputs B×features) and accumulate parameter
// gradients on backward; call zero_grad() between update steps.

struct Linear {
  Matrix w;  // out×in
  Matrix b;  // 1×out
  Matrix gw, gb;

  Linear() = default;
  Linear(std::size_t in, std::size_t out)
      : w(out, in), b(1, out), gw(out, in), gb(1, out) {}

  std::size_t in_dim() const { return w.cols(); }
  std::size_t out_dim() const { return w.rows(); }

  void init(Rng& rng);
  Matrix forward(const Matrix& x) const;
  // Accumulates gw/gb from the stored input; returns gx.
  Matrix backward(const Matrix& x, const Matrix& gy);
};

struct LayerNorm {
  static constexpr double kEps = 1e-5;
  Matrix gamma, beta;  // 1×n
  Matrix ggamma, gbeta;

  struct Cache {
    Matrix xhat;     // B×n
    Matrix inv_std;  // B×1
  };

  LayerNorm() = default;
  explicit LayerNorm(std::size_t n)
      : gamma(1, n, 1.0), beta(1, n), ggamma(1, n), gbeta(1, n) {}

  std::size_t dim() const { return gamma.cols(); }
  Matrix forward(const Matrix& x, Cache& cache) const;
  Matrix backward(const Cache& cache, const Matrix& gy);
};

// Single LSTM cell; gate layout along the 4H axis is [input, forget, cell, output].
struct LstmCell {
  Matrix w_ih;  // 4H×I
  Matrix w_hh;  // 4H×H
  Matrix b;     // 1×4H
  Matrix gw_ih, gw_hh, gb;

  struct Cache {
    Matrix x, h_prev, c_prev;
    Matrix gate_i, gate_f, gate_g, gate_o;  // post-nonlinearity, each B×H
    Matrix c_new, tanh_c;
  };

  LstmCell() = default;
  LstmCell(std::size_t input, std::size_t hidden)
      : w_ih(4 * hidden, input),
        w_hh(4 * hidden, hidden),
        b(1, 4 * hidden),
        gw_ih(4 * hidden, input),
        gw_hh(4 * hidden, hidden),
        gb(1, 4 * hidden) {}

  std::size_t input_dim() const { return w_ih.cols(); }
  std::size_t hidden_dim() const { return w_hh.cols(); }

  void init(Rng& rng);  // uniform fan-in, then forget-gate bias 1.0
  void forward(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
               Matrix& h_out, Matrix& c_out, Cache& cache) const;
  // gh/gc are gradients w.r.t. this step's h_out/c_out. Emits gradients for the
  // previous carry so callers can chain through a recorded unroll; returns gx.
  Matrix backward(const Cache& cache, const Matrix& gh, const Matrix& gc,
                  Matrix& gh_prev, Matrix& gc_prev);
};

Matrix softmax_rows(const Matrix& logits);
// gz for y = softmax(z) given gy.
Matrix softmax_backward(const Matrix& y, const Matrix& gy);

// y = softmax((logits + noise)/temperature) rows; `hard` returns one-hot
// argmax rows (straight-through: keep the soft sample for the gradient path
// via soft_out).
Matrix gumbel_softmax_with_noise(const Matrix& logits, const Matrix& noise,
                                 double temperature, bool hard,
                                 Matrix* soft_out = nullptr);
Matrix gumbel_softmax(const Matrix& logits, double temperature, Rng& rng,
                      bool hard, Matrix* soft_out = nullptr);
Matrix sample_gumbel_noise(std::size_t rows, std::size_t cols, Rng& rng);
// Gradient to logits through the soft sample y_soft.
Matrix gumbel_softmax_backward(const Matrix& y_soft, const Matrix& gy,
                               double temperature);

// Actor: 42 → LN → 64 → ReLU → LN → 128 → ReLU → LSTM(128) → 2 logits.
struct PolicyNet {
  static constexpr std::size_t kObsDim = 42;
  static constexpr std::size_t kHidden1 = 64;
  static constexpr std::size_t kHidden2 = 128;
  static constexpr std::size_t kActions = 2;

  LayerNorm ln1{kObsDim};
  Linear fc1{kObsDim, kHidden1};
  LayerNorm ln2{kHidden1};
  Linear fc2{kHidden1, kHidden2};
  LstmCell lstm{kHidden2, kHidden2};
  Linear head{kHidden2, kActions};

  struct Cache {
    Matrix x;
    LayerNorm::Cache ln1c, ln2c;
    Matrix a0, z1, r1, a1, z2, r2;  // ln/linear/relu intermediates in order
    LstmCell::Cache lstmc;
    Matrix h_out;
  };

  void init(Rng& rng);
  // h/c may be empty (zero carry). Returns logits B×2 and the new carry.
  Matrix forward(const Matrix& x, const Matrix& h, const Matrix& c,
                 Matrix& h_out, Matrix& c_out, Cache& cache) const;
  // Single recorded step; gh_out/gc_out chain gradients arriving from later
  // steps (pass empty at the end of the unroll).
  void backward(const Cache& cache, const Matrix& g_logits,
                const Matrix& gh_out, const Matrix& gc_out, Matrix& gh_prev,
                Matrix& gc_prev);
  // Backprop through a recorded unroll (caches[0] earliest).
  void backward_sequence(std::span<Cache> caches,
                         std::span<const Matrix> g_logits_per_step);

  std::vector<Matrix*> params();
  std::vector<const Matrix*> params() const;
  std::vector<Matrix*> grads();
  void zero_grad();
};

// Centralized critic: concat(7M state, M actions) → 256 → 256 → 512 → 1,
// rectified-linear between layers, linear scalar head.
struct ValueNet {
  Linear fc1, fc2{256, 256}, fc3{256, 512}, out{512, 1};

  struct Cache {
    Matrix x, z1, r1, z2, r2, z3, r3;
  };

  ValueNet() : ValueNet(1) {}
  explicit ValueNet(std::size_t agent_slots) : fc1(8 * agent_slots, 256) {}

  std::size_t input_dim() const { return fc1.in_dim(); }
  void init(Rng& rng);
  Matrix forward(const Matrix& x, Cache& cache) const;  // B×1
  // Returns gx (needed by actor updates); accumulates parameter gradients.
  Matrix backward(const Cache& cache, const Matrix& g_out);

  std::vector<Matrix*> params();
  std::vector<const Matrix*> params() const;
  std::vector<Matrix*> grads();
  void zero_grad();
};

// Recurrent actor state; empty vectors mean the zero carry.
struct Carry {
  std::vector<double> h, c;
  bool empty() const { return h.empty() && c.empty(); }
};

struct PolicyStepOut {
  std::array<double, PolicyNet::kActions> logits;
  std::array<double, PolicyNet::kActions> probs;
  Carry carry;
};

// Single-observation wrappers over the batched nets.
PolicyStepOut policy_forward(const PolicyNet& net, std::span<const double> obs,
                             const Carry& carry);
double value_forward(const ValueNet& net, std::span<const double> joint_state,
                     std::span<const double> joint_action);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  long step_count = 0;
  std::vector<Matrix> m, v;
};

AdamState make_adam(double lr, const std::vector<Matrix*>& params);
void adam_step(AdamState& state, const std::vector<Matrix*>& params,
               const std::vector<Matrix*>& grads);
void soft_update(const std::vector<Matrix*>& target,
                 const std::vector<const Matrix*>& online, double tau);

// Raw binary (de)serialization used by checkpoints; exact round-trip.
void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);

}  // namespace dqjl
