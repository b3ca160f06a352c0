#include "dqjl/neural.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "dqjl/errors.hpp"

namespace dqjl {
namespace {

void add_bias_rows(Matrix& y, const Matrix& b) {
  for (std::size_t r = 0; r < y.rows(); ++r) {
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += b[c];
  }
}

void accumulate_col_sums(const Matrix& gy, Matrix& gb) {
  for (std::size_t r = 0; r < gy.rows(); ++r) {
    for (std::size_t c = 0; c < gy.cols(); ++c) gb[c] += gy(r, c);
  }
}

Matrix relu(const Matrix& z) {
  Matrix y = z;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(0.0, y[i]);
  return y;
}

Matrix relu_backward(const Matrix& z, const Matrix& gy) {
  Matrix gz = gy;
  for (std::size_t i = 0; i < gz.size(); ++i) {
    if (z[i] <= 0.0) gz[i] = 0.0;
  }
  return gz;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void uniform_init(Matrix& m, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = dist(rng);
}

const Matrix& zeros_if_empty(const Matrix& m, Matrix& scratch, std::size_t rows,
                             std::size_t cols) {
  if (!m.empty()) return m;
  scratch = Matrix(rows, cols);
  return scratch;
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear

void Linear::init(Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
  uniform_init(w, bound, rng);
  uniform_init(b, bound, rng);
}

Matrix Linear::forward(const Matrix& x) const {
  if (x.cols() != in_dim()) throw contract_error("Linear::forward input width");
  Matrix y(x.rows(), out_dim());
  gemm_nt(x, w, y);
  add_bias_rows(y, b);
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& gy) {
  if (x.rows() != gy.rows() || gy.cols() != out_dim() || x.cols() != in_dim()) {
    throw contract_error("Linear::backward shape mismatch");
  }
  gemm_tn(gy, x, gw, /*accumulate=*/true);
  accumulate_col_sums(gy, gb);
  Matrix gx(x.rows(), in_dim());
  gemm_nn(gy, w, gx);
  return gx;
}

// ---------------------------------------------------------------------------
// LayerNorm

Matrix LayerNorm::forward(const Matrix& x, Cache& cache) const {
  std::size_t n = dim();
  if (x.cols() != n) throw contract_error("LayerNorm::forward input width");
  cache.xhat = Matrix(x.rows(), n);
  cache.inv_std = Matrix(x.rows(), 1);
  Matrix y(x.rows(), n);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) mean += x(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      double d = x(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    double inv_std = 1.0 / std::sqrt(var + kEps);
    cache.inv_std(r, 0) = inv_std;
    for (std::size_t c = 0; c < n; ++c) {
      double xhat = (x(r, c) - mean) * inv_std;
      cache.xhat(r, c) = xhat;
      y(r, c) = gamma[c] * xhat + beta[c];
    }
  }
  return y;
}

Matrix LayerNorm::backward(const Cache& cache, const Matrix& gy) {
  std::size_t n = dim();
  if (cache.xhat.empty()) throw contract_error("LayerNorm::backward before forward");
  if (!gy.same_shape(cache.xhat)) throw contract_error("LayerNorm::backward shape");
  Matrix gx(gy.rows(), n);
  for (std::size_t r = 0; r < gy.rows(); ++r) {
    double sum_gh = 0.0, sum_gh_xhat = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      double gh = gy(r, c) * gamma[c];
      sum_gh += gh;
      sum_gh_xhat += gh * cache.xhat(r, c);
      ggamma[c] += gy(r, c) * cache.xhat(r, c);
      gbeta[c] += gy(r, c);
    }
    double mean_gh = sum_gh / static_cast<double>(n);
    double mean_gh_xhat = sum_gh_xhat / static_cast<double>(n);
    double inv_std = cache.inv_std(r, 0);
    for (std::size_t c = 0; c < n; ++c) {
      double gh = gy(r, c) * gamma[c];
      gx(r, c) = inv_std * (gh - mean_gh - cache.xhat(r, c) * mean_gh_xhat);
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// LstmCell

void LstmCell::init(Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim()));
  uniform_init(w_ih, bound, rng);
  uniform_init(w_hh, bound, rng);
  uniform_init(b, bound, rng);
  std::size_t h = hidden_dim();
  for (std::size_t c = h; c < 2 * h; ++c) b[c] = 1.0;  // forget gate open
}

void LstmCell::forward(const Matrix& x, const Matrix& h_prev,
                       const Matrix& c_prev, Matrix& h_out, Matrix& c_out,
                       Cache& cache) const {
  std::size_t hd = hidden_dim();
  std::size_t batch = x.rows();
  if (x.cols() != input_dim()) throw contract_error("LstmCell::forward input width");
  Matrix h_scratch, c_scratch;
  const Matrix& h0 = zeros_if_empty(h_prev, h_scratch, batch, hd);
  const Matrix& c0 = zeros_if_empty(c_prev, c_scratch, batch, hd);
  if (h0.rows() != batch || h0.cols() != hd || c0.rows() != batch || c0.cols() != hd) {
    throw contract_error("LstmCell::forward carry shape");
  }

  Matrix z(batch, 4 * hd);
  gemm_nt(x, w_ih, z);
  gemm_nt(h0, w_hh, z, /*accumulate=*/true);
  add_bias_rows(z, b);

  cache.x = x;
  cache.h_prev = h0;
  cache.c_prev = c0;
  cache.gate_i = Matrix(batch, hd);
  cache.gate_f = Matrix(batch, hd);
  cache.gate_g = Matrix(batch, hd);
  cache.gate_o = Matrix(batch, hd);
  cache.c_new = Matrix(batch, hd);
  cache.tanh_c = Matrix(batch, hd);
  h_out = Matrix(batch, hd);
  c_out = Matrix(batch, hd);

  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t k = 0; k < hd; ++k) {
      double gi = sigmoid(z(r, k));
      double gf = sigmoid(z(r, hd + k));
      double gg = std::tanh(z(r, 2 * hd + k));
      double go = sigmoid(z(r, 3 * hd + k));
      double cn = gf * c0(r, k) + gi * gg;
      double tc = std::tanh(cn);
      cache.gate_i(r, k) = gi;
      cache.gate_f(r, k) = gf;
      cache.gate_g(r, k) = gg;
      cache.gate_o(r, k) = go;
      cache.c_new(r, k) = cn;
      cache.tanh_c(r, k) = tc;
      c_out(r, k) = cn;
      h_out(r, k) = go * tc;
    }
  }
}

Matrix LstmCell::backward(const Cache& cache, const Matrix& gh,
                          const Matrix& gc, Matrix& gh_prev, Matrix& gc_prev) {
  if (cache.x.empty()) throw contract_error("LstmCell::backward before forward");
  std::size_t hd = hidden_dim();
  std::size_t batch = cache.x.rows();
  Matrix gh_scratch, gc_scratch;
  const Matrix& gh0 = zeros_if_empty(gh, gh_scratch, batch, hd);
  const Matrix& gc0 = zeros_if_empty(gc, gc_scratch, batch, hd);

  Matrix dz(batch, 4 * hd);
  gh_prev = Matrix(batch, hd);
  gc_prev = Matrix(batch, hd);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t k = 0; k < hd; ++k) {
      double gi = cache.gate_i(r, k), gf = cache.gate_f(r, k);
      double gg = cache.gate_g(r, k), go = cache.gate_o(r, k);
      double tc = cache.tanh_c(r, k);
      double dh = gh0(r, k);
      double dc = gc0(r, k) + dh * go * (1.0 - tc * tc);
      double d_o = dh * tc;
      dz(r, 3 * hd + k) = d_o * go * (1.0 - go);
      dz(r, k) = dc * gg * gi * (1.0 - gi);
      dz(r, 2 * hd + k) = dc * gi * (1.0 - gg * gg);
      dz(r, hd + k) = dc * cache.c_prev(r, k) * gf * (1.0 - gf);
      gc_prev(r, k) = dc * gf;
    }
  }

  gemm_tn(dz, cache.x, gw_ih, /*accumulate=*/true);
  gemm_tn(dz, cache.h_prev, gw_hh, /*accumulate=*/true);
  accumulate_col_sums(dz, gb);

  Matrix gx(batch, input_dim());
  gemm_nn(dz, w_ih, gx);
  Matrix gh_prev_local(batch, hd);
  gemm_nn(dz, w_hh, gh_prev_local);
  gh_prev = std::move(gh_prev_local);
  return gx;
}

// ---------------------------------------------------------------------------
// Softmax / Gumbel-softmax

Matrix softmax_rows(const Matrix& logits) {
  Matrix y(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double mx = logits(r, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c) mx = std::max(mx, logits(r, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      double e = std::exp(logits(r, c) - mx);
      y(r, c) = e;
      denom += e;
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) y(r, c) /= denom;
  }
  return y;
}

Matrix softmax_backward(const Matrix& y, const Matrix& gy) {
  if (!y.same_shape(gy)) throw contract_error("softmax_backward shape");
  Matrix gz(y.rows(), y.cols());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < y.cols(); ++c) dot += gy(r, c) * y(r, c);
    for (std::size_t c = 0; c < y.cols(); ++c) {
      gz(r, c) = y(r, c) * (gy(r, c) - dot);
    }
  }
  return gz;
}

Matrix sample_gumbel_noise(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix g(rows, cols);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = gumbel_sample(rng);
  return g;
}

Matrix gumbel_softmax_with_noise(const Matrix& logits, const Matrix& noise,
                                 double temperature, bool hard,
                                 Matrix* soft_out) {
  if (temperature <= 0.0) throw contract_error("gumbel_softmax temperature must be > 0");
  if (!logits.same_shape(noise)) throw contract_error("gumbel_softmax noise shape");
  Matrix z(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = (logits[i] + noise[i]) / temperature;
  }
  Matrix soft = softmax_rows(z);
  if (soft_out != nullptr) *soft_out = soft;
  if (!hard) return soft;
  Matrix one_hot(soft.rows(), soft.cols());
  for (std::size_t r = 0; r < soft.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < soft.cols(); ++c) {
      if (soft(r, c) > soft(r, best)) best = c;
    }
    one_hot(r, best) = 1.0;
  }
  return one_hot;
}

Matrix gumbel_softmax(const Matrix& logits, double temperature, Rng& rng,
                      bool hard, Matrix* soft_out) {
  Matrix noise = sample_gumbel_noise(logits.rows(), logits.cols(), rng);
  return gumbel_softmax_with_noise(logits, noise, temperature, hard, soft_out);
}

Matrix gumbel_softmax_backward(const Matrix& y_soft, const Matrix& gy,
                               double temperature) {
  if (temperature <= 0.0) throw contract_error("gumbel_softmax temperature must be > 0");
  Matrix gz = softmax_backward(y_soft, gy);
  for (std::size_t i = 0; i < gz.size(); ++i) gz[i] /= temperature;
  return gz;
}

// ---------------------------------------------------------------------------
// PolicyNet

void PolicyNet::init(Rng& rng) {
  fc1.init(rng);
  fc2.init(rng);
  lstm.init(rng);
  head.init(rng);
}

Matrix PolicyNet::forward(const Matrix& x, const Matrix& h, const Matrix& c,
                          Matrix& h_out, Matrix& c_out, Cache& cache) const {
  if (x.cols() != kObsDim) throw contract_error("PolicyNet::forward input width");
  cache.x = x;
  cache.a0 = ln1.forward(x, cache.ln1c);
  cache.z1 = fc1.forward(cache.a0);
  cache.r1 = relu(cache.z1);
  cache.a1 = ln2.forward(cache.r1, cache.ln2c);
  cache.z2 = fc2.forward(cache.a1);
  cache.r2 = relu(cache.z2);
  lstm.forward(cache.r2, h, c, h_out, c_out, cache.lstmc);
  cache.h_out = h_out;
  Matrix logits = head.forward(h_out);
  logits.check_finite("PolicyNet logits");
  return logits;
}

void PolicyNet::backward(const Cache& cache, const Matrix& g_logits,
                         const Matrix& gh_out, const Matrix& gc_out,
                         Matrix& gh_prev, Matrix& gc_prev) {
  if (cache.x.empty()) throw contract_error("PolicyNet::backward before forward");
  Matrix gh = head.backward(cache.h_out, g_logits);
  if (!gh_out.empty()) {
    for (std::size_t i = 0; i < gh.size(); ++i) gh[i] += gh_out[i];
  }
  Matrix gr2 = lstm.backward(cache.lstmc, gh, gc_out, gh_prev, gc_prev);
  Matrix gz2 = relu_backward(cache.z2, gr2);
  Matrix ga1 = fc2.backward(cache.a1, gz2);
  Matrix gr1 = ln2.backward(cache.ln2c, ga1);
  Matrix gz1 = relu_backward(cache.z1, gr1);
  Matrix ga0 = fc1.backward(cache.a0, gz1);
  ln1.backward(cache.ln1c, ga0);
}

void PolicyNet::backward_sequence(std::span<Cache> caches,
                                  std::span<const Matrix> g_logits_per_step) {
  if (caches.size() != g_logits_per_step.size()) {
    throw contract_error("backward_sequence length mismatch");
  }
  Matrix gh_next, gc_next;  // empty at the last recorded step
  for (std::size_t t = caches.size(); t-- > 0;) {
    Matrix gh_prev, gc_prev;
    backward(caches[t], g_logits_per_step[t], gh_next, gc_next, gh_prev,
             gc_prev);
    gh_next = std::move(gh_prev);
    gc_next = std::move(gc_prev);
  }
}

std::vector<Matrix*> PolicyNet::params() {
  return {&ln1.gamma, &ln1.beta, &fc1.w, &fc1.b, &ln2.gamma, &ln2.beta,
          &fc2.w,     &fc2.b,    &lstm.w_ih, &lstm.w_hh, &lstm.b, &head.w,
          &head.b};
}

std::vector<const Matrix*> PolicyNet::params() const {
  return {&ln1.gamma, &ln1.beta, &fc1.w, &fc1.b, &ln2.gamma, &ln2.beta,
          &fc2.w,     &fc2.b,    &lstm.w_ih, &lstm.w_hh, &lstm.b, &head.w,
          &head.b};
}

std::vector<Matrix*> PolicyNet::grads() {
  return {&ln1.ggamma, &ln1.gbeta, &fc1.gw, &fc1.gb, &ln2.ggamma, &ln2.gbeta,
          &fc2.gw,     &fc2.gb,    &lstm.gw_ih, &lstm.gw_hh, &lstm.gb,
          &head.gw,    &head.gb};
}

void PolicyNet::zero_grad() {
  for (Matrix* g : grads()) g->fill(0.0);
}

// ---------------------------------------------------------------------------
// ValueNet

void ValueNet::init(Rng& rng) {
  fc1.init(rng);
  fc2.init(rng);
  fc3.init(rng);
  out.init(rng);
}

Matrix ValueNet::forward(const Matrix& x, Cache& cache) const {
  if (x.cols() != input_dim()) throw contract_error("ValueNet::forward input width");
  cache.x = x;
  cache.z1 = fc1.forward(x);
  cache.r1 = relu(cache.z1);
  cache.z2 = fc2.forward(cache.r1);
  cache.r2 = relu(cache.z2);
  cache.z3 = fc3.forward(cache.r2);
  cache.r3 = relu(cache.z3);
  Matrix value = out.forward(cache.r3);
  value.check_finite("ValueNet output");
  return value;
}

Matrix ValueNet::backward(const Cache& cache, const Matrix& g_out) {
  if (cache.x.empty()) throw contract_error("ValueNet::backward before forward");
  Matrix gr3 = out.backward(cache.r3, g_out);
  Matrix gz3 = relu_backward(cache.z3, gr3);
  Matrix gr2 = fc3.backward(cache.r2, gz3);
  Matrix gz2 = relu_backward(cache.z2, gr2);
  Matrix gr1 = fc2.backward(cache.r1, gz2);
  Matrix gz1 = relu_backward(cache.z1, gr1);
  return fc1.backward(cache.x, gz1);
}

std::vector<Matrix*> ValueNet::params() {
  return {&fc1.w, &fc1.b, &fc2.w, &fc2.b, &fc3.w, &fc3.b, &out.w, &out.b};
}

std::vector<const Matrix*> ValueNet::params() const {
  return {&fc1.w, &fc1.b, &fc2.w, &fc2.b, &fc3.w, &fc3.b, &out.w, &out.b};
}

std::vector<Matrix*> ValueNet::grads() {
  return {&fc1.gw, &fc1.gb, &fc2.gw, &fc2.gb, &fc3.gw, &fc3.gb, &out.gw,
          &out.gb};
}

void ValueNet::zero_grad() {
  for (Matrix* g : grads()) g->fill(0.0);
}

// ---------------------------------------------------------------------------
// Single-observation wrappers

PolicyStepOut policy_forward(const PolicyNet& net, std::span<const double> obs,
                             const Carry& carry) {
  if (obs.size() != PolicyNet::kObsDim) {
    throw contract_error("policy_forward expects a 42-feature observation");
  }
  Matrix x(1, PolicyNet::kObsDim);
  std::copy(obs.begin(), obs.end(), x.data());
  x.check_finite("policy_forward input");
  Matrix h, c;
  if (!carry.empty()) {
    if (carry.h.size() != PolicyNet::kHidden2 ||
        carry.c.size() != PolicyNet::kHidden2) {
      throw contract_error("policy_forward carry size");
    }
    h = Matrix(1, PolicyNet::kHidden2);
    c = Matrix(1, PolicyNet::kHidden2);
    std::copy(carry.h.begin(), carry.h.end(), h.data());
    std::copy(carry.c.begin(), carry.c.end(), c.data());
  }
  Matrix h_out, c_out;
  PolicyNet::Cache cache;
  Matrix logits = net.forward(x, h, c, h_out, c_out, cache);
  Matrix probs = softmax_rows(logits);
  PolicyStepOut result;
  result.logits = {logits(0, 0), logits(0, 1)};
  result.probs = {probs(0, 0), probs(0, 1)};
  result.carry.h.assign(h_out.data(), h_out.data() + h_out.size());
  result.carry.c.assign(c_out.data(), c_out.data() + c_out.size());
  return result;
}

double value_forward(const ValueNet& net, std::span<const double> joint_state,
                     std::span<const double> joint_action) {
  std::size_t slots = net.input_dim() / 8;
  if (joint_state.size() != 7 * slots || joint_action.size() != slots) {
    throw contract_error("value_forward input sizes");
  }
  Matrix x(1, net.input_dim());
  std::copy(joint_state.begin(), joint_state.end(), x.data());
  std::copy(joint_action.begin(), joint_action.end(),
            x.data() + joint_state.size());
  x.check_finite("value_forward input");
  ValueNet::Cache cache;
  Matrix value = net.forward(x, cache);
  return value(0, 0);
}

// ---------------------------------------------------------------------------
// Optimizer / target maintenance

AdamState make_adam(double lr, const std::vector<Matrix*>& params) {
  AdamState state;
  state.lr = lr;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const Matrix* p : params) {
    state.m.emplace_back(p->rows(), p->cols());
    state.v.emplace_back(p->rows(), p->cols());
  }
  return state;
}

void adam_step(AdamState& state, const std::vector<Matrix*>& params,
               const std::vector<Matrix*>& grads) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw contract_error("adam_step parameter list mismatch");
  }
  state.step_count += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& w = *params[p];
    const Matrix& g = *grads[p];
    Matrix& m = state.m[p];
    Matrix& v = state.v[p];
    if (!w.same_shape(g) || !w.same_shape(m)) {
      throw contract_error("adam_step shape mismatch");
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      w[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    w.check_finite("adam_step parameters");
  }
}

void soft_update(const std::vector<Matrix*>& target,
                 const std::vector<const Matrix*>& online, double tau) {
  if (tau < 0.0 || tau > 1.0) throw contract_error("soft_update tau out of range");
  if (target.size() != online.size()) {
    throw contract_error("soft_update parameter list mismatch");
  }
  for (std::size_t p = 0; p < target.size(); ++p) {
    Matrix& t = *target[p];
    const Matrix& o = *online[p];
    if (!t.same_shape(o)) throw contract_error("soft_update shape mismatch");
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = (1.0 - tau) * t[i] + tau * o[i];
    }
  }
}

// ---------------------------------------------------------------------------
// Serialization

void write_matrix(std::ostream& out, const Matrix& m) {
  std::uint64_t rows = m.rows(), cols = m.cols();
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix read_matrix(std::istream& in) {
  std::uint64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in) throw parse_error("truncated matrix header");
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw parse_error("truncated matrix payload");
  return m;
}

}  // namespace dqjl
