#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "harmonia/errors.hpp"
#include "harmonia/pianoroll.hpp"
#include "harmonia/rng.hpp"

namespace harmonia {

// Gate order everywhere (parameters, checkpoints): input, forget, output,
// candidate.
inline constexpr int kGateCount = 4;

/// Parameters of one LSTM direction.
struct GateSet {
  std::array<Eigen::MatrixXd, kGateCount> w;  // hidden x input
  std::array<Eigen::MatrixXd, kGateCount> u;  // hidden x hidden
  std::array<Eigen::VectorXd, kGateCount> b;  // hidden

  void resize(int hidden, int input) {
    for (auto& m : w) m = Eigen::MatrixXd::Zero(hidden, input);
    for (auto& m : u) m = Eigen::MatrixXd::Zero(hidden, hidden);
    for (auto& v : b) v = Eigen::VectorXd::Zero(hidden);
  }
};

/// Bidirectional LSTM regressor: 88 binary inputs per tick, one hidden layer
/// per direction, final hidden states concatenated into a linear head. The
/// score is clamped to [0, 100] at inference; training sees the raw output.
struct ListenerNet {
  int input_dim = kKeyCount;
  int hidden = 50;
  std::array<GateSet, 2> dir;  // 0 = left-to-right, 1 = right-to-left
  Eigen::VectorXd fc_weight;   // 2 * hidden
  double fc_bias = 0.0;

  void resize(int hidden_, int input_) {
    input_dim = input_;
    hidden = hidden_;
    for (auto& d : dir) d.resize(hidden_, input_);
    fc_weight = Eigen::VectorXd::Zero(2 * hidden_);
    fc_bias = 0.0;
  }
};

/// Visit every parameter tensor in checkpoint order.
template <typename Net, typename Fn>
void visit_tensors(Net& net, Fn&& fn) {
  for (auto& d : net.dir) {
    for (auto& m : d.w) fn(m.data(), static_cast<std::size_t>(m.size()));
    for (auto& m : d.u) fn(m.data(), static_cast<std::size_t>(m.size()));
    for (auto& v : d.b) fn(v.data(), static_cast<std::size_t>(v.size()));
  }
  fn(net.fc_weight.data(), static_cast<std::size_t>(net.fc_weight.size()));
  fn(&net.fc_bias, std::size_t{1});
}

inline std::size_t parameter_count(const ListenerNet& net) {
  std::size_t n = 0;
  visit_tensors(net, [&](const double*, std::size_t len) { n += len; });
  return n;
}

inline ListenerNet zeros_like(const ListenerNet& net) {
  ListenerNet z;
  z.resize(net.hidden, net.input_dim);
  return z;
}

/// Fresh net with uniform init in [-1/sqrt(hidden), +1/sqrt(hidden)] and the
/// forget-gate bias lifted to +1.
inline ListenerNet make_listener_net(int hidden, std::uint64_t seed, int input_dim = kKeyCount) {
  if (hidden < 1) throw InvalidConfig("hidden size must be >= 1");
  if (input_dim < 1) throw InvalidConfig("input dim must be >= 1");
  ListenerNet net;
  net.resize(hidden, input_dim);
  Rng rng(seed);
  double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  visit_tensors(net, [&](double* data, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) data[i] = (rng.next_double() * 2.0 - 1.0) * bound;
  });
  for (auto& d : net.dir) d.b[1].setConstant(1.0);  // forget gate
  return net;
}

// --- Forward ---------------------------------------------------------------

inline Eigen::MatrixXd to_input_matrix(const PianoMatrix& m) {
  Eigen::MatrixXd x(kKeyCount, m.cols());
  for (int col = 0; col < m.cols(); ++col)
    for (int r = 0; r < kKeyCount; ++r) x(r, col) = m.at(r, col) ? 1.0 : 0.0;
  return x;
}

namespace detail {

struct DirectionTrace {
  std::array<Eigen::MatrixXd, kGateCount> gate;  // post-activation, hidden x T
  Eigen::MatrixXd cell;                          // hidden x T
  Eigen::MatrixXd state;                         // h, hidden x T
};

struct ForwardTrace {
  std::array<DirectionTrace, 2> dir;
  Eigen::VectorXd feature;  // 2 * hidden
};

inline Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& z) { return 1.0 / (1.0 + (-z).exp()); }

/// Run both directions over the columns of x (input_dim x T). Direction 0
/// reads columns left to right, direction 1 right to left; each contributes
/// its final hidden state.
inline double forward_raw_on(const ListenerNet& net, const Eigen::MatrixXd& x,
                             ForwardTrace* trace) {
  const int T = static_cast<int>(x.cols());
  if (T == 0) throw EmptySequence("listener net input has no ticks");
  if (x.rows() != net.input_dim)
    throw ShapeMismatch("listener net expects " + std::to_string(net.input_dim) +
                        " input rows, got " + std::to_string(x.rows()));
  const int H = net.hidden;

  Eigen::VectorXd feature(2 * H);
  for (int d = 0; d < 2; ++d) {
    const GateSet& p = net.dir[d];
    DirectionTrace* tr = trace ? &trace->dir[d] : nullptr;
    if (tr) {
      for (auto& g : tr->gate) g.resize(H, T);
      tr->cell.resize(H, T);
      tr->state.resize(H, T);
    }
    Eigen::VectorXd h = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(H);
    for (int step = 0; step < T; ++step) {
      int col = (d == 0) ? step : T - 1 - step;
      Eigen::VectorXd xt = x.col(col);
      Eigen::ArrayXd gi = sigmoid((p.w[0] * xt + p.u[0] * h + p.b[0]).array());
      Eigen::ArrayXd gf = sigmoid((p.w[1] * xt + p.u[1] * h + p.b[1]).array());
      Eigen::ArrayXd go = sigmoid((p.w[2] * xt + p.u[2] * h + p.b[2]).array());
      Eigen::ArrayXd gg = ((p.w[3] * xt + p.u[3] * h + p.b[3]).array()).tanh();
      Eigen::ArrayXd cn = gf * c.array() + gi * gg;
      Eigen::ArrayXd hn = go * cn.tanh();
      c = cn.matrix();
      h = hn.matrix();
      if (tr) {
        tr->gate[0].col(step) = gi.matrix();
        tr->gate[1].col(step) = gf.matrix();
        tr->gate[2].col(step) = go.matrix();
        tr->gate[3].col(step) = gg.matrix();
        tr->cell.col(step) = c;
        tr->state.col(step) = h;
      }
    }
    feature.segment(d * H, H) = h;
  }
  if (trace) trace->feature = feature;
  return net.fc_weight.dot(feature) + net.fc_bias;
}

}  // namespace detail

/// Unclamped network output; training operates on this.
inline double forward_raw(const ListenerNet& net, const PianoMatrix& m) {
  return detail::forward_raw_on(net, to_input_matrix(m), nullptr);
}

/// Listener score in [0, 100].
inline double forward(const ListenerNet& net, const PianoMatrix& m) {
  return std::clamp(forward_raw(net, m), 0.0, 100.0);
}

// --- Ratings ----------------------------------------------------------------

enum class ListenerGroup { kExpert, kRegular };

inline const char* group_name(ListenerGroup g) {
  return g == ListenerGroup::kExpert ? "expert" : "regular";
}

struct RatingItem {
  std::string piece_id;
  PianoMatrix matrix;
  double score = 0.0;  // mean score in [0, 100]
  int raters = 1;
};

struct RatingDataset {
  ListenerGroup group = ListenerGroup::kExpert;
  std::vector<RatingItem> items;
};

// --- Loss and gradients (BPTT) -----------------------------------------------

struct LossGrads {
  double rmse = 0.0;
  ListenerNet grads;  // same shapes as the net, holding d rmse / d parameter
  std::vector<double> predictions;  // raw (unclamped), one per item
};

namespace detail {

/// Backpropagate one item's output gradient through both directions.
inline void backward_item(const ListenerNet& net, const Eigen::MatrixXd& x,
                          const ForwardTrace& tr, double dy, ListenerNet& grads) {
  const int T = static_cast<int>(x.cols());
  const int H = net.hidden;

  grads.fc_weight += dy * tr.feature;
  grads.fc_bias += dy;

  for (int d = 0; d < 2; ++d) {
    const GateSet& p = net.dir[d];
    const DirectionTrace& dt = tr.dir[d];
    GateSet& gp = grads.dir[d];

    Eigen::ArrayXd dh_next = Eigen::ArrayXd::Zero(H);
    Eigen::ArrayXd dc_next = Eigen::ArrayXd::Zero(H);
    for (int step = T - 1; step >= 0; --step) {
      int col = (d == 0) ? step : T - 1 - step;
      Eigen::ArrayXd dh = dh_next;
      if (step == T - 1) dh += dy * net.fc_weight.segment(d * H, H).array();

      Eigen::ArrayXd gi = dt.gate[0].col(step).array();
      Eigen::ArrayXd gf = dt.gate[1].col(step).array();
      Eigen::ArrayXd go = dt.gate[2].col(step).array();
      Eigen::ArrayXd gg = dt.gate[3].col(step).array();
      Eigen::ArrayXd c = dt.cell.col(step).array();
      Eigen::ArrayXd tanh_c = c.tanh();

      Eigen::ArrayXd dc = dc_next + dh * go * (1.0 - tanh_c.square());
      Eigen::ArrayXd do_ = dh * tanh_c;
      Eigen::ArrayXd c_prev = (step > 0) ? Eigen::ArrayXd(dt.cell.col(step - 1).array())
                                         : Eigen::ArrayXd(Eigen::ArrayXd::Zero(H));
      Eigen::ArrayXd da_i = dc * gg * gi * (1.0 - gi);
      Eigen::ArrayXd da_f = dc * c_prev * gf * (1.0 - gf);
      Eigen::ArrayXd da_o = do_ * go * (1.0 - go);
      Eigen::ArrayXd da_g = dc * gi * (1.0 - gg.square());

      Eigen::VectorXd xt = x.col(col);
      Eigen::VectorXd h_prev =
          (step > 0) ? Eigen::VectorXd(dt.state.col(step - 1)) : Eigen::VectorXd::Zero(H);

      const std::array<Eigen::ArrayXd, kGateCount> da = {da_i, da_f, da_o, da_g};
      dh_next.setZero();
      for (int k = 0; k < kGateCount; ++k) {
        gp.w[k] += da[k].matrix() * xt.transpose();
        gp.u[k] += da[k].matrix() * h_prev.transpose();
        gp.b[k] += da[k].matrix();
        dh_next += (p.u[k].transpose() * da[k].matrix()).array();
      }
      dc_next = dc * gf;
    }
  }
}

}  // namespace detail

/// RMSE over the batch and its gradients via backpropagation through time.
/// Gradients are taken on the pre-clamp output.
inline LossGrads loss_and_gradients(const ListenerNet& net, std::span<const RatingItem> batch) {
  if (batch.empty()) throw DataError("loss_and_gradients: empty batch");
  LossGrads out;
  out.grads = zeros_like(net);

  std::vector<Eigen::MatrixXd> inputs;
  std::vector<detail::ForwardTrace> traces(batch.size());
  inputs.reserve(batch.size());

  double sq_sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    inputs.push_back(to_input_matrix(batch[i].matrix));
    double y = detail::forward_raw_on(net, inputs.back(), &traces[i]);
    out.predictions.push_back(y);
    double e = y - batch[i].score;
    sq_sum += e * e;
  }
  double n = static_cast<double>(batch.size());
  out.rmse = std::sqrt(sq_sum / n);
  if (out.rmse <= 0.0) return out;  // exact fit: gradient is zero

  for (std::size_t i = 0; i < batch.size(); ++i) {
    double e = out.predictions[i] - batch[i].score;
    double dy = e / (n * out.rmse);
    detail::backward_item(net, inputs[i], traces[i], dy, out.grads);
  }
  return out;
}

// --- Training ----------------------------------------------------------------

enum class Optimizer { kAdam, kSgd };

struct TrainConfig {
  int epochs = 5000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;  // drives the per-epoch item order
  Optimizer optimizer = Optimizer::kAdam;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables clipping

  void validate() const {
    if (epochs < 1) throw InvalidConfig("epochs must be >= 1");
    // Rate zero is allowed: it trains nothing but keeps the curve inspectable.
    if (!(learning_rate >= 0)) throw InvalidConfig("learning_rate must be >= 0");
  }
};

namespace detail {

struct AdamState {
  Eigen::VectorXd m, v;
  long long t = 0;

  explicit AdamState(std::size_t n)
      : m(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
        v(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}
};

inline double grad_norm(const ListenerNet& grads) {
  double sq = 0.0;
  visit_tensors(grads, [&](const double* data, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) sq += data[i] * data[i];
  });
  return std::sqrt(sq);
}

inline void scale_grads(ListenerNet& grads, double factor) {
  visit_tensors(grads, [&](double* data, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) data[i] *= factor;
  });
}

}  // namespace detail

struct TrainResult {
  std::vector<double> epoch_rmse;  // one entry per completed epoch
};

/// Gradient-descent training, one sequence per update. Deterministic for a
/// fixed seed. Throws DivergenceDetected when the loss goes non-finite; the
/// net keeps its last finite parameters.
inline TrainResult train(ListenerNet& net, const RatingDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.items.empty()) throw DataError("train: dataset is empty");

  const std::size_t n_params = parameter_count(net);
  detail::AdamState adam(n_params);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  result.epoch_rmse.reserve(cfg.epochs);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Fisher-Yates with the run's own stream.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = rng.next_index(i);
      std::swap(order[i - 1], order[j]);
    }

    double sq_sum = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const RatingItem& item = data.items[order[k]];
      auto lg = loss_and_gradients(net, std::span<const RatingItem>(&item, 1));
      if (!std::isfinite(lg.rmse))
        throw DivergenceDetected("training loss became non-finite at epoch " +
                                 std::to_string(epoch));
      sq_sum += lg.rmse * lg.rmse;  // batch of one: rmse == |error|

      double norm = detail::grad_norm(lg.grads);
      if (!std::isfinite(norm))
        throw DivergenceDetected("gradient became non-finite at epoch " +
                                 std::to_string(epoch));
      if (cfg.clip_norm > 0 && norm > cfg.clip_norm)
        detail::scale_grads(lg.grads, cfg.clip_norm / norm);

      // Walk the net and the gradient holder in lockstep.
      std::vector<std::pair<double*, std::size_t>> net_spans;
      std::vector<std::pair<const double*, std::size_t>> grad_spans;
      visit_tensors(net, [&](double* d, std::size_t len) { net_spans.emplace_back(d, len); });
      visit_tensors(lg.grads,
                    [&](const double* d, std::size_t len) { grad_spans.emplace_back(d, len); });
      if (cfg.optimizer == Optimizer::kAdam) {
        ++adam.t;
        double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.t));
        double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.t));
        std::size_t off = 0;
        for (std::size_t si = 0; si < net_spans.size(); ++si) {
          double* p = net_spans[si].first;
          const double* gd = grad_spans[si].first;
          for (std::size_t i = 0; i < net_spans[si].second; ++i, ++off) {
            double& m = adam.m(static_cast<Eigen::Index>(off));
            double& v = adam.v(static_cast<Eigen::Index>(off));
            m = kBeta1 * m + (1.0 - kBeta1) * gd[i];
            v = kBeta2 * v + (1.0 - kBeta2) * gd[i] * gd[i];
            p[i] -= cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + kAdamEps);
          }
        }
      } else {
        for (std::size_t si = 0; si < net_spans.size(); ++si) {
          for (std::size_t i = 0; i < net_spans[si].second; ++i)
            net_spans[si].first[i] -= cfg.learning_rate * grad_spans[si].first[i];
        }
      }
    }
    result.epoch_rmse.push_back(std::sqrt(sq_sum / static_cast<double>(order.size())));
  }
  return result;
}

// --- Checkpoints --------------------------------------------------------------

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'H', 'A', 'R', 'M', 'N', 'E', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}
inline void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(d));
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64(out, bits);
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view raw(std::size_t n) {
    need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      throw ChecksumMismatch("checkpoint truncated mid-record");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Binary checkpoint: magic, version, hidden, input_dim, grammar_norm, then
/// every parameter tensor in declared order as little-endian doubles, and a
/// trailing FNV-1a checksum over everything before it.
inline void save_model(const ListenerNet& net, const std::string& path,
                       double grammar_norm = 0.0) {
  std::string body;
  body.append(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
  detail::put_u32(body, detail::kCheckpointVersion);
  detail::put_u32(body, static_cast<std::uint32_t>(net.hidden));
  detail::put_u32(body, static_cast<std::uint32_t>(net.input_dim));
  detail::put_f64(body, grammar_norm);
  visit_tensors(net, [&](const double* data, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) detail::put_f64(body, data[i]);
  });
  detail::put_u64(body, detail::fnv1a(body));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

struct LoadedModel {
  ListenerNet net;
  double grammar_norm = 0.0;
};

inline LoadedModel load_model(const std::string& path,
                              std::optional<int> expect_hidden = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(detail::kCheckpointMagic) + 8)
    throw ChecksumMismatch("checkpoint truncated: " + path);
  std::string body = bytes.substr(0, bytes.size() - 8);
  detail::ByteReader tail(std::string_view(bytes).substr(bytes.size() - 8));
  if (detail::fnv1a(body) != tail.u64())
    throw ChecksumMismatch("checkpoint checksum mismatch: " + path);

  detail::ByteReader r(body);
  if (r.raw(sizeof(detail::kCheckpointMagic)) !=
      std::string_view(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic)))
    throw VersionMismatch("not a listener-net checkpoint: " + path);
  std::uint32_t version = r.u32();
  if (version != detail::kCheckpointVersion)
    throw VersionMismatch("checkpoint version " + std::to_string(version) + ", expected " +
                          std::to_string(detail::kCheckpointVersion) + ": " + path);
  int hidden = static_cast<int>(r.u32());
  int input_dim = static_cast<int>(r.u32());
  if (hidden < 1 || input_dim < 1)
    throw VersionMismatch("checkpoint declares degenerate shapes (hidden " +
                          std::to_string(hidden) + ", input " + std::to_string(input_dim) +
                          "): " + path);
  if (expect_hidden && *expect_hidden != hidden)
    throw VersionMismatch("checkpoint hidden size " + std::to_string(hidden) + ", expected " +
                          std::to_string(*expect_hidden) + ": " + path);

  LoadedModel loaded;
  loaded.grammar_norm = r.f64();
  loaded.net.resize(hidden, input_dim);
  if (r.remaining() != parameter_count(loaded.net) * 8)
    throw VersionMismatch("checkpoint payload holds " + std::to_string(r.remaining() / 8) +
                          " doubles, shapes (hidden " + std::to_string(hidden) + ", input " +
                          std::to_string(input_dim) + ") need " +
                          std::to_string(parameter_count(loaded.net)) + ": " + path);
  visit_tensors(loaded.net, [&](double* data, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) data[i] = r.f64();
  });
  return loaded;
}

}  // namespace harmonia
