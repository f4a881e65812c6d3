#include "pcl/lstm.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace pcl {

namespace {

using Mat = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutMat = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using Vec = Eigen::Map<const Eigen::VectorXd>;
using MutVec = Eigen::Map<Eigen::VectorXd>;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Views {
  Mat w, wo;
  Vec b, bo;
};

}  // namespace

LstmShape::LstmShape(int input, int hidden, int output, std::size_t offset)
    : input_(input), hidden_(hidden), output_(output), offset_(offset) {
  if (input < 1 || hidden < 1 || output < 1) throw std::invalid_argument("LstmShape: sizes must be positive");
}

std::size_t LstmShape::size() const {
  const auto h = static_cast<std::size_t>(hidden_);
  const auto i = static_cast<std::size_t>(input_);
  const auto o = static_cast<std::size_t>(output_);
  return 4 * h * (i + h) + 4 * h + o * h + o;
}

void LstmShape::initialize(std::span<double> params, Rng& rng) const {
  std::span<double> p = params.subspan(offset_, size());
  for (double& x : p) x = rng.uniform(-0.08, 0.08);
  const auto h = static_cast<std::size_t>(hidden_);
  const std::size_t bias = 4 * h * static_cast<std::size_t>(input_ + hidden_);
  for (std::size_t k = 0; k < h; ++k) p[bias + h + k] = 1.0;
}

LstmState LstmShape::initial_state() const {
  return {std::vector<double>(static_cast<std::size_t>(hidden_), 0.0),
          std::vector<double>(static_cast<std::size_t>(hidden_), 0.0)};
}

#define PCL_LSTM_VIEWS(params)                                                                 \
  const int H = hidden_, I = input_, O = output_;                                              \
  const double* base = (params).data() + offset_;                                              \
  Mat W(base, 4 * H, I + H);                                                                    \
  Vec B(base + 4 * H * (I + H), 4 * H);                                                         \
  Mat WO(base + 4 * H * (I + H) + 4 * H, O, H);                                                 \
  Vec BO(base + 4 * H * (I + H) + 4 * H + O * H, O)

void LstmShape::step(std::span<const double> params, LstmState& state, std::span<const double> x,
                     std::span<double> out) const {
  PCL_LSTM_VIEWS(params);
  Eigen::VectorXd xh(I + H);
  xh.head(I) = Vec(x.data(), I);
  xh.tail(H) = Vec(state.h.data(), H);
  Eigen::VectorXd z = W * xh + B;
  MutVec h(state.h.data(), H), c(state.c.data(), H);
  for (int k = 0; k < H; ++k) {
    const double ig = sigmoid(z(k)), fg = sigmoid(z(H + k)), gg = std::tanh(z(2 * H + k)), og = sigmoid(z(3 * H + k));
    c(k) = fg * c(k) + ig * gg;
    h(k) = og * std::tanh(c(k));
  }
  MutVec(out.data(), O) = WO * h + BO;
}

void LstmShape::forward(std::span<const double> params, std::span<const double> inputs, std::size_t steps,
                        std::span<double> outputs, LstmCache* cache) const {
  PCL_LSTM_VIEWS(params);
  if (inputs.size() != steps * static_cast<std::size_t>(I) || outputs.size() != steps * static_cast<std::size_t>(O))
    throw std::invalid_argument("LstmShape::forward: size mismatch");
  if (cache) {
    cache->steps = steps;
    cache->inputs.assign(inputs.begin(), inputs.end());
    cache->gates.resize(steps * 4 * static_cast<std::size_t>(H));
    cache->cells.resize(steps * static_cast<std::size_t>(H));
    cache->hidden.resize(steps * static_cast<std::size_t>(H));
  }
  Eigen::VectorXd h = Eigen::VectorXd::Zero(H), c = Eigen::VectorXd::Zero(H), xh(I + H), z(4 * H);
  for (std::size_t t = 0; t < steps; ++t) {
    xh.head(I) = Vec(inputs.data() + t * static_cast<std::size_t>(I), I);
    xh.tail(H) = h;
    z.noalias() = W * xh;
    z += B;
    for (int k = 0; k < H; ++k) {
      z(k) = sigmoid(z(k));
      z(H + k) = sigmoid(z(H + k));
      z(2 * H + k) = std::tanh(z(2 * H + k));
      z(3 * H + k) = sigmoid(z(3 * H + k));
      c(k) = z(H + k) * c(k) + z(k) * z(2 * H + k);
      h(k) = z(3 * H + k) * std::tanh(c(k));
    }
    MutVec(outputs.data() + t * static_cast<std::size_t>(O), O).noalias() = WO * h;
    MutVec(outputs.data() + t * static_cast<std::size_t>(O), O) += BO;
    if (cache) {
      MutVec(cache->gates.data() + t * 4 * static_cast<std::size_t>(H), 4 * H) = z;
      MutVec(cache->cells.data() + t * static_cast<std::size_t>(H), H) = c;
      MutVec(cache->hidden.data() + t * static_cast<std::size_t>(H), H) = h;
    }
  }
}

void LstmShape::backward(std::span<const double> params, const LstmCache& cache, std::span<const double> doutputs,
                         std::span<double> grad) const {
  PCL_LSTM_VIEWS(params);
  (void)B;
  (void)BO;
  const std::size_t steps = cache.steps;
  double* gbase = grad.data() + offset_;
  MutMat gW(gbase, 4 * H, I + H);
  MutVec gB(gbase + 4 * H * (I + H), 4 * H);
  MutMat gWO(gbase + 4 * H * (I + H) + 4 * H, O, H);
  MutVec gBO(gbase + 4 * H * (I + H) + 4 * H + O * H, O);

  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H), dc_next = Eigen::VectorXd::Zero(H);
  Eigen::VectorXd dz(4 * H), xh(I + H), dxh(I + H), dh(H);
  const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(H);
  for (std::size_t t = steps; t-- > 0;) {
    Vec dy(doutputs.data() + t * static_cast<std::size_t>(O), O);
    Vec h(cache.hidden.data() + t * static_cast<std::size_t>(H), H);
    Vec c(cache.cells.data() + t * static_cast<std::size_t>(H), H);
    Vec g(cache.gates.data() + t * 4 * static_cast<std::size_t>(H), 4 * H);
    const double* c_prev = t > 0 ? cache.cells.data() + (t - 1) * static_cast<std::size_t>(H) : zeros.data();
    const double* h_prev = t > 0 ? cache.hidden.data() + (t - 1) * static_cast<std::size_t>(H) : zeros.data();

    gWO.noalias() += dy * h.transpose();
    gBO += dy;
    dh.noalias() = WO.transpose() * dy;
    dh += dh_next;
    for (int k = 0; k < H; ++k) {
      const double ig = g(k), fg = g(H + k), gg = g(2 * H + k), og = g(3 * H + k);
      const double tc = std::tanh(c(k));
      const double dc = dh(k) * og * (1.0 - tc * tc) + dc_next(k);
      dz(k) = dc * gg * ig * (1.0 - ig);
      dz(H + k) = dc * c_prev[k] * fg * (1.0 - fg);
      dz(2 * H + k) = dc * ig * (1.0 - gg * gg);
      dz(3 * H + k) = dh(k) * tc * og * (1.0 - og);
      dc_next(k) = dc * fg;
    }
    xh.head(I) = Vec(cache.inputs.data() + t * static_cast<std::size_t>(I), I);
    xh.tail(H) = Vec(h_prev, H);
    gW.noalias() += dz * xh.transpose();
    gB += dz;
    dxh.noalias() = W.transpose() * dz;
    dh_next = dxh.tail(H);
  }
}

#undef PCL_LSTM_VIEWS

}  // namespace pcl
