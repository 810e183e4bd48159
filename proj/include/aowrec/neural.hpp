/*
 * Copyright 2026 The aowrec Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef AOWREC_NEURAL_HPP_
#define AOWREC_NEURAL_HPP_

// Causal self-attention next-item model with hand-written backpropagation.
//
// Forward pass for a window of T items:
//   X0 = ItemEmb[items] + PosEmb[0..T)
//   per layer:  Y  = X + concat_h(softmax_causal(Q_h K_h^T / sqrt(dh)) V_h) Wo
//               X' = Y + gelu(Y W1 + b1) W2 + b2
//   logits = X_L OutW^T + out_b          (T x V, row t predicts item t+1)

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aowrec/common.hpp"
#include "aowrec/scorer.hpp"

namespace aowrec {

struct NetShape {
  std::int32_t vocab_size = 0;
  int embed_dim = 32;
  int num_heads = 2;
  int num_layers = 1;
  int max_context = 50;
  int ffn_dim = 64;

  bool operator==(const NetShape&) const = default;

  void Validate() const {
    if (vocab_size < 1) throw std::invalid_argument("neural: vocab_size must be >= 1");
    if (embed_dim < 4) throw std::invalid_argument("neural: embed_dim must be >= 4");
    if (num_heads < 1 || embed_dim % num_heads != 0) {
      throw std::invalid_argument("neural: embed_dim must be divisible by num_heads");
    }
    if (num_layers < 1) throw std::invalid_argument("neural: num_layers must be >= 1");
    if (max_context < 2) throw std::invalid_argument("neural: max_context must be >= 2");
    if (ffn_dim < 1) throw std::invalid_argument("neural: ffn_dim must be >= 1");
  }
};

template <typename T>
class NeuralNet {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Row = Eigen::Matrix<T, 1, Eigen::Dynamic>;

  struct Param {
    std::string name;
    Mat value;
  };

  // Per-layer parameter slots.
  enum Slot : int { kWq = 0, kWk, kWv, kWo, kW1, kB1, kW2, kB2, kPerLayer };

  NeuralNet() = default;

  explicit NeuralNet(const NetShape& shape) : shape_(shape) {
    shape.Validate();
    const int d = shape.embed_dim;
    const int f = shape.ffn_dim;
    params_.push_back({"item_emb", Mat::Zero(shape.vocab_size, d)});
    params_.push_back({"pos_emb", Mat::Zero(shape.max_context, d)});
    for (int l = 0; l < shape.num_layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      params_.push_back({p + "wq", Mat::Zero(d, d)});
      params_.push_back({p + "wk", Mat::Zero(d, d)});
      params_.push_back({p + "wv", Mat::Zero(d, d)});
      params_.push_back({p + "wo", Mat::Zero(d, d)});
      params_.push_back({p + "w1", Mat::Zero(d, f)});
      params_.push_back({p + "b1", Mat::Zero(1, f)});
      params_.push_back({p + "w2", Mat::Zero(f, d)});
      params_.push_back({p + "b2", Mat::Zero(1, d)});
    }
    params_.push_back({"out_w", Mat::Zero(shape.vocab_size, d)});
    params_.push_back({"out_b", Mat::Zero(1, shape.vocab_size)});
  }

  // Embeddings ~ N(0, 0.1^2), dense weights ~ N(0, 1/fan_in), biases zero.
  void Initialize(std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      const bool is_bias = p.value.rows() == 1;
      const bool is_embedding = static_cast<int>(i) == kItemEmb || static_cast<int>(i) == kPosEmb ||
                                static_cast<int>(i) == OutWIndex();
      const double stddev =
          is_embedding ? 0.1 : 1.0 / std::sqrt(static_cast<double>(p.value.rows()));
      for (Eigen::Index j = 0; j < p.value.size(); ++j) {
        p.value.data()[j] = is_bias ? T(0) : static_cast<T>(stddev * rng.Normal());
      }
    }
  }

  const NetShape& shape() const { return shape_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  template <typename U>
  NeuralNet<U> Cast() const {
    NeuralNet<U> out(shape_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      out.params()[i].value = params_[i].value.template cast<U>();
    }
    return out;
  }

  std::vector<Mat> ZeroGrads() const {
    std::vector<Mat> g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    return g;
  }

  // sum_t weight * CE(logits_t, targets[t]); adds the gradient into `grads`
  // when non-null. `inputs` must fit in max_context.
  T SequenceLoss(std::span<const ItemId> inputs, std::span<const ItemId> targets, T weight,
                 std::vector<Mat>* grads) const {
    const auto t_len = static_cast<Eigen::Index>(inputs.size());
    std::vector<LayerCache> caches;
    const Mat xn = Forward(inputs, grads ? &caches : nullptr);
    Mat logits = xn * W(OutWIndex()).transpose();
    logits.rowwise() += W(OutBIndex()).row(0);
    T loss = 0;
    Mat dz;
    if (grads) dz.resize(t_len, shape_.vocab_size);
    for (Eigen::Index t = 0; t < t_len; ++t) {
      const T mx = logits.row(t).maxCoeff();
      const Row e = (logits.row(t).array() - mx).exp().matrix();
      const T sum = e.sum();
      const auto tgt = static_cast<Eigen::Index>(targets[static_cast<std::size_t>(t)]);
      loss += weight * (std::log(sum) + mx - logits(t, tgt));
      if (grads) {
        dz.row(t) = e * (weight / sum);
        dz(t, tgt) -= weight;
      }
    }
    if (grads) Backward(inputs, caches, xn, dz, *grads);
    return loss;
  }

  // Softmax over next-item logits at every position.
  Mat Probabilities(std::span<const ItemId> inputs) const {
    const Mat xn = Forward(inputs, nullptr);
    Mat probs = xn * W(OutWIndex()).transpose();
    probs.rowwise() += W(OutBIndex()).row(0);
    for (Eigen::Index t = 0; t < probs.rows(); ++t) {
      const T mx = probs.row(t).maxCoeff();
      probs.row(t) = (probs.row(t).array() - mx).exp().matrix();
      probs.row(t) /= probs.row(t).sum();
    }
    return probs;
  }

  // Logits after the last item; only the trailing max_context items are seen.
  Row LastLogits(std::span<const ItemId> prefix) const {
    const auto c = static_cast<std::size_t>(shape_.max_context);
    if (prefix.size() > c) prefix = prefix.subspan(prefix.size() - c);
    const Mat xn = Forward(prefix, nullptr);
    Row out = xn.row(xn.rows() - 1) * W(OutWIndex()).transpose();
    out += W(OutBIndex());
    return out;
  }

  static constexpr int kItemEmb = 0;
  static constexpr int kPosEmb = 1;
  int LayerIndex(int layer, int slot) const { return 2 + kPerLayer * layer + slot; }
  int OutWIndex() const { return 2 + kPerLayer * shape_.num_layers; }
  int OutBIndex() const { return OutWIndex() + 1; }

 private:
  struct LayerCache {
    Mat x, q, k, v, o, y, h1, g;
    std::vector<Mat> attn;
  };

  const Mat& W(int i) const { return params_[static_cast<std::size_t>(i)].value; }

  static T Gelu(T x) {
    const T c = static_cast<T>(0.7978845608028654);
    return T(0.5) * x * (T(1) + std::tanh(c * (x + T(0.044715) * x * x * x)));
  }

  static T GeluGrad(T x) {
    const T c = static_cast<T>(0.7978845608028654);
    const T th = std::tanh(c * (x + T(0.044715) * x * x * x));
    return T(0.5) * (T(1) + th) +
           T(0.5) * x * (T(1) - th * th) * c * (T(1) + T(3) * T(0.044715) * x * x);
  }

  Mat Forward(std::span<const ItemId> items, std::vector<LayerCache>* caches) const {
    const auto t_len = static_cast<Eigen::Index>(items.size());
    const int d = shape_.embed_dim;
    const int dh = d / shape_.num_heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    Mat x(t_len, d);
    for (Eigen::Index t = 0; t < t_len; ++t) {
      x.row(t) = W(kItemEmb).row(items[static_cast<std::size_t>(t)]) + W(kPosEmb).row(t);
    }
    if (caches) caches->resize(static_cast<std::size_t>(shape_.num_layers));
    for (int l = 0; l < shape_.num_layers; ++l) {
      LayerCache local;
      LayerCache& c = caches ? (*caches)[static_cast<std::size_t>(l)] : local;
      c.x = x;
      c.q = x * W(LayerIndex(l, kWq));
      c.k = x * W(LayerIndex(l, kWk));
      c.v = x * W(LayerIndex(l, kWv));
      c.o.resize(t_len, d);
      c.attn.clear();
      for (int h = 0; h < shape_.num_heads; ++h) {
        Mat a = (c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose()) * scale;
        for (Eigen::Index i = 0; i < t_len; ++i) {
          const T mx = a.row(i).head(i + 1).maxCoeff();
          a.row(i).head(i + 1) = (a.row(i).head(i + 1).array() - mx).exp().matrix();
          a.row(i).head(i + 1) /= a.row(i).head(i + 1).sum();
          a.row(i).tail(t_len - i - 1).setZero();
        }
        c.o.middleCols(h * dh, dh) = a * c.v.middleCols(h * dh, dh);
        if (caches) c.attn.push_back(std::move(a));
      }
      c.y = x + c.o * W(LayerIndex(l, kWo));
      c.h1 = c.y * W(LayerIndex(l, kW1));
      c.h1.rowwise() += W(LayerIndex(l, kB1)).row(0);
      c.g = c.h1.unaryExpr([](T v) { return Gelu(v); });
      x = c.y + c.g * W(LayerIndex(l, kW2));
      x.rowwise() += W(LayerIndex(l, kB2)).row(0);
    }
    return x;
  }

  void Backward(std::span<const ItemId> items, const std::vector<LayerCache>& caches,
                const Mat& xn, const Mat& dz, std::vector<Mat>& grads) const {
    const auto t_len = static_cast<Eigen::Index>(items.size());
    const int d = shape_.embed_dim;
    const int dh = d / shape_.num_heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    auto g = [&](int i) -> Mat& { return grads[static_cast<std::size_t>(i)]; };

    g(OutWIndex()).noalias() += dz.transpose() * xn;
    g(OutBIndex()) += dz.colwise().sum();
    Mat dx = dz * W(OutWIndex());

    for (int l = shape_.num_layers - 1; l >= 0; --l) {
      const LayerCache& c = caches[static_cast<std::size_t>(l)];
      // X' = Y + F.
      g(LayerIndex(l, kW2)).noalias() += c.g.transpose() * dx;
      g(LayerIndex(l, kB2)) += dx.colwise().sum();
      Mat dh1 = (dx * W(LayerIndex(l, kW2)).transpose())
                    .cwiseProduct(c.h1.unaryExpr([](T v) { return GeluGrad(v); }));
      g(LayerIndex(l, kW1)).noalias() += c.y.transpose() * dh1;
      g(LayerIndex(l, kB1)) += dh1.colwise().sum();
      Mat dy = dx + dh1 * W(LayerIndex(l, kW1)).transpose();
      // Y = X + O Wo.
      g(LayerIndex(l, kWo)).noalias() += c.o.transpose() * dy;
      const Mat d_o = dy * W(LayerIndex(l, kWo)).transpose();
      Mat dq(t_len, d), dk(t_len, d), dv(t_len, d);
      for (int h = 0; h < shape_.num_heads; ++h) {
        const Mat& a = c.attn[static_cast<std::size_t>(h)];
        const auto doh = d_o.middleCols(h * dh, dh);
        const Mat da = doh * c.v.middleCols(h * dh, dh).transpose();
        dv.middleCols(h * dh, dh) = a.transpose() * doh;
        // Softmax backward; masked entries have a == 0 and drop out.
        const auto row_dot = (da.cwiseProduct(a)).rowwise().sum().eval();
        Mat ds = a.cwiseProduct(da.colwise() - row_dot) * scale;
        dq.middleCols(h * dh, dh) = ds * c.k.middleCols(h * dh, dh);
        dk.middleCols(h * dh, dh) = ds.transpose() * c.q.middleCols(h * dh, dh);
      }
      g(LayerIndex(l, kWq)).noalias() += c.x.transpose() * dq;
      g(LayerIndex(l, kWk)).noalias() += c.x.transpose() * dk;
      g(LayerIndex(l, kWv)).noalias() += c.x.transpose() * dv;
      dx = dy;
      dx.noalias() += dq * W(LayerIndex(l, kWq)).transpose();
      dx.noalias() += dk * W(LayerIndex(l, kWk)).transpose();
      dx.noalias() += dv * W(LayerIndex(l, kWv)).transpose();
    }
    for (Eigen::Index t = 0; t < t_len; ++t) {
      g(kItemEmb).row(items[static_cast<std::size_t>(t)]) += dx.row(t);
      g(kPosEmb).row(t) += dx.row(t);
    }
  }

  NetShape shape_;
  std::vector<Param> params_;
};

}  // namespace aowrec

#endif  // AOWREC_NEURAL_HPP_
