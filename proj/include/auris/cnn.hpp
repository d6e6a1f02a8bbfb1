// Copyright 2026 The Auris Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// A small from-scratch convolutional network over spectro-temporal feature
// patches: valid-padding conv -> ReLU -> 2x2 maxpool blocks, fully connected
// layers, softmax, reverse-mode gradients, and SGD-with-momentum training.
// The GMM stage gates its output probabilities per speaker.

#ifndef AURIS_CNN_HPP
#define AURIS_CNN_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "auris/errors.hpp"
#include "auris/gmm.hpp"
#include "auris/util.hpp"

namespace auris {

struct ConvBlockSpec {
  int kernel_h = 3;
  int kernel_w = 3;
  int channels = 8;
  int stride = 1;

  bool operator==(const ConvBlockSpec&) const = default;
};

// Network architecture. Input is a single-channel image of feature rows by
// context-frame columns; every conv block is followed by a 2x2 maxpool.
struct CnnSpec {
  int input_rows = 32;
  int input_cols = 32;
  std::vector<ConvBlockSpec> blocks{{3, 3, 8, 1}, {3, 3, 16, 1}, {3, 3, 32, 1}};
  std::vector<int> fc_hidden{64};
  int n_classes = 2;
  bool concat_tag_inputs = false;  // reserved; output gating is the supported path

  struct BlockShape {
    int in_ch, in_h, in_w;
    int conv_h, conv_w;
    int pool_h, pool_w;
  };

  std::vector<BlockShape> block_shapes() const {
    std::vector<BlockShape> shapes;
    int ch = 1, h = input_rows, w = input_cols;
    for (const auto& b : blocks) {
      BlockShape s{};
      s.in_ch = ch;
      s.in_h = h;
      s.in_w = w;
      if (b.kernel_h < 1 || b.kernel_w < 1 || b.channels < 1 || b.stride < 1) {
        throw ConfigError("conv block parameters must be positive");
      }
      s.conv_h = (h - b.kernel_h) / b.stride + 1;
      s.conv_w = (w - b.kernel_w) / b.stride + 1;
      if (h < b.kernel_h || w < b.kernel_w || s.conv_h < 1 || s.conv_w < 1) {
        throw ConfigError("conv block output shape is not positive");
      }
      s.pool_h = s.conv_h / 2;
      s.pool_w = s.conv_w / 2;
      if (s.pool_h < 1 || s.pool_w < 1) {
        throw ConfigError("maxpool output shape is not positive");
      }
      shapes.push_back(s);
      ch = b.channels;
      h = s.pool_h;
      w = s.pool_w;
    }
    return shapes;
  }

  int flat_dim() const {
    const auto shapes = block_shapes();
    if (shapes.empty()) return input_rows * input_cols;
    const auto& last = shapes.back();
    return blocks.back().channels * last.pool_h * last.pool_w;
  }

  void validate() const {
    if (input_rows < 1 || input_cols < 1) throw ConfigError("input shape must be positive");
    if (n_classes < 2) throw ConfigError("need at least two classes");
    for (int h : fc_hidden) {
      if (h < 1) throw ConfigError("fc sizes must be positive");
    }
    if (concat_tag_inputs) {
      throw ConfigError("tag-vector concatenation into the fc stack is not implemented; "
                        "use output gating");
    }
    block_shapes();
  }

  bool operator==(const CnnSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const ConvBlockSpec& b) {
  j = nlohmann::json{{"kernel_h", b.kernel_h},
                     {"kernel_w", b.kernel_w},
                     {"channels", b.channels},
                     {"stride", b.stride}};
}

inline void from_json(const nlohmann::json& j, ConvBlockSpec& b) {
  b.kernel_h = j.value("kernel_h", b.kernel_h);
  b.kernel_w = j.value("kernel_w", b.kernel_w);
  b.channels = j.value("channels", b.channels);
  b.stride = j.value("stride", b.stride);
}

inline void to_json(nlohmann::json& j, const CnnSpec& s) {
  j = nlohmann::json{{"input_rows", s.input_rows},
                     {"input_cols", s.input_cols},
                     {"blocks", s.blocks},
                     {"fc_hidden", s.fc_hidden},
                     {"n_classes", s.n_classes},
                     {"concat_tag_inputs", s.concat_tag_inputs}};
}

inline void from_json(const nlohmann::json& j, CnnSpec& s) {
  s.input_rows = j.value("input_rows", s.input_rows);
  s.input_cols = j.value("input_cols", s.input_cols);
  if (j.contains("blocks")) s.blocks = j["blocks"].get<std::vector<ConvBlockSpec>>();
  if (j.contains("fc_hidden")) s.fc_hidden = j["fc_hidden"].get<std::vector<int>>();
  s.n_classes = j.value("n_classes", s.n_classes);
  s.concat_tag_inputs = j.value("concat_tag_inputs", s.concat_tag_inputs);
}

// Weights grouped per layer: conv_w[b] laid out [oc][ic][kh][kw], fc_w[l]
// laid out [out][in]. The same structure doubles as gradient storage.
struct CnnParams {
  std::vector<std::vector<double>> conv_w, conv_b;
  std::vector<std::vector<double>> fc_w, fc_b;

  static CnnParams zeros_like(const CnnParams& other) {
    CnnParams p = other;
    for (auto* group : {&p.conv_w, &p.conv_b, &p.fc_w, &p.fc_b}) {
      for (auto& v : *group) std::fill(v.begin(), v.end(), 0.0);
    }
    return p;
  }

  template <typename Fn>
  void for_each_array(Fn&& fn) {
    for (auto* group : {&conv_w, &conv_b, &fc_w, &fc_b}) {
      for (auto& v : *group) fn(v);
    }
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto* group : {&conv_w, &conv_b, &fc_w, &fc_b}) {
      for (const auto& v : *group) n += v.size();
    }
    return n;
  }

  std::vector<double> flattened() const {
    std::vector<double> flat;
    flat.reserve(count());
    for (const auto* group : {&conv_w, &conv_b, &fc_w, &fc_b}) {
      for (const auto& v : *group) flat.insert(flat.end(), v.begin(), v.end());
    }
    return flat;
  }

  void load_flat(std::span<const double> flat) {
    std::size_t pos = 0;
    for (auto* group : {&conv_w, &conv_b, &fc_w, &fc_b}) {
      for (auto& v : *group) {
        if (pos + v.size() > flat.size()) throw ShapeError("weight blob too short");
        std::copy(flat.begin() + pos, flat.begin() + pos + v.size(), v.begin());
        pos += v.size();
      }
    }
    if (pos != flat.size()) throw ShapeError("weight blob too long");
  }
};

struct CnnMeta {
  std::uint64_t seed = 0;
  int epochs = 0;
  double final_loss = 0.0;
  std::vector<double> loss_trace;
  std::vector<double> input_mean;  // per feature row; empty = identity
  std::vector<double> input_std;
};

struct CnnModel {
  CnnSpec spec;
  CnnParams params;
  CnnMeta meta;
};

namespace cnn_detail {

inline std::vector<int> fc_dims(const CnnSpec& spec) {
  std::vector<int> dims;
  dims.push_back(spec.flat_dim());
  for (int h : spec.fc_hidden) dims.push_back(h);
  dims.push_back(spec.n_classes);
  return dims;
}

// Activations retained for the backward pass.
struct ForwardCache {
  std::vector<std::vector<double>> conv_pre;   // per block, post-bias pre-ReLU
  std::vector<std::vector<double>> pool_out;   // per block
  std::vector<std::vector<int>> pool_argmax;   // index into the block's conv activation
  std::vector<std::vector<double>> fc_pre;     // per fc layer
  std::vector<std::vector<double>> fc_act;     // per fc layer (post-ReLU / softmax input copy)
  std::vector<double> probs;
};

inline void softmax_inplace(std::vector<double>& v) {
  const double peak = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - peak);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

inline ForwardCache forward(const Matrix& input, const CnnModel& model) {
  const CnnSpec& spec = model.spec;
  if (static_cast<int>(input.rows) != spec.input_rows ||
      static_cast<int>(input.cols) != spec.input_cols) {
    throw ShapeError("input patch shape does not match network spec");
  }
  const auto shapes = spec.block_shapes();
  ForwardCache cache;
  std::vector<double> current = input.data;  // 1 channel, row-major h x w

  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& bs = spec.blocks[b];
    const auto& sh = shapes[b];
    const auto& w = model.params.conv_w[b];
    const auto& bias = model.params.conv_b[b];

    std::vector<double> conv(bs.channels * sh.conv_h * sh.conv_w, 0.0);
    for (int oc = 0; oc < bs.channels; ++oc) {
      for (int y = 0; y < sh.conv_h; ++y) {
        for (int x = 0; x < sh.conv_w; ++x) {
          double acc = bias[oc];
          for (int ic = 0; ic < sh.in_ch; ++ic) {
            const double* in_plane = current.data() + ic * sh.in_h * sh.in_w;
            const double* kernel =
                w.data() + ((oc * sh.in_ch + ic) * bs.kernel_h) * bs.kernel_w;
            for (int ky = 0; ky < bs.kernel_h; ++ky) {
              const double* in_row = in_plane + (y * bs.stride + ky) * sh.in_w + x * bs.stride;
              const double* k_row = kernel + ky * bs.kernel_w;
              for (int kx = 0; kx < bs.kernel_w; ++kx) acc += k_row[kx] * in_row[kx];
            }
          }
          conv[(oc * sh.conv_h + y) * sh.conv_w + x] = acc;
        }
      }
    }
    cache.conv_pre.push_back(conv);

    std::vector<double> pooled(bs.channels * sh.pool_h * sh.pool_w);
    std::vector<int> argmax(pooled.size());
    for (int c = 0; c < bs.channels; ++c) {
      for (int y = 0; y < sh.pool_h; ++y) {
        for (int x = 0; x < sh.pool_w; ++x) {
          int best_idx = (c * sh.conv_h + 2 * y) * sh.conv_w + 2 * x;
          double best = std::max(conv[best_idx], 0.0);  // ReLU fused into pooling input
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const int idx = (c * sh.conv_h + 2 * y + dy) * sh.conv_w + 2 * x + dx;
              const double v = std::max(conv[idx], 0.0);
              if (v > best) {
                best = v;
                best_idx = idx;
              }
            }
          }
          pooled[(c * sh.pool_h + y) * sh.pool_w + x] = best;
          argmax[(c * sh.pool_h + y) * sh.pool_w + x] = best_idx;
        }
      }
    }
    cache.pool_out.push_back(pooled);
    cache.pool_argmax.push_back(std::move(argmax));
    current = std::move(pooled);
  }

  const auto dims = fc_dims(spec);
  std::vector<double> act = current;
  if (static_cast<int>(act.size()) != dims[0]) throw ShapeError("flattened size mismatch");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto& w = model.params.fc_w[l];
    const auto& bias = model.params.fc_b[l];
    std::vector<double> pre(dims[l + 1]);
    for (int o = 0; o < dims[l + 1]; ++o) {
      double acc = bias[o];
      const double* row = w.data() + static_cast<std::size_t>(o) * dims[l];
      for (int i = 0; i < dims[l]; ++i) acc += row[i] * act[i];
      pre[o] = acc;
    }
    cache.fc_pre.push_back(pre);
    const bool last = (l + 2 == dims.size());
    if (!last) {
      for (double& v : pre) v = std::max(v, 0.0);
    }
    cache.fc_act.push_back(pre);
    act = std::move(pre);
  }
  cache.probs = act;
  softmax_inplace(cache.probs);
  return cache;
}

// Accumulates gradients for one example; `scale` is the weight of this
// example in the batch loss (1/batch for a mean).
inline void backward(const Matrix& input, int label, const CnnModel& model,
                     const ForwardCache& cache, double scale, CnnParams& grads) {
  const CnnSpec& spec = model.spec;
  const auto shapes = spec.block_shapes();
  const auto dims = fc_dims(spec);

  // Softmax + cross-entropy head.
  std::vector<double> delta = cache.probs;
  delta[label] -= 1.0;
  for (double& d : delta) d *= scale;

  // Fully connected stack, last to first.
  for (int l = static_cast<int>(dims.size()) - 2; l >= 0; --l) {
    const std::vector<double>& below =
        l == 0 ? cache.pool_out.empty() ? input.data : cache.pool_out.back()
               : cache.fc_act[l - 1];
    auto& gw = grads.fc_w[l];
    auto& gb = grads.fc_b[l];
    for (int o = 0; o < dims[l + 1]; ++o) {
      gb[o] += delta[o];
      double* grow = gw.data() + static_cast<std::size_t>(o) * dims[l];
      for (int i = 0; i < dims[l]; ++i) grow[i] += delta[o] * below[i];
    }
    std::vector<double> next(dims[l], 0.0);
    const auto& w = model.params.fc_w[l];
    for (int o = 0; o < dims[l + 1]; ++o) {
      const double* row = w.data() + static_cast<std::size_t>(o) * dims[l];
      for (int i = 0; i < dims[l]; ++i) next[i] += row[i] * delta[o];
    }
    if (l > 0) {
      for (int i = 0; i < dims[l]; ++i) {
        if (cache.fc_pre[l - 1][i] <= 0.0) next[i] = 0.0;
      }
    }
    delta = std::move(next);
  }

  // Conv blocks, last to first. `delta` currently matches the flattened
  // output of the final pool.
  for (int b = static_cast<int>(spec.blocks.size()) - 1; b >= 0; --b) {
    const auto& bs = spec.blocks[b];
    const auto& sh = shapes[b];

    // Pool backward: route into the conv activation through the stored
    // argmax; ReLU backward folds in via the pre-activation sign.
    std::vector<double> dconv(bs.channels * sh.conv_h * sh.conv_w, 0.0);
    const auto& argmax = cache.pool_argmax[b];
    for (std::size_t p = 0; p < argmax.size(); ++p) {
      const int idx = argmax[p];
      if (cache.conv_pre[b][idx] > 0.0) dconv[idx] += delta[p];
    }

    const std::vector<double>& below = b == 0 ? input.data : cache.pool_out[b - 1];
    auto& gw = grads.conv_w[b];
    auto& gb = grads.conv_b[b];
    std::vector<double> dbelow(sh.in_ch * sh.in_h * sh.in_w, 0.0);
    for (int oc = 0; oc < bs.channels; ++oc) {
      for (int y = 0; y < sh.conv_h; ++y) {
        for (int x = 0; x < sh.conv_w; ++x) {
          const double d = dconv[(oc * sh.conv_h + y) * sh.conv_w + x];
          if (d == 0.0) continue;
          gb[oc] += d;
          for (int ic = 0; ic < sh.in_ch; ++ic) {
            const double* in_plane = below.data() + ic * sh.in_h * sh.in_w;
            double* dn_plane = dbelow.data() + ic * sh.in_h * sh.in_w;
            double* gkernel = gw.data() + ((oc * sh.in_ch + ic) * bs.kernel_h) * bs.kernel_w;
            const double* kernel =
                model.params.conv_w[b].data() + ((oc * sh.in_ch + ic) * bs.kernel_h) * bs.kernel_w;
            for (int ky = 0; ky < bs.kernel_h; ++ky) {
              const int iy = y * bs.stride + ky;
              for (int kx = 0; kx < bs.kernel_w; ++kx) {
                const int ix = x * bs.stride + kx;
                gkernel[ky * bs.kernel_w + kx] += d * in_plane[iy * sh.in_w + ix];
                dn_plane[iy * sh.in_w + ix] += d * kernel[ky * bs.kernel_w + kx];
              }
            }
          }
        }
      }
    }
    delta = std::move(dbelow);
  }
}

}  // namespace cnn_detail

// LeCun-uniform initialization (limit sqrt(3/fan_in)), biases zero.
inline CnnModel init_cnn(const CnnSpec& spec, std::uint64_t seed) {
  spec.validate();
  CnnModel model;
  model.spec = spec;
  model.meta.seed = seed;
  Rng rng = Rng::seeded(seed);

  const auto shapes = spec.block_shapes();
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& bs = spec.blocks[b];
    const int fan_in = shapes[b].in_ch * bs.kernel_h * bs.kernel_w;
    const double limit = std::sqrt(3.0 / fan_in);
    std::vector<double> w(static_cast<std::size_t>(bs.channels) * fan_in);
    for (double& v : w) v = rng.uniform(-limit, limit);
    model.params.conv_w.push_back(std::move(w));
    model.params.conv_b.emplace_back(bs.channels, 0.0);
  }
  const auto dims = cnn_detail::fc_dims(spec);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double limit = std::sqrt(3.0 / dims[l]);
    std::vector<double> w(static_cast<std::size_t>(dims[l + 1]) * dims[l]);
    for (double& v : w) v = rng.uniform(-limit, limit);
    model.params.fc_w.push_back(std::move(w));
    model.params.fc_b.emplace_back(dims[l + 1], 0.0);
  }
  return model;
}

// Class probabilities for one patch.
inline std::vector<double> cnn_forward(const Matrix& input, const CnnModel& model) {
  return cnn_detail::forward(input, model).probs;
}

// Mean cross-entropy over the batch plus gradients for every parameter.
inline std::pair<double, CnnParams> cnn_loss_and_gradients(const std::vector<Matrix>& patches,
                                                           const std::vector<int>& labels,
                                                           const CnnModel& model) {
  if (patches.empty() || patches.size() != labels.size()) {
    throw DataError("batch must be non-empty with one label per patch");
  }
  for (int label : labels) {
    if (label < 0 || label >= model.spec.n_classes) {
      throw LabelError("label out of range: " + std::to_string(label));
    }
  }
  CnnParams grads = CnnParams::zeros_like(model.params);
  const double scale = 1.0 / static_cast<double>(patches.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto cache = cnn_detail::forward(patches[i], model);
    loss -= scale * std::log(std::max(cache.probs[labels[i]], 1e-300));
    cnn_detail::backward(patches[i], labels[i], model, cache, scale, grads);
  }
  return {loss, std::move(grads)};
}

struct CnnHyper {
  double learning_rate = 0.01;
  int epochs = 30;
  int batch_size = 16;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

inline void to_json(nlohmann::json& j, const CnnHyper& h) {
  j = nlohmann::json{{"learning_rate", h.learning_rate},
                     {"epochs", h.epochs},
                     {"batch_size", h.batch_size},
                     {"momentum", h.momentum},
                     {"seed", h.seed}};
}

inline void from_json(const nlohmann::json& j, CnnHyper& h) {
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.epochs = j.value("epochs", h.epochs);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.momentum = j.value("momentum", h.momentum);
  h.seed = j.value("seed", h.seed);
}

// Mini-batch SGD with momentum. Deterministic for a fixed seed: shuffles,
// batch boundaries and accumulation order are all fixed by the Rng stream.
inline CnnModel train_cnn(const std::vector<Matrix>& patches, const std::vector<int>& labels,
                          const CnnSpec& spec, const CnnHyper& hyper) {
  spec.validate();
  if (patches.size() != labels.size() || patches.empty()) {
    throw DataError("training set must be non-empty with one label per patch");
  }
  std::vector<bool> seen(spec.n_classes, false);
  for (int label : labels) {
    if (label < 0 || label >= spec.n_classes) {
      throw LabelError("label out of range: " + std::to_string(label));
    }
    seen[label] = true;
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
    throw DataError("every class needs at least one training example");
  }

  CnnModel model = init_cnn(spec, hyper.seed);
  if (hyper.epochs <= 0) return model;

  CnnParams velocity = CnnParams::zeros_like(model.params);
  Rng rng = Rng::seeded(hyper.seed).fork("shuffle");
  std::vector<std::size_t> order(patches.size());
  std::iota(order.begin(), order.end(), 0);

  const int batch = std::max(1, hyper.batch_size);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<Matrix> batch_patches;
      std::vector<int> batch_labels;
      batch_patches.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch_patches.push_back(patches[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      auto [loss, grads] = cnn_loss_and_gradients(batch_patches, batch_labels, model);
      if (!std::isfinite(loss)) {
        throw DivergenceError("training loss is not finite; reduce the learning rate");
      }
      epoch_loss += loss;
      ++batches;

      auto vel_it = [&](auto& group, auto& ggroup, auto& wgroup) {
        for (std::size_t a = 0; a < group.size(); ++a) {
          auto& v = group[a];
          auto& g = ggroup[a];
          auto& w = wgroup[a];
          for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = hyper.momentum * v[i] - hyper.learning_rate * g[i];
            w[i] += v[i];
          }
        }
      };
      vel_it(velocity.conv_w, grads.conv_w, model.params.conv_w);
      vel_it(velocity.conv_b, grads.conv_b, model.params.conv_b);
      vel_it(velocity.fc_w, grads.fc_w, model.params.fc_w);
      vel_it(velocity.fc_b, grads.fc_b, model.params.fc_b);
    }
    model.meta.loss_trace.push_back(epoch_loss / static_cast<double>(batches));
  }
  model.meta.epochs = hyper.epochs;
  model.meta.final_loss = model.meta.loss_trace.back();
  return model;
}

struct GatingConfig {
  enum class Mode { off, topk, threshold };
  Mode mode = Mode::topk;
  int k = 2;
  double theta = 5.0;  // nats below the best GMM speaker

  static int default_k(int n_speakers) {
    return std::max(2, (n_speakers + 3) / 4);
  }
};

inline std::string to_string(GatingConfig::Mode m) {
  switch (m) {
    case GatingConfig::Mode::off: return "off";
    case GatingConfig::Mode::topk: return "topk";
    case GatingConfig::Mode::threshold: return "threshold";
  }
  return "off";
}

inline void to_json(nlohmann::json& j, const GatingConfig& g) {
  j = nlohmann::json{{"mode", to_string(g.mode)}, {"k", g.k}, {"theta", g.theta}};
}

inline void from_json(const nlohmann::json& j, GatingConfig& g) {
  const std::string mode = j.value("mode", std::string("topk"));
  if (mode == "off") {
    g.mode = GatingConfig::Mode::off;
  } else if (mode == "topk") {
    g.mode = GatingConfig::Mode::topk;
  } else if (mode == "threshold") {
    g.mode = GatingConfig::Mode::threshold;
  } else {
    throw ConfigError("unknown gating mode: " + mode);
  }
  g.k = j.value("k", g.k);
  g.theta = j.value("theta", g.theta);
}

// Masks the CNN's class probabilities with a binary decision derived from
// the GMM scores, then renormalizes. The mask can never zero everything: if
// it would, the single GMM-best speaker survives.
inline std::vector<double> gate_with_tags(const std::vector<double>& probs,
                                          const LikelihoodVector& lv, const GatingConfig& config,
                                          const std::vector<std::string>& speaker_order) {
  if (probs.size() != speaker_order.size()) {
    throw ShapeError("probability vector does not match speaker order");
  }
  if (config.mode == GatingConfig::Mode::off) return probs;

  const auto scores = lv.by_speaker();
  std::vector<double> gmm_scores(speaker_order.size());
  for (std::size_t i = 0; i < speaker_order.size(); ++i) {
    auto it = scores.find(speaker_order[i]);
    if (it == scores.end()) {
      throw ShapeError("likelihood vector is missing speaker " + speaker_order[i]);
    }
    gmm_scores[i] = it->second;
  }

  std::vector<std::uint8_t> mask(probs.size(), 0);
  if (config.mode == GatingConfig::Mode::topk) {
    if (config.k < 1) throw ConfigError("topk gating requires k >= 1");
    std::vector<std::size_t> idx(probs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return gmm_scores[a] > gmm_scores[b]; });
    for (std::size_t i = 0; i < std::min<std::size_t>(config.k, idx.size()); ++i) {
      mask[idx[i]] = 1;
    }
  } else {
    const double best = *std::max_element(gmm_scores.begin(), gmm_scores.end());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (gmm_scores[i] >= best - config.theta) mask[i] = 1;
    }
  }

  std::vector<double> gated(probs.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    gated[i] = mask[i] ? probs[i] : 0.0;
    sum += gated[i];
  }
  if (sum <= 0.0) {
    const std::size_t best =
        std::distance(gmm_scores.begin(), std::max_element(gmm_scores.begin(), gmm_scores.end()));
    std::fill(gated.begin(), gated.end(), 0.0);
    gated[best] = 1.0;
    return gated;
  }
  for (double& g : gated) g /= sum;
  return gated;
}

// Context windows across the utterance with 50% overlap; utterances shorter
// than one window are padded by replicating the final frame.
struct PatchSet {
  std::vector<Matrix> patches;
  bool padded = false;
};

inline PatchSet tile_windows(const FeatureMatrix& features, int context) {
  if (context < 1) throw ParamError("context must be >= 1");
  const std::size_t frames = features.features.rows;
  const std::size_t dim = features.features.cols;
  if (frames == 0 || dim == 0) throw DataError("no feature frames to window");

  PatchSet set;
  auto make_patch = [&](std::size_t start) {
    Matrix patch(dim, context);
    for (int j = 0; j < context; ++j) {
      const std::size_t t = std::min(start + j, frames - 1);
      for (std::size_t d = 0; d < dim; ++d) patch.at(d, j) = features.features.at(t, d);
    }
    return patch;
  };

  if (frames < static_cast<std::size_t>(context)) {
    set.padded = true;
    set.patches.push_back(make_patch(0));
    return set;
  }
  const std::size_t stride = std::max<std::size_t>(1, context / 2);
  for (std::size_t start = 0; start + context <= frames; start += stride) {
    set.patches.push_back(make_patch(start));
  }
  return set;
}

// Standardizes patch rows in place using the model's stored input statistics.
inline void apply_input_norm(Matrix& patch, const CnnMeta& meta) {
  if (meta.input_mean.empty()) return;
  if (meta.input_mean.size() != patch.rows || meta.input_std.size() != patch.rows) {
    throw ShapeError("input normalization statistics do not match patch rows");
  }
  for (std::size_t r = 0; r < patch.rows; ++r) {
    const double mu = meta.input_mean[r];
    const double sd = meta.input_std[r];
    for (std::size_t c = 0; c < patch.cols; ++c) {
      patch.at(r, c) = (patch.at(r, c) - mu) / sd;
    }
  }
}

struct ClassifyResult {
  std::string speaker;
  double confidence = 0.0;
  std::vector<double> avg_probs;  // gated, averaged over windows
  bool padded = false;
};

// Gated window probabilities averaged across the utterance.
inline ClassifyResult classify(const FeatureMatrix& features, const CnnModel& model,
                               const LikelihoodVector& lv, const GatingConfig& gating,
                               const std::vector<std::string>& speaker_order) {
  if (static_cast<int>(speaker_order.size()) != model.spec.n_classes) {
    throw ShapeError("speaker order does not match number of classes");
  }
  PatchSet set = tile_windows(features, model.spec.input_cols);
  std::vector<double> avg(model.spec.n_classes, 0.0);
  for (auto& patch : set.patches) {
    apply_input_norm(patch, model.meta);
    const auto probs = cnn_forward(patch, model);
    const auto gated = gate_with_tags(probs, lv, gating, speaker_order);
    for (int i = 0; i < model.spec.n_classes; ++i) avg[i] += gated[i];
  }
  for (double& v : avg) v /= static_cast<double>(set.patches.size());

  ClassifyResult result;
  result.avg_probs = avg;
  result.padded = set.padded;
  const std::size_t best = std::distance(avg.begin(), std::max_element(avg.begin(), avg.end()));
  result.speaker = speaker_order[best];
  result.confidence = avg[best];
  return result;
}

}  // namespace auris

#endif  // AURIS_CNN_HPP
