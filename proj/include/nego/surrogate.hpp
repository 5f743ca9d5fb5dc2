// Copyright 2026 The nego Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NEGO_SURROGATE_HPP
#define NEGO_SURROGATE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "nego/rng.hpp"
#include "nego/tariff.hpp"

namespace nego {

class BadSpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UntrainedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Feed-forward regression net: layer widths plus the positions of rectifier
// activations. Output stays linear, as usual for regression.
struct NetworkSpec {
  std::vector<int> widths;     // first and last must be 3
  std::vector<int> relu_after; // 1-based linear layer indices

  int layer_count() const { return static_cast<int>(widths.size()) - 1; }

  bool has_relu_after(int layer) const {
    return std::find(relu_after.begin(), relu_after.end(), layer) !=
           relu_after.end();
  }

  void validate() const {
    if (widths.size() < 2) throw BadSpecError("spec needs at least one layer");
    if (widths.front() != 3 || widths.back() != 3) {
      throw BadSpecError("spec must map 3 features to 3 outputs");
    }
    for (int w : widths) {
      if (w < 1) throw BadSpecError("layer widths must be >= 1");
    }
    for (int idx : relu_after) {
      if (idx < 1 || idx > layer_count()) {
        throw BadSpecError("activation index " + std::to_string(idx) +
                           " outside the layer range");
      }
      if (idx == layer_count()) {
        throw BadSpecError("no activation after the output layer");
      }
    }
  }
};

// Shipped presets. Models 1-3 are linear-only with growing depth; model 4
// carries one rectifier after its third layer, which is what lets it track
// the tier steps in the negotiation map.
inline NetworkSpec preset_spec(const std::string& name) {
  if (name == "model1") return {{3, 128, 64, 27, 3}, {}};
  if (name == "model2") return {{3, 128, 64, 64, 27, 27, 3}, {}};
  if (name == "model3") return {{3, 128, 64, 64, 27, 27, 27, 3}, {}};
  if (name == "model4") return {{3, 128, 64, 27, 27, 16, 3}, {3}};
  throw BadSpecError("unknown model preset '" + name + "'");
}

// Per-dimension min-max scaling fitted on training data.
struct Normalizer {
  std::array<double, 3> min{0.0, 0.0, 0.0};
  std::array<double, 3> max{1.0, 1.0, 1.0};

  static Normalizer fit(const std::vector<std::array<double, 3>>& rows) {
    if (rows.empty()) throw BadSpecError("cannot fit normalizer on no data");
    Normalizer n;
    for (int d = 0; d < 3; ++d) {
      n.min[d] = rows[0][d];
      n.max[d] = rows[0][d];
    }
    for (const auto& r : rows) {
      for (int d = 0; d < 3; ++d) {
        n.min[d] = std::min(n.min[d], r[d]);
        n.max[d] = std::max(n.max[d], r[d]);
      }
    }
    for (int d = 0; d < 3; ++d) {
      if (!(n.max[d] > n.min[d])) {
        throw BadSpecError("normalizer dimension " + std::to_string(d) +
                           " has no spread");
      }
    }
    return n;
  }

  std::array<double, 3> apply(const std::array<double, 3>& x) const {
    std::array<double, 3> out;
    for (int d = 0; d < 3; ++d) out[d] = (x[d] - min[d]) / (max[d] - min[d]);
    return out;
  }

  std::array<double, 3> invert(const std::array<double, 3>& x) const {
    std::array<double, 3> out;
    for (int d = 0; d < 3; ++d) out[d] = x[d] * (max[d] - min[d]) + min[d];
    return out;
  }
};

struct TrainingPair {
  std::array<double, 3> x;
  std::array<double, 3> y;
};

inline TrainingPair make_training_pair(const Bundle& in, const Bundle& out) {
  return TrainingPair{
      {static_cast<double>(in[Resource::kVcpu]),
       static_cast<double>(in[Resource::kRam]),
       static_cast<double>(in[Resource::kStorage])},
      {static_cast<double>(out[Resource::kVcpu]),
       static_cast<double>(out[Resource::kRam]),
       static_cast<double>(out[Resource::kStorage])}};
}

enum class Optimizer { kGradientDescent, kMomentum };

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 0.01;
  Optimizer optimizer = Optimizer::kMomentum;
  double momentum = 0.9;
  std::uint64_t seed = 7;

  void validate() const {
    if (epochs < 1) throw BadSpecError("epochs must be >= 1");
    if (batch_size < 1) throw BadSpecError("batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw BadSpecError("learning rate must be > 0");
  }
};

struct SurrogateModel {
  NetworkSpec spec;
  // weights[l] is widths[l] x widths[l+1], row-major; biases[l] has
  // widths[l+1] entries.
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  Normalizer input_norm;
  Normalizer output_norm;
  bool trained = false;
  std::vector<double> loss_history;

  // Forward pass in normalized space.
  std::array<double, 3> forward(const std::array<double, 3>& x) const {
    std::vector<double> a(x.begin(), x.end());
    std::vector<double> next;
    for (int l = 0; l < spec.layer_count(); ++l) {
      const int in_dim = spec.widths[l];
      const int out_dim = spec.widths[l + 1];
      next.assign(biases[l].begin(), biases[l].end());
      const double* w = weights[l].data();
      for (int k = 0; k < in_dim; ++k) {
        const double ak = a[k];
        const double* row = w + static_cast<std::size_t>(k) * out_dim;
        for (int j = 0; j < out_dim; ++j) next[j] += ak * row[j];
      }
      if (spec.has_relu_after(l + 1)) {
        for (double& v : next) v = v > 0.0 ? v : 0.0;
      }
      a.swap(next);
    }
    return {a[0], a[1], a[2]};
  }
};

inline SurrogateModel build(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  SurrogateModel m;
  m.spec = spec;
  Rng rng(seed);
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int fan_in = spec.widths[l];
    const int fan_out = spec.widths[l + 1];
    const double scale = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
    for (double& v : w) v = (rng.next_double() * 2.0 - 1.0) * scale;
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(fan_out, 0.0);
  }
  return m;
}

inline std::array<double, 3> predict(const SurrogateModel& m,
                                     const Bundle& input) {
  if (!m.trained) throw UntrainedError("model has not been trained");
  const std::array<double, 3> x = {
      static_cast<double>(input[Resource::kVcpu]),
      static_cast<double>(input[Resource::kRam]),
      static_cast<double>(input[Resource::kStorage])};
  return m.output_norm.invert(m.forward(m.input_norm.apply(x)));
}

// Rounding happens only here, at the presentation edge.
inline Bundle predict_rounded(const SurrogateModel& m, const Bundle& input) {
  const auto y = predict(m, input);
  return make_bundle(static_cast<int>(std::lround(y[0])),
                     static_cast<int>(std::lround(y[1])),
                     static_cast<int>(std::lround(y[2])));
}

namespace detail {

struct BackpropScratch {
  std::vector<std::vector<double>> activations;  // per layer output
  std::vector<std::vector<double>> deltas;
  std::vector<std::vector<double>> grad_w;
  std::vector<std::vector<double>> grad_b;
};

inline void init_scratch(const SurrogateModel& m, BackpropScratch& s) {
  const int layers = m.spec.layer_count();
  s.activations.assign(layers + 1, {});
  s.deltas.assign(layers + 1, {});
  for (int l = 0; l <= layers; ++l) {
    s.activations[l].assign(m.spec.widths[l], 0.0);
    s.deltas[l].assign(m.spec.widths[l], 0.0);
  }
  s.grad_w.clear();
  s.grad_b.clear();
  for (int l = 0; l < layers; ++l) {
    s.grad_w.emplace_back(m.weights[l].size(), 0.0);
    s.grad_b.emplace_back(m.biases[l].size(), 0.0);
  }
}

// Forward + backward for one sample; accumulates gradients of the summed
// squared error (caller scales) and returns the sample's squared error.
inline double accumulate_gradients(const SurrogateModel& m,
                                   const std::array<double, 3>& x,
                                   const std::array<double, 3>& y,
                                   BackpropScratch& s) {
  const int layers = m.spec.layer_count();
  std::copy(x.begin(), x.end(), s.activations[0].begin());
  for (int l = 0; l < layers; ++l) {
    const int in_dim = m.spec.widths[l];
    const int out_dim = m.spec.widths[l + 1];
    std::vector<double>& out = s.activations[l + 1];
    std::copy(m.biases[l].begin(), m.biases[l].end(), out.begin());
    const double* w = m.weights[l].data();
    const std::vector<double>& in = s.activations[l];
    for (int k = 0; k < in_dim; ++k) {
      const double ak = in[k];
      const double* row = w + static_cast<std::size_t>(k) * out_dim;
      for (int j = 0; j < out_dim; ++j) out[j] += ak * row[j];
    }
    if (m.spec.has_relu_after(l + 1)) {
      for (double& v : out) v = v > 0.0 ? v : 0.0;
    }
  }

  double sq_err = 0.0;
  std::vector<double>& out_delta = s.deltas[layers];
  for (int d = 0; d < 3; ++d) {
    const double diff = s.activations[layers][d] - y[d];
    sq_err += diff * diff;
    out_delta[d] = 2.0 * diff;
  }

  for (int l = layers - 1; l >= 0; --l) {
    const int in_dim = m.spec.widths[l];
    const int out_dim = m.spec.widths[l + 1];
    const std::vector<double>& delta_out = s.deltas[l + 1];
    const std::vector<double>& a_in = s.activations[l];
    double* gw = s.grad_w[l].data();
    for (int k = 0; k < in_dim; ++k) {
      const double ak = a_in[k];
      double* row = gw + static_cast<std::size_t>(k) * out_dim;
      for (int j = 0; j < out_dim; ++j) row[j] += ak * delta_out[j];
    }
    double* gb = s.grad_b[l].data();
    for (int j = 0; j < out_dim; ++j) gb[j] += delta_out[j];
    if (l > 0) {
      std::vector<double>& delta_in = s.deltas[l];
      const double* w = m.weights[l].data();
      for (int k = 0; k < in_dim; ++k) {
        const double* row = w + static_cast<std::size_t>(k) * out_dim;
        double acc = 0.0;
        for (int j = 0; j < out_dim; ++j) acc += row[j] * delta_out[j];
        delta_in[k] = acc;
      }
      if (m.spec.has_relu_after(l)) {
        for (int k = 0; k < in_dim; ++k) {
          if (s.activations[l][k] <= 0.0) delta_in[k] = 0.0;
        }
      }
    }
  }
  return sq_err;
}

}  // namespace detail

// Mini-batch gradient descent on the mean squared error in normalized space.
// Normalizers are fitted on the training pairs and frozen into the model.
inline void train(SurrogateModel& model, const std::vector<TrainingPair>& pairs,
                  const TrainConfig& config) {
  config.validate();
  if (pairs.empty()) throw BadSpecError("training needs at least one pair");
  for (const TrainingPair& p : pairs) {
    for (int d = 0; d < 3; ++d) {
      if (!std::isfinite(p.x[d]) || !std::isfinite(p.y[d])) {
        throw BadSpecError("training data contains non-finite values");
      }
    }
  }

  std::vector<std::array<double, 3>> xs, ys;
  xs.reserve(pairs.size());
  ys.reserve(pairs.size());
  for (const TrainingPair& p : pairs) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  model.input_norm = Normalizer::fit(xs);
  model.output_norm = Normalizer::fit(ys);
  for (auto& x : xs) x = model.input_norm.apply(x);
  for (auto& y : ys) y = model.output_norm.apply(y);

  const int layers = model.spec.layer_count();
  std::vector<std::vector<double>> vel_w, vel_b;
  for (int l = 0; l < layers; ++l) {
    vel_w.emplace_back(model.weights[l].size(), 0.0);
    vel_b.emplace_back(model.biases[l].size(), 0.0);
  }

  detail::BackpropScratch scratch;
  detail::init_scratch(model, scratch);

  Rng rng(config.seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  model.loss_history.clear();
  model.loss_history.reserve(config.epochs);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_sq_err = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + config.batch_size);
      const double inv = 1.0 / (3.0 * static_cast<double>(end - start));
      for (int l = 0; l < layers; ++l) {
        std::fill(scratch.grad_w[l].begin(), scratch.grad_w[l].end(), 0.0);
        std::fill(scratch.grad_b[l].begin(), scratch.grad_b[l].end(), 0.0);
      }
      for (std::size_t i = start; i < end; ++i) {
        epoch_sq_err +=
            detail::accumulate_gradients(model, xs[order[i]], ys[order[i]],
                                         scratch);
      }
      for (int l = 0; l < layers; ++l) {
        double* w = model.weights[l].data();
        double* gw = scratch.grad_w[l].data();
        double* vw = vel_w[l].data();
        const std::size_t nw = model.weights[l].size();
        if (config.optimizer == Optimizer::kMomentum) {
          for (std::size_t i = 0; i < nw; ++i) {
            vw[i] = config.momentum * vw[i] -
                    config.learning_rate * gw[i] * inv;
            w[i] += vw[i];
          }
        } else {
          for (std::size_t i = 0; i < nw; ++i) {
            w[i] -= config.learning_rate * gw[i] * inv;
          }
        }
        double* b = model.biases[l].data();
        double* gb = scratch.grad_b[l].data();
        double* vb = vel_b[l].data();
        const std::size_t nb = model.biases[l].size();
        if (config.optimizer == Optimizer::kMomentum) {
          for (std::size_t i = 0; i < nb; ++i) {
            vb[i] = config.momentum * vb[i] -
                    config.learning_rate * gb[i] * inv;
            b[i] += vb[i];
          }
        } else {
          for (std::size_t i = 0; i < nb; ++i) {
            b[i] -= config.learning_rate * gb[i] * inv;
          }
        }
      }
    }
    const double epoch_loss = epoch_sq_err / (3.0 * pairs.size());
    if (!std::isfinite(epoch_loss)) {
      throw DivergenceError("loss diverged at epoch " +
                            std::to_string(epoch + 1));
    }
    model.loss_history.push_back(epoch_loss);
  }
  model.trained = true;
}

struct EvalResult {
  std::array<double, 3> per_dim{0.0, 0.0, 0.0};
  double whole = 0.0;
};

// MSE per output dimension plus their mean, in normalized space.
inline EvalResult evaluate(const SurrogateModel& model,
                           const std::vector<TrainingPair>& pairs) {
  if (!model.trained) throw UntrainedError("model has not been trained");
  if (pairs.empty()) throw BadSpecError("evaluation needs at least one pair");
  EvalResult res;
  for (const TrainingPair& p : pairs) {
    const auto pred = model.forward(model.input_norm.apply(p.x));
    const auto label = model.output_norm.apply(p.y);
    for (int d = 0; d < 3; ++d) {
      const double diff = pred[d] - label[d];
      res.per_dim[d] += diff * diff;
    }
  }
  for (int d = 0; d < 3; ++d) {
    res.per_dim[d] /= static_cast<double>(pairs.size());
    res.whole += res.per_dim[d];
  }
  res.whole /= 3.0;
  return res;
}

// Central-difference check of the backpropagated gradients on one sample,
// over a random subset of weights. The sample is taken as already living in
// normalized space.
inline double gradient_check(const SurrogateModel& model,
                             const TrainingPair& sample, double epsilon,
                             int weight_count = 50, std::uint64_t seed = 17) {
  if (epsilon < 1e-7 || epsilon > 1e-3) {
    throw std::invalid_argument("epsilon must lie in [1e-7, 1e-3]");
  }
  SurrogateModel work = model;
  detail::BackpropScratch scratch;
  detail::init_scratch(work, scratch);
  detail::accumulate_gradients(work, sample.x, sample.y, scratch);

  auto loss = [&](const SurrogateModel& m) {
    const auto out = m.forward(sample.x);
    double sq = 0.0;
    for (int d = 0; d < 3; ++d) {
      const double diff = out[d] - sample.y[d];
      sq += diff * diff;
    }
    return sq;
  };

  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < weight_count; ++i) {
    const int l = static_cast<int>(rng.next_below(work.spec.layer_count()));
    const std::size_t k = rng.next_below(work.weights[l].size());
    const double saved = work.weights[l][k];
    const double h = epsilon * std::max(1.0, std::abs(saved));
    work.weights[l][k] = saved + h;
    const double up = loss(work);
    work.weights[l][k] = saved - h;
    const double down = loss(work);
    work.weights[l][k] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = scratch.grad_w[l][k];
    const double rel = std::abs(analytic - numeric) /
                       std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json model_to_json(const SurrogateModel& m) {
  return nlohmann::json{
      {"version", kModelFormatVersion},
      {"widths", m.spec.widths},
      {"relu_after", m.spec.relu_after},
      {"weights", m.weights},
      {"biases", m.biases},
      {"input_min", m.input_norm.min},
      {"input_max", m.input_norm.max},
      {"output_min", m.output_norm.min},
      {"output_max", m.output_norm.max},
      {"trained", m.trained},
      {"loss_history", m.loss_history},
  };
}

inline SurrogateModel model_from_json(const nlohmann::json& j) {
  if (!j.contains("version")) {
    throw ModelIoError("model file has no version field");
  }
  if (j["version"].get<int>() != kModelFormatVersion) {
    throw ModelIoError("model file version " +
                       std::to_string(j["version"].get<int>()) +
                       " does not match expected " +
                       std::to_string(kModelFormatVersion));
  }
  SurrogateModel m;
  try {
    m.spec.widths = j.at("widths").get<std::vector<int>>();
    m.spec.relu_after = j.at("relu_after").get<std::vector<int>>();
    m.weights = j.at("weights").get<std::vector<std::vector<double>>>();
    m.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    m.input_norm.min = j.at("input_min").get<std::array<double, 3>>();
    m.input_norm.max = j.at("input_max").get<std::array<double, 3>>();
    m.output_norm.min = j.at("output_min").get<std::array<double, 3>>();
    m.output_norm.max = j.at("output_max").get<std::array<double, 3>>();
    m.trained = j.at("trained").get<bool>();
    m.loss_history = j.at("loss_history").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ModelIoError(std::string("model file is corrupt: ") + e.what());
  }
  m.spec.validate();
  for (int l = 0; l < m.spec.layer_count(); ++l) {
    const std::size_t expect_w =
        static_cast<std::size_t>(m.spec.widths[l]) * m.spec.widths[l + 1];
    if (l >= static_cast<int>(m.weights.size()) ||
        m.weights[l].size() != expect_w ||
        m.biases[l].size() != static_cast<std::size_t>(m.spec.widths[l + 1])) {
      throw ModelIoError("model file weight shapes do not match its spec");
    }
  }
  return m;
}

inline void save_model(const SurrogateModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelIoError("cannot open " + path + " for writing");
  out << model_to_json(m).dump();
  if (!out) throw ModelIoError("write failed for " + path);
}

inline SurrogateModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelIoError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ModelIoError(path + " is corrupt: " + e.what());
  }
  return model_from_json(j);
}

inline std::string pairs_to_csv(const std::vector<TrainingPair>& pairs) {
  std::string csv =
      "vcpu,ram_gb,storage_gb,final_vcpu,final_ram_gb,final_storage_gb\n";
  char line[256];
  for (const TrainingPair& p : pairs) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  p.x[0], p.x[1], p.x[2], p.y[0], p.y[1], p.y[2]);
    csv += line;
  }
  return csv;
}

inline std::vector<TrainingPair> pairs_from_csv_text(const std::string& text) {
  std::vector<TrainingPair> pairs;
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || row == 1) continue;  // header
    TrainingPair p;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &p.x[0], &p.x[1],
                    &p.x[2], &p.y[0], &p.y[1], &p.y[2]) != 6) {
      throw ModelIoError("pair file row " + std::to_string(row) +
                         " is not six numbers");
    }
    pairs.push_back(p);
  }
  return pairs;
}

}  // namespace nego

#endif  // NEGO_SURROGATE_HPP
