#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vlbirl/rng.hpp"

namespace vlbirl {

using Vec = std::vector<double>;

enum class Activation { Identity, LeakyRelu, Sigmoid, Tanh };

std::string activation_name(Activation a);
Activation activation_by_name(const std::string& name);

struct Layer {
  int in = 0;
  int out = 0;
  Activation act = Activation::Identity;
  Vec w;  // row-major, out x in
  Vec b;  // out
};

/// Dense feedforward network. Plain value type: copying a Network snapshots
/// its parameters, which the trainer relies on for frozen-target checks.
struct Network {
  std::vector<Layer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out; }
  std::size_t n_params() const;
  bool finite() const;
  bool same_shape(const Network& other) const;
};

/// Hidden layers use hidden_act, the last layer out_act. Weights start
/// uniform in +-sqrt(6/(fan_in+fan_out)), biases at zero.
Network make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                 Activation hidden_act, Activation out_act, Rng& rng);

Vec forward(const Network& net, const Vec& input);

/// Cached activations from one forward pass, consumed by backward().
struct ForwardTrace {
  std::vector<Vec> inputs;  // inputs[l] = activation entering layer l
  std::vector<Vec> pre;     // pre-activation of layer l
  Vec output;
};

ForwardTrace forward_traced(const Network& net, const Vec& input);

struct GradientBundle {
  std::vector<Vec> dw;
  std::vector<Vec> db;

  static GradientBundle zeros_like(const Network& net);
  void add(const GradientBundle& other);
  void scale(double factor);
  double l2_norm() const;
  bool finite() const;
};

/// Backpropagate dL/doutput through a cached trace. Parameter gradients are
/// accumulated into `into` (callers batch by summing); returns dL/dinput.
Vec backward(const Network& net, const ForwardTrace& trace, const Vec& upstream,
             GradientBundle& into);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 10.0;  // global L2 clip on the incoming gradient
  long step_count = 0;
  std::vector<Vec> m_w, v_w, m_b, v_b;

  static AdamState init(const Network& net, double lr);
};

/// One Adam update with bias correction. The gradient is clipped to
/// clip_norm (global L2) first. Non-finite gradients reject the step.
void adam_step(Network& net, const GradientBundle& grads, AdamState& state);

/// Text checkpoint: JSON shape header, then one line of "%.17g" values per
/// parameter array. Round-trips doubles exactly.
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);
void save_network(const Network& net, std::ostream& out);
Network load_network(std::istream& in);

}  // namespace vlbirl
