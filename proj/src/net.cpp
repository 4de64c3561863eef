#include "vlbirl/net.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace vlbirl {

namespace {

double activate(Activation act, double x) {
  switch (act) {
    case Activation::Identity: return x;
    case Activation::LeakyRelu: return x >= 0.0 ? x : 0.01 * x;
    case Activation::Sigmoid: return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                              : std::exp(x) / (1.0 + std::exp(x));
    case Activation::Tanh: return std::tanh(x);
  }
  throw std::logic_error("unknown activation");
}

double activate_grad(Activation act, double pre) {
  switch (act) {
    case Activation::Identity: return 1.0;
    case Activation::LeakyRelu: return pre >= 0.0 ? 1.0 : 0.01;
    case Activation::Sigmoid: {
      const double s = activate(Activation::Sigmoid, pre);
      return s * (1.0 - s);
    }
    case Activation::Tanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
  }
  throw std::logic_error("unknown activation");
}

bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
  }
  throw std::logic_error("unknown activation");
}

Activation activation_by_name(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation: " + name);
}

std::size_t Network::n_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

bool Network::finite() const {
  for (const auto& l : layers)
    if (!all_finite(l.w) || !all_finite(l.b)) return false;
  return true;
}

bool Network::same_shape(const Network& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].in != other.layers[i].in || layers[i].out != other.layers[i].out) return false;
  return true;
}

Network make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                 Activation hidden_act, Activation out_act, Rng& rng) {
  if (input_dim < 1 || output_dim < 1) throw std::invalid_argument("make_mlp: bad dimensions");
  std::vector<int> dims;
  dims.push_back(input_dim);
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("make_mlp: hidden width must be >= 1");
    dims.push_back(h);
  }
  dims.push_back(output_dim);

  Network net;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Layer layer;
    layer.in = dims[i];
    layer.out = dims[i + 1];
    layer.act = (i + 2 == dims.size()) ? out_act : hidden_act;
    const double bound = std::sqrt(6.0 / (layer.in + layer.out));
    layer.w.resize(static_cast<std::size_t>(layer.in) * layer.out);
    for (double& w : layer.w) w = rng.uniform(-bound, bound);
    layer.b.assign(layer.out, 0.0);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Vec forward(const Network& net, const Vec& input) {
  if (net.layers.empty()) throw std::logic_error("forward: empty network");
  if (static_cast<int>(input.size()) != net.input_dim())
    throw std::invalid_argument("forward: input dimension mismatch");
  Vec x = input;
  for (const auto& l : net.layers) {
    Vec y(l.out);
    for (int o = 0; o < l.out; ++o) {
      double acc = l.b[o];
      const double* row = &l.w[static_cast<std::size_t>(o) * l.in];
      for (int i = 0; i < l.in; ++i) acc += row[i] * x[i];
      y[o] = activate(l.act, acc);
    }
    x = std::move(y);
  }
  return x;
}

ForwardTrace forward_traced(const Network& net, const Vec& input) {
  if (net.layers.empty()) throw std::logic_error("forward_traced: empty network");
  if (static_cast<int>(input.size()) != net.input_dim())
    throw std::invalid_argument("forward_traced: input dimension mismatch");
  ForwardTrace trace;
  Vec x = input;
  for (const auto& l : net.layers) {
    trace.inputs.push_back(x);
    Vec pre(l.out);
    Vec y(l.out);
    for (int o = 0; o < l.out; ++o) {
      double acc = l.b[o];
      const double* row = &l.w[static_cast<std::size_t>(o) * l.in];
      for (int i = 0; i < l.in; ++i) acc += row[i] * x[i];
      pre[o] = acc;
      y[o] = activate(l.act, acc);
    }
    trace.pre.push_back(std::move(pre));
    x = std::move(y);
  }
  trace.output = x;
  return trace;
}

GradientBundle GradientBundle::zeros_like(const Network& net) {
  GradientBundle g;
  for (const auto& l : net.layers) {
    g.dw.emplace_back(l.w.size(), 0.0);
    g.db.emplace_back(l.b.size(), 0.0);
  }
  return g;
}

void GradientBundle::add(const GradientBundle& other) {
  for (std::size_t l = 0; l < dw.size(); ++l) {
    for (std::size_t i = 0; i < dw[l].size(); ++i) dw[l][i] += other.dw[l][i];
    for (std::size_t i = 0; i < db[l].size(); ++i) db[l][i] += other.db[l][i];
  }
}

void GradientBundle::scale(double factor) {
  for (auto& v : dw)
    for (double& x : v) x *= factor;
  for (auto& v : db)
    for (double& x : v) x *= factor;
}

double GradientBundle::l2_norm() const {
  double acc = 0.0;
  for (const auto& v : dw)
    for (double x : v) acc += x * x;
  for (const auto& v : db)
    for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

bool GradientBundle::finite() const {
  for (const auto& v : dw)
    if (!all_finite(v)) return false;
  for (const auto& v : db)
    if (!all_finite(v)) return false;
  return true;
}

Vec backward(const Network& net, const ForwardTrace& trace, const Vec& upstream,
             GradientBundle& into) {
  if (trace.inputs.size() != net.layers.size())
    throw std::invalid_argument("backward: trace does not match network");
  if (upstream.size() != static_cast<std::size_t>(net.output_dim()))
    throw std::invalid_argument("backward: upstream dimension mismatch");
  Vec delta = upstream;
  for (int li = static_cast<int>(net.layers.size()) - 1; li >= 0; --li) {
    const Layer& l = net.layers[li];
    const Vec& x = trace.inputs[li];
    const Vec& pre = trace.pre[li];
    Vec dpre(l.out);
    for (int o = 0; o < l.out; ++o) dpre[o] = delta[o] * activate_grad(l.act, pre[o]);
    Vec dx(l.in, 0.0);
    for (int o = 0; o < l.out; ++o) {
      const std::size_t base = static_cast<std::size_t>(o) * l.in;
      into.db[li][o] += dpre[o];
      for (int i = 0; i < l.in; ++i) {
        into.dw[li][base + i] += dpre[o] * x[i];
        dx[i] += l.w[base + i] * dpre[o];
      }
    }
    delta = std::move(dx);
  }
  return delta;
}

AdamState AdamState::init(const Network& net, double lr) {
  AdamState s;
  s.lr = lr;
  for (const auto& l : net.layers) {
    s.m_w.emplace_back(l.w.size(), 0.0);
    s.v_w.emplace_back(l.w.size(), 0.0);
    s.m_b.emplace_back(l.b.size(), 0.0);
    s.v_b.emplace_back(l.b.size(), 0.0);
  }
  return s;
}

void adam_step(Network& net, const GradientBundle& grads, AdamState& state) {
  if (grads.dw.size() != net.layers.size())
    throw std::invalid_argument("adam_step: gradient shape mismatch");
  if (!grads.finite()) throw std::runtime_error("adam_step: non-finite gradient, step rejected");

  GradientBundle g = grads;
  const double norm = g.l2_norm();
  if (state.clip_norm > 0.0 && norm > state.clip_norm) g.scale(state.clip_norm / norm);

  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

  auto update = [&](Vec& param, const Vec& grad, Vec& m, Vec& v) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      param[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    update(net.layers[l].w, g.dw[l], state.m_w[l], state.v_w[l]);
    update(net.layers[l].b, g.db[l], state.m_b[l], state.v_b[l]);
  }
}

void save_network(const Network& net, std::ostream& out) {
  nlohmann::json header;
  header["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers)
    header["layers"].push_back(
        {{"in", l.in}, {"out", l.out}, {"act", activation_name(l.act)}});
  out << header.dump() << "\n";
  for (const auto& l : net.layers) {
    for (std::size_t i = 0; i < l.w.size(); ++i) out << (i ? " " : "") << fmt_double(l.w[i]);
    out << "\n";
    for (std::size_t i = 0; i < l.b.size(); ++i) out << (i ? " " : "") << fmt_double(l.b[i]);
    out << "\n";
  }
}

void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  save_network(net, out);
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Network load_network(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty network checkpoint");
  const nlohmann::json header = nlohmann::json::parse(line);
  Network net;
  for (const auto& jl : header.at("layers")) {
    Layer l;
    l.in = jl.at("in").get<int>();
    l.out = jl.at("out").get<int>();
    l.act = activation_by_name(jl.at("act").get<std::string>());
    auto read_row = [&](std::size_t expected) {
      if (!std::getline(in, line)) throw std::runtime_error("truncated network checkpoint");
      Vec v;
      v.reserve(expected);
      std::stringstream ss(line);
      double x;
      while (ss >> x) v.push_back(x);
      if (v.size() != expected) throw std::runtime_error("network checkpoint shape mismatch");
      return v;
    };
    l.w = read_row(static_cast<std::size_t>(l.in) * l.out);
    l.b = read_row(static_cast<std::size_t>(l.out));
    net.layers.push_back(std::move(l));
  }
  return net;
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  return load_network(in);
}

}  // namespace vlbirl
