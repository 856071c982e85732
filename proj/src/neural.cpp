#include "dvdn/neural.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dvdn {

std::vector<int> NetworkSpec::layer_dims() const {
  std::vector<int> dims;
  dims.reserve(hidden_dims.size() + 2);
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(output_dim);
  return dims;
}

Eigen::Index NetworkSpec::param_count() const {
  const std::vector<int> dims = layer_dims();
  Eigen::Index n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    n += static_cast<Eigen::Index>(dims[l] + 1) * dims[l + 1];
  return n;
}

void NetworkSpec::validate() const {
  if (input_dim < 1 || output_dim < 1)
    throw std::invalid_argument("NetworkSpec: dims must be >= 1");
  for (int h : hidden_dims)
    if (h < 1) throw std::invalid_argument("NetworkSpec: dims must be >= 1");
}

Eigen::VectorXd init_params(const NetworkSpec& spec, Rng& rng) {
  spec.validate();
  Eigen::VectorXd p = Eigen::VectorXd::Zero(spec.param_count());
  const std::vector<int> dims = spec.layer_dims();
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const Eigen::Index fan_in = dims[l], fan_out = dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index k = 0; k < fan_in * fan_out; ++k)
      p[off + k] = rng.uniform(-bound, bound);
    off += fan_in * fan_out + fan_out;  // biases stay zero
  }
  return p;
}

LayerView layer_view(const NetworkSpec& spec, const Eigen::VectorXd& params,
                     int layer) {
  const std::vector<int> dims = spec.layer_dims();
  Eigen::Index off = 0;
  for (int l = 0; l < layer; ++l)
    off += static_cast<Eigen::Index>(dims[l] + 1) * dims[l + 1];
  const Eigen::Index fan_in = dims[layer], fan_out = dims[layer + 1];
  return LayerView{
      Eigen::Map<const Eigen::MatrixXd>(params.data() + off, fan_out, fan_in),
      Eigen::Map<const Eigen::VectorXd>(params.data() + off + fan_in * fan_out,
                                        fan_out)};
}

ForwardTrace forward_trace(const NetworkSpec& spec,
                           const Eigen::VectorXd& params,
                           const Eigen::MatrixXd& obs) {
  if (obs.rows() != spec.input_dim)
    throw std::invalid_argument("forward: observation dim mismatch");
  if (params.size() != spec.param_count())
    throw std::invalid_argument("forward: parameter length mismatch");
  const int n_layers = static_cast<int>(spec.hidden_dims.size()) + 1;
  ForwardTrace trace;
  trace.layer_inputs.reserve(n_layers);
  trace.layer_inputs.push_back(obs);
  for (int l = 0; l < n_layers; ++l) {
    const LayerView lv = layer_view(spec, params, l);
    Eigen::MatrixXd z =
        (lv.weight * trace.layer_inputs.back()).colwise() + lv.bias;
    if (l + 1 < n_layers) {
      z = z.cwiseMax(0.0);
      trace.layer_inputs.push_back(std::move(z));
    } else {
      trace.output = std::move(z);
    }
  }
  return trace;
}

Eigen::MatrixXd forward_batch(const NetworkSpec& spec,
                              const Eigen::VectorXd& params,
                              const Eigen::MatrixXd& obs) {
  return forward_trace(spec, params, obs).output;
}

Eigen::VectorXd forward(const NetworkSpec& spec, const Eigen::VectorXd& params,
                        const Eigen::VectorXd& obs) {
  return forward_batch(spec, params, obs).col(0);
}

Eigen::VectorXd backward_batch(const NetworkSpec& spec,
                               const Eigen::VectorXd& params,
                               const ForwardTrace& trace,
                               const Eigen::MatrixXd& output_error) {
  if (output_error.rows() != spec.output_dim ||
      output_error.cols() != trace.output.cols())
    throw std::invalid_argument("backward: output_error shape mismatch");
  const int n_layers = static_cast<int>(spec.hidden_dims.size()) + 1;
  const std::vector<int> dims = spec.layer_dims();

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.size());
  std::vector<Eigen::Index> offsets(n_layers);
  Eigen::Index off = 0;
  for (int l = 0; l < n_layers; ++l) {
    offsets[l] = off;
    off += static_cast<Eigen::Index>(dims[l] + 1) * dims[l + 1];
  }

  Eigen::MatrixXd delta = output_error;
  for (int l = n_layers - 1; l >= 0; --l) {
    const LayerView lv = layer_view(spec, params, l);
    const Eigen::MatrixXd& input = trace.layer_inputs[l];
    const Eigen::Index fan_in = dims[l], fan_out = dims[l + 1];
    Eigen::Map<Eigen::MatrixXd>(grad.data() + offsets[l], fan_out, fan_in) =
        delta * input.transpose();
    Eigen::Map<Eigen::VectorXd>(grad.data() + offsets[l] + fan_in * fan_out,
                                fan_out) = delta.rowwise().sum();
    if (l > 0) {
      // ReLU passes gradient only where the stored activation is positive.
      delta = (lv.weight.transpose() * delta).array() *
              (input.array() > 0.0).cast<double>();
    }
  }
  return grad;
}

Eigen::VectorXd backward(const NetworkSpec& spec,
                         const Eigen::VectorXd& params,
                         const Eigen::VectorXd& obs,
                         const Eigen::VectorXd& output_error) {
  const ForwardTrace trace = forward_trace(spec, params, obs);
  return backward_batch(spec, params, trace, output_error);
}

AdamState AdamState::zeros(Eigen::Index n, double learning_rate) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(n);
  s.v = Eigen::VectorXd::Zero(n);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::VectorXd& grad) {
  if (grad.size() != params.size() || state.m.size() != params.size())
    throw std::invalid_argument("adam_step: length mismatch");
  if (!grad.allFinite())
    throw std::invalid_argument("adam_step: non-finite gradient");
  ++state.step_count;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v.array() =
      state.beta2 * state.v.array() + (1.0 - state.beta2) * grad.array().square();
  const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
  params.array() -= state.learning_rate * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + state.epsilon);
}

void clip_gradient_norm(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm) grad *= max_norm / norm;
}

namespace {
constexpr char kMagic[8] = {'Q', 'N', 'E', 'T', 'P', 'V', '0', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
}  // namespace

void save_params(const std::string& path, const NetworkSpec& spec,
                 const Eigen::VectorXd& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_params: cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  write_u32(os, static_cast<std::uint32_t>(spec.input_dim));
  write_u32(os, static_cast<std::uint32_t>(spec.hidden_dims.size()));
  for (int h : spec.hidden_dims) write_u32(os, static_cast<std::uint32_t>(h));
  write_u32(os, static_cast<std::uint32_t>(spec.output_dim));
  write_u32(os, static_cast<std::uint32_t>(params.size()));
  static_assert(sizeof(double) == 8);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &params[i], 8);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k)
      b[k] = static_cast<unsigned char>(bits >> (8 * k));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  if (!os) throw std::runtime_error("save_params: write failed for " + path);
}

SavedParams load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_params: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("load_params: bad header in " + path);
  SavedParams out;
  out.spec.input_dim = static_cast<int>(read_u32(is));
  const std::uint32_t n_hidden = read_u32(is);
  out.spec.hidden_dims.resize(n_hidden);
  for (std::uint32_t i = 0; i < n_hidden; ++i)
    out.spec.hidden_dims[i] = static_cast<int>(read_u32(is));
  out.spec.output_dim = static_cast<int>(read_u32(is));
  const std::uint32_t len = read_u32(is);
  if (static_cast<Eigen::Index>(len) != out.spec.param_count())
    throw std::runtime_error("load_params: length does not match dims");
  out.params.resize(len);
  for (std::uint32_t i = 0; i < len; ++i) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k)
      bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    std::memcpy(&out.params[i], &bits, 8);
  }
  if (!is) throw std::runtime_error("load_params: truncated file " + path);
  return out;
}

}  // namespace dvdn
