#pragma once

// Feed-forward Q-network core: flat parameter vectors, exact batched
// backpropagation, and the Adam optimizer. No external ML dependency.
//
// Parameter layout, fixed and documented: layers in order, each layer
// contributing its weight matrix (fan_out x fan_in, column-major) followed
// by its bias vector (fan_out). Hidden activations are rectified linear,
// the output layer is affine.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dvdn/rng.hpp"

namespace dvdn {

struct NetworkSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims = {64};
  int output_dim = 1;

  bool operator==(const NetworkSpec&) const = default;

  // Layer sizes including input and output: {in, h..., out}.
  std::vector<int> layer_dims() const;
  // Total flat parameter count: sum over layers of (fan_in + 1) * fan_out.
  Eigen::Index param_count() const;
  void validate() const;  // throws std::invalid_argument on dims < 1
};

// Weights uniform on (-1/sqrt(fan_in), 1/sqrt(fan_in)) drawn in storage
// order, biases zero. Same seed, same vector.
Eigen::VectorXd init_params(const NetworkSpec& spec, Rng& rng);

// Mutable/const views into one layer's slice of a flat parameter vector.
struct LayerView {
  Eigen::Map<const Eigen::MatrixXd> weight;
  Eigen::Map<const Eigen::VectorXd> bias;
};
LayerView layer_view(const NetworkSpec& spec, const Eigen::VectorXd& params,
                     int layer);

// Activations kept from a forward pass, consumed by backward_batch.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> layer_inputs;  // [0] = obs batch
  Eigen::MatrixXd output;
};

// Batched forward pass; obs columns are batch items (input_dim x B).
Eigen::MatrixXd forward_batch(const NetworkSpec& spec,
                              const Eigen::VectorXd& params,
                              const Eigen::MatrixXd& obs);
ForwardTrace forward_trace(const NetworkSpec& spec,
                           const Eigen::VectorXd& params,
                           const Eigen::MatrixXd& obs);

// Single-observation Q-values.
Eigen::VectorXd forward(const NetworkSpec& spec, const Eigen::VectorXd& params,
                        const Eigen::VectorXd& obs);

// Exact gradient, accumulated over the batch, of
//   sum_b output(:, b) . output_error(:, b)
// with respect to every parameter. output_error is the dLoss/dOutput seed.
Eigen::VectorXd backward_batch(const NetworkSpec& spec,
                               const Eigen::VectorXd& params,
                               const ForwardTrace& trace,
                               const Eigen::MatrixXd& output_error);

// Single-observation convenience wrapper.
Eigen::VectorXd backward(const NetworkSpec& spec,
                         const Eigen::VectorXd& params,
                         const Eigen::VectorXd& obs,
                         const Eigen::VectorXd& output_error);

struct AdamState {
  Eigen::VectorXd m;  // first moment
  Eigen::VectorXd v;  // second moment, entrywise >= 0
  long step_count = 0;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState zeros(Eigen::Index n, double learning_rate);
};

// Bias-corrected Adam update; mutates params and state. Throws on
// non-finite gradient entries.
void adam_step(AdamState& state, Eigen::VectorXd& params,
               const Eigen::VectorXd& grad);

// Rescales grad in place so its Euclidean norm is at most max_norm.
void clip_gradient_norm(Eigen::VectorXd& grad, double max_norm);

// Checkpoint format: magic, spec dims, then the raw 64-bit little-endian
// parameter values.
void save_params(const std::string& path, const NetworkSpec& spec,
                 const Eigen::VectorXd& params);
struct SavedParams {
  NetworkSpec spec;
  Eigen::VectorXd params;
};
SavedParams load_params(const std::string& path);

}  // namespace dvdn
