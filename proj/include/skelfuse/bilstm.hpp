#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "skelfuse/types.hpp"

namespace skelfuse {

struct Dims {
  int joints = 0;      // joints per pose; the network input is 3 * joints
  int embedding = 8;   // pose embedding size
  int hidden = 32;     // total feature size; each direction gets hidden / 2
  int classes = 0;

  int input() const { return 3 * joints; }
  int half_hidden() const { return hidden / 2; }
};

// One LSTM cell direction. Gate matrices act on [x; h_prev], so each is
// (hidden/2) x (embedding + hidden/2).
struct LstmCellParams {
  Eigen::MatrixXd w_input, w_forget, w_output, w_candidate;
  Eigen::VectorXd b_input, b_forget, b_output, b_candidate;
};

struct BiLstmParams {
  Dims dims;
  Eigen::MatrixXd embed_w;  // embedding x input
  Eigen::VectorXd embed_b;
  LstmCellParams forward_cell, backward_cell;
  Eigen::MatrixXd head_w;  // classes x hidden
  Eigen::VectorXd head_b;

  static BiLstmParams zeros(const Dims& dims);
};

// Tensor visitors in declared order (embedding, forward cell gates, backward
// cell gates, head). Initialization, optimizer steps, serialization and the
// finite-difference checks all iterate in this one order.
template <class Cell, class F>
void visit_cell(Cell&& c, F&& f) {
  f(c.w_input); f(c.b_input);
  f(c.w_forget); f(c.b_forget);
  f(c.w_output); f(c.b_output);
  f(c.w_candidate); f(c.b_candidate);
}

template <class Params, class F>
void visit_tensors(Params&& p, F&& f) {
  f(p.embed_w); f(p.embed_b);
  visit_cell(p.forward_cell, f);
  visit_cell(p.backward_cell, f);
  f(p.head_w); f(p.head_b);
}

template <class A, class B, class F>
void visit_cell2(A&& a, B&& b, F&& f) {
  f(a.w_input, b.w_input); f(a.b_input, b.b_input);
  f(a.w_forget, b.w_forget); f(a.b_forget, b.b_forget);
  f(a.w_output, b.w_output); f(a.b_output, b.b_output);
  f(a.w_candidate, b.w_candidate); f(a.b_candidate, b.b_candidate);
}

template <class A, class B, class F>
void visit_tensors2(A&& a, B&& b, F&& f) {
  f(a.embed_w, b.embed_w); f(a.embed_b, b.embed_b);
  visit_cell2(a.forward_cell, b.forward_cell, f);
  visit_cell2(a.backward_cell, b.backward_cell, f);
  f(a.head_w, b.head_w); f(a.head_b, b.head_b);
}

template <class A, class B, class C, class F>
void visit_cell3(A&& a, B&& b, C&& c, F&& f) {
  f(a.w_input, b.w_input, c.w_input); f(a.b_input, b.b_input, c.b_input);
  f(a.w_forget, b.w_forget, c.w_forget); f(a.b_forget, b.b_forget, c.b_forget);
  f(a.w_output, b.w_output, c.w_output); f(a.b_output, b.b_output, c.b_output);
  f(a.w_candidate, b.w_candidate, c.w_candidate);
  f(a.b_candidate, b.b_candidate, c.b_candidate);
}

template <class A, class B, class C, class F>
void visit_tensors3(A&& a, B&& b, C&& c, F&& f) {
  f(a.embed_w, b.embed_w, c.embed_w); f(a.embed_b, b.embed_b, c.embed_b);
  visit_cell3(a.forward_cell, b.forward_cell, c.forward_cell, f);
  visit_cell3(a.backward_cell, b.backward_cell, c.backward_cell, f);
  f(a.head_w, b.head_w, c.head_w); f(a.head_b, b.head_b, c.head_b);
}

struct Prediction {
  Eigen::VectorXd probabilities;
  int predicted_class = 0;  // lowest index attaining the maximum
};

struct LstmState {
  Eigen::VectorXd h, c;
};

LstmState initial_state(int half_hidden);
LstmState lstm_step(const LstmCellParams& cell, const Eigen::VectorXd& x,
                    const LstmState& state);

Eigen::VectorXd flatten_pose(const Pose& pose);

// ReLU(embed_w * pose + embed_b)
Eigen::VectorXd embed_pose(const Pose& pose, const BiLstmParams& params);

// Runs the forward cell left to right and the backward cell right to left,
// both from zero states, concatenates the two final states and applies the
// softmax head.
Prediction forward(const Action& action, const BiLstmParams& params);

// -log(p[target]), with the probability clamped below at 1e-12.
double cross_entropy_loss(const Prediction& prediction, int target);

// Exact gradients of cross_entropy_loss(forward(action), target) with respect
// to every parameter, via backpropagation through time over both directions.
// The result uses BiLstmParams as the gradient container (same shapes).
BiLstmParams backward(const Action& action, int target, const BiLstmParams& params);

struct TrainConfig {
  int epochs = 150;
  double learning_rate = 1e-3;
  enum class Optimizer { Sgd, Adam } optimizer = Optimizer::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 8;
  std::uint64_t seed = 0;
  double init_scale = 0.08;
};

using LabeledAction = std::pair<Action, int>;

// Called after every epoch with the epoch number (1-based), the mean training
// loss and the current parameters.
using EpochCallback =
    std::function<void(int epoch, double mean_loss, const BiLstmParams& params)>;

// Mini-batch training from a seeded uniform(-init_scale, init_scale)
// initialization (forget-gate biases shifted +1). Sequences are processed
// one at a time and gradients averaged over the batch. Deterministic for a
// fixed seed, config and data.
BiLstmParams train(const std::vector<LabeledAction>& train_set,
                   const TrainConfig& config, const Dims& dims,
                   const EpochCallback& on_epoch = {});

// Stable inference entry point; alias of forward.
Prediction classify(const BiLstmParams& params, const Action& action);

struct EvalRow {
  std::string action_id;
  int target = 0;
  int predicted = 0;
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<EvalRow> rows;
};

EvalResult evaluate(const BiLstmParams& params,
                    const std::vector<LabeledAction>& test_set);

// Versioned binary dump of dims plus all tensors (row-major doubles);
// round-trips bit-exactly.
void save_model(const BiLstmParams& params, const std::filesystem::path& path);
BiLstmParams load_model(const std::filesystem::path& path);

}  // namespace skelfuse
