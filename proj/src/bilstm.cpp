#include "skelfuse/bilstm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "skelfuse/error.hpp"
#include "skelfuse/rng.hpp"

namespace skelfuse {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd sigmoid(const VectorXd& v) {
  return (1.0 / (1.0 + (-v.array()).exp())).matrix();
}

void check_dims(const Dims& dims) {
  if (dims.joints <= 0 || dims.embedding <= 0 || dims.classes <= 0) {
    throw DataError("model dims must be positive");
  }
  if (dims.hidden <= 0 || dims.hidden % 2 != 0) {
    throw DataError("hidden size must be positive and even");
  }
}

// Everything backward needs from one cell step.
struct StepTrace {
  VectorXd z;  // [x; h_prev]
  VectorXd gate_i, gate_f, gate_o, gate_g;
  VectorXd c, tanh_c;
};

struct CellRun {
  std::vector<StepTrace> steps;
  VectorXd final_h;
};

CellRun run_cell(const LstmCellParams& cell, const std::vector<VectorXd>& xs,
                 int half_hidden) {
  CellRun run;
  run.steps.reserve(xs.size());
  VectorXd h = VectorXd::Zero(half_hidden);
  VectorXd c = VectorXd::Zero(half_hidden);
  for (const VectorXd& x : xs) {
    StepTrace t;
    t.z.resize(x.size() + half_hidden);
    t.z << x, h;
    t.gate_i = sigmoid(cell.w_input * t.z + cell.b_input);
    t.gate_f = sigmoid(cell.w_forget * t.z + cell.b_forget);
    t.gate_o = sigmoid(cell.w_output * t.z + cell.b_output);
    t.gate_g = (cell.w_candidate * t.z + cell.b_candidate).array().tanh();
    t.c = t.gate_f.cwiseProduct(c) + t.gate_i.cwiseProduct(t.gate_g);
    t.tanh_c = t.c.array().tanh();
    h = t.gate_o.cwiseProduct(t.tanh_c);
    c = t.c;
    run.steps.push_back(std::move(t));
  }
  run.final_h = h;
  return run;
}

// Backpropagates dh at the final step through the whole cell run.
// Accumulates parameter gradients into `grads` and per-step input gradients
// into `dxs` (same order as the xs passed to run_cell).
void backprop_cell(const LstmCellParams& cell, const CellRun& run,
                   const VectorXd& dh_final, int embedding,
                   LstmCellParams& grads, std::vector<VectorXd>& dxs) {
  const auto l = static_cast<std::ptrdiff_t>(run.steps.size());
  const int half = static_cast<int>(dh_final.size());
  VectorXd dh = dh_final;
  VectorXd dc = VectorXd::Zero(half);
  for (std::ptrdiff_t t = l - 1; t >= 0; --t) {
    const StepTrace& s = run.steps[static_cast<std::size_t>(t)];
    const VectorXd c_prev =
        t > 0 ? run.steps[static_cast<std::size_t>(t - 1)].c : VectorXd::Zero(half);

    const VectorXd d_o = dh.cwiseProduct(s.tanh_c);
    dc += dh.cwiseProduct(s.gate_o)
              .cwiseProduct((1.0 - s.tanh_c.array().square()).matrix());
    const VectorXd d_i = dc.cwiseProduct(s.gate_g);
    const VectorXd d_g = dc.cwiseProduct(s.gate_i);
    const VectorXd d_f = dc.cwiseProduct(c_prev);

    const VectorXd d_i_pre =
        d_i.cwiseProduct(s.gate_i).cwiseProduct((1.0 - s.gate_i.array()).matrix());
    const VectorXd d_f_pre =
        d_f.cwiseProduct(s.gate_f).cwiseProduct((1.0 - s.gate_f.array()).matrix());
    const VectorXd d_o_pre =
        d_o.cwiseProduct(s.gate_o).cwiseProduct((1.0 - s.gate_o.array()).matrix());
    const VectorXd d_g_pre =
        d_g.cwiseProduct((1.0 - s.gate_g.array().square()).matrix());

    grads.w_input.noalias() += d_i_pre * s.z.transpose();
    grads.w_forget.noalias() += d_f_pre * s.z.transpose();
    grads.w_output.noalias() += d_o_pre * s.z.transpose();
    grads.w_candidate.noalias() += d_g_pre * s.z.transpose();
    grads.b_input += d_i_pre;
    grads.b_forget += d_f_pre;
    grads.b_output += d_o_pre;
    grads.b_candidate += d_g_pre;

    const VectorXd dz = cell.w_input.transpose() * d_i_pre +
                        cell.w_forget.transpose() * d_f_pre +
                        cell.w_output.transpose() * d_o_pre +
                        cell.w_candidate.transpose() * d_g_pre;
    dxs[static_cast<std::size_t>(t)] += dz.head(embedding);
    dh = dz.tail(half);
    dc = dc.cwiseProduct(s.gate_f);
  }
}

struct ForwardTrace {
  std::vector<VectorXd> inputs;      // flattened poses
  std::vector<VectorXd> embedded;    // after ReLU
  CellRun fwd, bwd;                  // bwd consumed the embeddings reversed
  VectorXd concat, logits;
  Prediction prediction;
};

ForwardTrace run_forward(const Action& action, const BiLstmParams& params) {
  const Dims& dims = params.dims;
  check_dims(dims);
  if (action.poses.empty()) {
    throw DataError("cannot classify empty action '" + action.id + "'");
  }
  if (action.joint_count() != static_cast<std::size_t>(dims.joints)) {
    throw DataError("action '" + action.id + "' has " +
                    std::to_string(action.joint_count()) + " joints, model expects " +
                    std::to_string(dims.joints));
  }

  ForwardTrace trace;
  const std::size_t l = action.poses.size();
  trace.inputs.reserve(l);
  trace.embedded.reserve(l);
  for (const Pose& pose : action.poses) {
    VectorXd p = flatten_pose(pose);
    trace.embedded.push_back((params.embed_w * p + params.embed_b).cwiseMax(0.0));
    trace.inputs.push_back(std::move(p));
  }

  trace.fwd = run_cell(params.forward_cell, trace.embedded, dims.half_hidden());
  std::vector<VectorXd> reversed(trace.embedded.rbegin(), trace.embedded.rend());
  trace.bwd = run_cell(params.backward_cell, reversed, dims.half_hidden());

  trace.concat.resize(dims.hidden);
  trace.concat << trace.fwd.final_h, trace.bwd.final_h;
  trace.logits = params.head_w * trace.concat + params.head_b;
  if (!trace.logits.allFinite()) {
    throw TrainError("non-finite activations while classifying '" + action.id + "'");
  }

  const double peak = trace.logits.maxCoeff();
  // scalar exp: Eigen's vectorized exp clamps large negative arguments to a
  // denormal instead of underflowing to zero, which would keep saturated
  // softmax outputs from reaching exactly 0 and 1
  const VectorXd exps = (trace.logits.array() - peak)
                            .unaryExpr([](double v) { return std::exp(v); })
                            .matrix();
  trace.prediction.probabilities = exps / exps.sum();
  int best = 0;
  for (int c = 1; c < dims.classes; ++c) {
    if (trace.prediction.probabilities(c) > trace.prediction.probabilities(best)) {
      best = c;
    }
  }
  trace.prediction.predicted_class = best;
  return trace;
}

double loss_and_grads(const Action& action, int target, const BiLstmParams& params,
                      BiLstmParams& grads) {
  ForwardTrace trace = run_forward(action, params);
  const Dims& dims = params.dims;
  if (target < 0 || target >= dims.classes) {
    throw DataError("target class out of range for '" + action.id + "'");
  }
  const double loss = cross_entropy_loss(trace.prediction, target);

  VectorXd dlogits = trace.prediction.probabilities;
  dlogits(target) -= 1.0;

  grads.head_w.noalias() += dlogits * trace.concat.transpose();
  grads.head_b += dlogits;
  const VectorXd dconcat = params.head_w.transpose() * dlogits;

  const std::size_t l = trace.embedded.size();
  std::vector<VectorXd> dx(l, VectorXd::Zero(dims.embedding));
  backprop_cell(params.forward_cell, trace.fwd, dconcat.head(dims.half_hidden()),
                dims.embedding, grads.forward_cell, dx);

  std::vector<VectorXd> dx_rev(l, VectorXd::Zero(dims.embedding));
  backprop_cell(params.backward_cell, trace.bwd, dconcat.tail(dims.half_hidden()),
                dims.embedding, grads.backward_cell, dx_rev);
  for (std::size_t t = 0; t < l; ++t) dx[t] += dx_rev[l - 1 - t];

  for (std::size_t t = 0; t < l; ++t) {
    // ReLU mask: a unit is active iff its output is strictly positive
    const VectorXd d_pre =
        dx[t].cwiseProduct((trace.embedded[t].array() > 0.0).cast<double>().matrix());
    grads.embed_w.noalias() += d_pre * trace.inputs[t].transpose();
    grads.embed_b += d_pre;
  }
  return loss;
}

}  // namespace

BiLstmParams BiLstmParams::zeros(const Dims& dims) {
  check_dims(dims);
  BiLstmParams p;
  p.dims = dims;
  const int half = dims.half_hidden();
  const int zdim = dims.embedding + half;
  p.embed_w = MatrixXd::Zero(dims.embedding, dims.input());
  p.embed_b = VectorXd::Zero(dims.embedding);
  for (LstmCellParams* cell : {&p.forward_cell, &p.backward_cell}) {
    cell->w_input = MatrixXd::Zero(half, zdim);
    cell->w_forget = MatrixXd::Zero(half, zdim);
    cell->w_output = MatrixXd::Zero(half, zdim);
    cell->w_candidate = MatrixXd::Zero(half, zdim);
    cell->b_input = VectorXd::Zero(half);
    cell->b_forget = VectorXd::Zero(half);
    cell->b_output = VectorXd::Zero(half);
    cell->b_candidate = VectorXd::Zero(half);
  }
  p.head_w = MatrixXd::Zero(dims.classes, dims.hidden);
  p.head_b = VectorXd::Zero(dims.classes);
  return p;
}

LstmState initial_state(int half_hidden) {
  return {VectorXd::Zero(half_hidden), VectorXd::Zero(half_hidden)};
}

LstmState lstm_step(const LstmCellParams& cell, const VectorXd& x,
                    const LstmState& state) {
  VectorXd z(x.size() + state.h.size());
  z << x, state.h;
  const VectorXd i = sigmoid(cell.w_input * z + cell.b_input);
  const VectorXd f = sigmoid(cell.w_forget * z + cell.b_forget);
  const VectorXd o = sigmoid(cell.w_output * z + cell.b_output);
  const VectorXd g = (cell.w_candidate * z + cell.b_candidate).array().tanh();
  LstmState next;
  next.c = f.cwiseProduct(state.c) + i.cwiseProduct(g);
  next.h = o.cwiseProduct(next.c.array().tanh().matrix());
  return next;
}

VectorXd flatten_pose(const Pose& pose) {
  VectorXd v(3 * pose.joints.size());
  for (std::size_t j = 0; j < pose.joints.size(); ++j) {
    v(static_cast<Eigen::Index>(3 * j)) = pose.joints[j].x;
    v(static_cast<Eigen::Index>(3 * j + 1)) = pose.joints[j].y;
    v(static_cast<Eigen::Index>(3 * j + 2)) = pose.joints[j].z;
  }
  return v;
}

VectorXd embed_pose(const Pose& pose, const BiLstmParams& params) {
  const VectorXd p = flatten_pose(pose);
  if (p.size() != params.embed_w.cols()) {
    throw DataError("pose size does not match the embedding projection");
  }
  return (params.embed_w * p + params.embed_b).cwiseMax(0.0);
}

Prediction forward(const Action& action, const BiLstmParams& params) {
  return run_forward(action, params).prediction;
}

double cross_entropy_loss(const Prediction& prediction, int target) {
  if (target < 0 || target >= prediction.probabilities.size()) {
    throw DataError("loss target class out of range");
  }
  const double p = std::max(prediction.probabilities(target), 1e-12);
  return -std::log(p);
}

BiLstmParams backward(const Action& action, int target, const BiLstmParams& params) {
  BiLstmParams grads = BiLstmParams::zeros(params.dims);
  loss_and_grads(action, target, params, grads);
  return grads;
}

BiLstmParams train(const std::vector<LabeledAction>& train_set,
                   const TrainConfig& config, const Dims& dims,
                   const EpochCallback& on_epoch) {
  check_dims(dims);
  if (train_set.empty()) throw DataError("training set is empty");
  if (config.epochs < 0) throw DataError("epochs must be >= 0");
  if (!(config.learning_rate > 0.0)) throw DataError("learning rate must be positive");
  if (config.batch_size < 1) throw DataError("batch size must be >= 1");
  if (!(config.init_scale > 0.0)) throw DataError("init scale must be positive");
  for (const auto& [action, target] : train_set) {
    validate_action(action, dims.joints);
    if (target < 0 || target >= dims.classes) {
      throw DataError("training target out of range for '" + action.id + "'");
    }
  }

  Rng rng(mix_seed(config.seed, "bilstm-train"));
  BiLstmParams params = BiLstmParams::zeros(dims);
  visit_tensors(params, [&](auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        t(r, c) = rng.uniform(-config.init_scale, config.init_scale);
      }
    }
  });
  // forget gates start open so long sequences keep gradient flow
  params.forward_cell.b_forget.array() += 1.0;
  params.backward_cell.b_forget.array() += 1.0;
  // embedding bias starts positive: inputs with a large constant offset
  // (unnormalized coordinates) otherwise drive every ReLU unit dead within
  // the first epochs at small embedding sizes
  params.embed_b.array() += 0.5;

  BiLstmParams adam_m = BiLstmParams::zeros(dims);
  BiLstmParams adam_v = BiLstmParams::zeros(dims);
  long adam_t = 0;

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      BiLstmParams grads = BiLstmParams::zeros(dims);
      for (std::size_t k = start; k < stop; ++k) {
        const auto& [action, target] = train_set[order[k]];
        epoch_loss += loss_and_grads(action, target, params, grads);
      }
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      visit_tensors(grads, [&](auto& g) { g *= inv_batch; });

      if (config.optimizer == TrainConfig::Optimizer::Sgd) {
        visit_tensors2(params, grads, [&](auto& t, const auto& g) {
          t -= config.learning_rate * g;
        });
      } else {
        ++adam_t;
        const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(adam_t));
        const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(adam_t));
        visit_tensors2(adam_m, grads, [&](auto& m, const auto& g) {
          m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * g;
        });
        visit_tensors2(adam_v, grads, [&](auto& v, const auto& g) {
          v.array() = config.adam_beta2 * v.array() +
                      (1.0 - config.adam_beta2) * g.array().square();
        });
        visit_tensors3(params, adam_m, adam_v, [&](auto& t, const auto& m, const auto& v) {
          t.array() -= config.learning_rate * (m.array() / bc1) /
                       ((v.array() / bc2).sqrt() + config.adam_epsilon);
        });
      }
    }
    const double mean_loss = epoch_loss / static_cast<double>(n);
    if (!std::isfinite(mean_loss)) {
      throw TrainError("training diverged at epoch " + std::to_string(epoch) +
                       " (non-finite loss)");
    }
    if (on_epoch) on_epoch(epoch, mean_loss, params);
  }
  return params;
}

Prediction classify(const BiLstmParams& params, const Action& action) {
  return forward(action, params);
}

EvalResult evaluate(const BiLstmParams& params,
                    const std::vector<LabeledAction>& test_set) {
  if (test_set.empty()) throw DataError("evaluation set is empty");
  EvalResult result;
  result.rows.reserve(test_set.size());
  std::size_t correct = 0;
  for (const auto& [action, target] : test_set) {
    const Prediction pred = forward(action, params);
    if (pred.predicted_class == target) ++correct;
    result.rows.push_back({action.id, target, pred.predicted_class});
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(test_set.size());
  return result;
}

namespace {
constexpr char kModelMagic[4] = {'S', 'F', 'B', 'M'};
constexpr std::uint32_t kModelVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("truncated model file '" + path + "'");
  return v;
}
}  // namespace

void save_model(const BiLstmParams& params, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write model '" + tmp.string() + "'");
    out.write(kModelMagic, sizeof kModelMagic);
    write_u32(out, kModelVersion);
    write_u32(out, static_cast<std::uint32_t>(params.dims.joints));
    write_u32(out, static_cast<std::uint32_t>(params.dims.embedding));
    write_u32(out, static_cast<std::uint32_t>(params.dims.hidden));
    write_u32(out, static_cast<std::uint32_t>(params.dims.classes));
    visit_tensors(params, [&](const auto& t) {
      for (Eigen::Index r = 0; r < t.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.cols(); ++c) {
          const double v = t(r, c);
          out.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
      }
    });
    if (!out) throw DataError("short write to model '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename model into place at '" + path.string() + "'");
}

BiLstmParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model '" + path.string() + "'");
  char magic[4] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kModelMagic, sizeof magic) != 0) {
    throw DataError("'" + path.string() + "' is not a model file");
  }
  const std::uint32_t version = read_u32(in, path.string());
  if (version != kModelVersion) {
    throw DataError("unsupported model version " + std::to_string(version));
  }
  Dims dims;
  dims.joints = static_cast<int>(read_u32(in, path.string()));
  dims.embedding = static_cast<int>(read_u32(in, path.string()));
  dims.hidden = static_cast<int>(read_u32(in, path.string()));
  dims.classes = static_cast<int>(read_u32(in, path.string()));
  BiLstmParams params = BiLstmParams::zeros(dims);
  visit_tensors(params, [&](auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        double v = 0.0;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        t(r, c) = v;
      }
    }
  });
  if (!in) throw DataError("truncated model file '" + path.string() + "'");
  char extra = 0;
  if (in.read(&extra, 1)) {
    throw DataError("trailing bytes in model file '" + path.string() + "'");
  }
  return params;
}

}  // namespace skelfuse
