#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "graphnf/autodiff/tensor.hpp"

namespace graphnf::ad {

enum class OptimizerKind { Adam, RAdam };

OptimizerKind optimizer_kind_from_name(std::string_view name);
std::string_view optimizer_name(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam (bias-corrected) and RAdam (variance-rectified Adam). Parameters are
// updated in place from their accumulated gradients; a parameter with no
// gradient buffer is treated as having a zero gradient.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<Tensor> params);

  // Throws DivergenceError (carrying the parameter index) on a non-finite gradient.
  void step();
  void zero_grad();

  std::size_t step_count() const { return step_count_; }
  double learning_rate() const { return config_.learning_rate; }
  void set_learning_rate(double lr);
  const OptimizerConfig& config() const { return config_; }
  const std::vector<Tensor>& params() const { return params_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

  // RAdam's rectification length rho_t; the adaptive term is used only when it exceeds 4.
  static double radam_rho(double beta2, std::size_t step);

 private:
  OptimizerConfig config_;
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t step_count_ = 0;
};

class LrSchedule {
 public:
  enum class Kind { Plateau, Exponential };

  // Multiplies the rate by `factor` once `patience` consecutive epochs fail to
  // improve on the best validation loss; the counter then restarts.
  static LrSchedule plateau(double initial_lr, double factor, std::size_t patience);
  // Multiplies the rate by `rate` at every epoch end.
  static LrSchedule exponential(double initial_lr, double rate);

  double epoch_end(double validation_loss);

  Kind kind() const { return kind_; }
  double learning_rate() const { return lr_; }
  double best_loss() const { return best_; }
  std::size_t epochs_since_improvement() const { return stale_; }

 private:
  LrSchedule(Kind kind, double lr, double factor, std::size_t patience);

  Kind kind_;
  double lr_;
  double factor_;
  std::size_t patience_;
  double best_;
  std::size_t stale_ = 0;
};

}  // namespace graphnf::ad
