#include "graphnf/autodiff/optim.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "graphnf/errors.hpp"

namespace graphnf::ad {

OptimizerKind optimizer_kind_from_name(std::string_view name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "radam") return OptimizerKind::RAdam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected adam or radam)");
}

std::string_view optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "radam"; }

Optimizer::Optimizer(OptimizerConfig config, std::vector<Tensor> params)
    : config_(config), params_(std::move(params)) {
  if (!(config_.learning_rate > 0.0)) throw ContractViolation("optimizer learning rate must be > 0");
  for (const auto& p : params_) {
    if (!p.requires_grad()) throw ContractViolation("optimizer given a tensor that does not require grad");
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Optimizer::set_learning_rate(double lr) {
  if (!(lr > 0.0)) throw ContractViolation("learning rate must be > 0");
  config_.learning_rate = lr;
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double Optimizer::radam_rho(double beta2, std::size_t step) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double b2t = std::pow(beta2, static_cast<double>(step));
  return rho_inf - 2.0 * static_cast<double>(step) * b2t / (1.0 - b2t);
}

void Optimizer::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (double g : params_[i].grad()) {
      if (!std::isfinite(g)) {
        throw DivergenceError("non-finite gradient in parameter " + std::to_string(i), i);
      }
    }
  }

  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double b1 = config_.beta1, b2 = config_.beta2, eps = config_.epsilon, lr = config_.learning_rate;
  const double bc1 = 1.0 - std::pow(b1, t);
  const double bc2 = 1.0 - std::pow(b2, t);

  // RAdam: rectified adaptive step when the variance estimate is tractable,
  // otherwise an un-adapted momentum step.
  bool adaptive = true;
  double rect = 1.0;
  if (config_.kind == OptimizerKind::RAdam) {
    const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
    const double rho = radam_rho(b2, step_count_);
    adaptive = rho > 4.0;
    if (adaptive) {
      rect = std::sqrt((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho));
    }
  }

  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto values = params_[i].mutable_values();
    auto grad = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad.empty() ? 0.0 : grad[j];
      m[j] = b1 * m[j] + (1.0 - b1) * g;
      v[j] = b2 * v[j] + (1.0 - b2) * g * g;
      const double m_hat = m[j] / bc1;
      if (adaptive) {
        const double v_hat = v[j] / bc2;
        values[j] -= lr * rect * m_hat / (std::sqrt(v_hat) + eps);
      } else {
        values[j] -= lr * m_hat;
      }
    }
  }
}

LrSchedule::LrSchedule(Kind kind, double lr, double factor, std::size_t patience)
    : kind_(kind), lr_(lr), factor_(factor), patience_(patience), best_(std::numeric_limits<double>::infinity()) {
  if (!(lr > 0.0)) throw ContractViolation("schedule learning rate must be > 0");
  if (!(factor > 0.0 && factor <= 1.0)) throw ContractViolation("schedule factor must be in (0, 1]");
}

LrSchedule LrSchedule::plateau(double initial_lr, double factor, std::size_t patience) {
  if (patience == 0) throw ContractViolation("plateau patience must be >= 1");
  return LrSchedule(Kind::Plateau, initial_lr, factor, patience);
}

LrSchedule LrSchedule::exponential(double initial_lr, double rate) {
  return LrSchedule(Kind::Exponential, initial_lr, rate, 0);
}

double LrSchedule::epoch_end(double validation_loss) {
  if (kind_ == Kind::Exponential) {
    lr_ *= factor_;
    return lr_;
  }
  if (validation_loss < best_) {
    best_ = validation_loss;
    stale_ = 0;
  } else if (++stale_ >= patience_) {
    lr_ *= factor_;
    stale_ = 0;
  }
  return lr_;
}

}  // namespace graphnf::ad
