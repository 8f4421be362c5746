#pragma once

#include <optional>

#include <nlohmann/json.hpp>

namespace fscil {

// Per-session accuracy record. Novel-class fields exist only for t >= 1 and
// confusion_gap is always nn_acc - na_acc.
class EvalReport {
 public:
  static EvalReport base_session(double session_top1, double ba_acc);
  static EvalReport incremental(int session, double session_top1, double ba_acc, double na_acc,
                                double aa_acc, double nn_acc);

  int session() const { return session_; }
  double session_top1() const { return session_top1_; }
  double ba_acc() const { return ba_acc_; }
  double aa_acc() const { return aa_acc_; }
  std::optional<double> na_acc() const { return na_acc_; }
  std::optional<double> nn_acc() const { return nn_acc_; }
  std::optional<double> confusion_gap() const { return confusion_gap_; }

  const std::optional<nlohmann::json>& diagnostics() const { return diagnostics_; }
  void set_diagnostics(nlohmann::json payload) { diagnostics_ = std::move(payload); }

  friend bool operator==(const EvalReport&, const EvalReport&) = default;

 private:
  EvalReport() = default;
  friend EvalReport eval_report_from_json(const nlohmann::json& j);

  int session_ = 0;
  double session_top1_ = 0.0;
  double ba_acc_ = 0.0;
  double aa_acc_ = 0.0;
  std::optional<double> na_acc_;
  std::optional<double> nn_acc_;
  std::optional<double> confusion_gap_;
  std::optional<nlohmann::json> diagnostics_;
};

}  // namespace fscil
