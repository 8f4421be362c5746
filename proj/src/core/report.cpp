#include "fscil/core/report.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fscil {
namespace {

double checked_fraction(double value, const char* field) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw std::invalid_argument(std::string("EvalReport: ") + field + " outside [0, 1]");
  }
  return value;
}

}  // namespace

EvalReport EvalReport::base_session(double session_top1, double ba_acc) {
  EvalReport r;
  r.session_ = 0;
  r.session_top1_ = checked_fraction(session_top1, "session_top1");
  r.ba_acc_ = checked_fraction(ba_acc, "ba_acc");
  r.aa_acc_ = r.session_top1_;
  return r;
}

EvalReport EvalReport::incremental(int session, double session_top1, double ba_acc,
                                   double na_acc, double aa_acc, double nn_acc) {
  if (session < 1) throw std::invalid_argument("EvalReport: incremental session must be >= 1");
  EvalReport r;
  r.session_ = session;
  r.session_top1_ = checked_fraction(session_top1, "session_top1");
  r.ba_acc_ = checked_fraction(ba_acc, "ba_acc");
  r.na_acc_ = checked_fraction(na_acc, "na_acc");
  r.aa_acc_ = checked_fraction(aa_acc, "aa_acc");
  r.nn_acc_ = checked_fraction(nn_acc, "nn_acc");
  r.confusion_gap_ = nn_acc - na_acc;
  return r;
}

}  // namespace fscil
