#include "mhqg/gradcheck.hpp"

#include <cmath>
#include <sstream>

#include "mhqg/common.hpp"

namespace mhqg::num {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed() ? "PASS" : "FAIL") << " max_rel_err=" << max_rel_err
     << " tolerance=" << tolerance;
  for (const GradCheckEntry& e : entries) {
    if (e.max_rel_err >= tolerance) {
      os << "\n  " << e.param << "[" << e.worst_index << "] analytic=" << e.analytic
         << " numeric=" << e.numeric << " err=" << e.max_rel_err;
    }
  }
  return os.str();
}

namespace {

double eval_loss(const LossClosure& closure) {
  Tape tape;
  Var loss = closure(tape);
  if (loss.value().size() != 1) {
    throw ShapeError("gradient check: closure must produce a scalar loss, got " +
                     loss.value().shape_str());
  }
  return loss.value().at(0);
}

}  // namespace

GradCheckReport finite_difference_check(const LossClosure& closure,
                                        const std::vector<Parameter*>& params, double epsilon,
                                        double tolerance) {
  const double l0 = eval_loss(closure);
  const double l1 = eval_loss(closure);
  if (l0 != l1) {
    throw ConfigError("gradient check: closure is not deterministic (unseeded randomness?)");
  }

  // Analytic pass.
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var loss = closure(tape);
    tape.backward(loss);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (Parameter* p : params) {
    GradCheckEntry entry;
    entry.param = p->name;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.at(i);
      p->value.at(i) = saved + epsilon;
      const double lp = eval_loss(closure);
      p->value.at(i) = saved - epsilon;
      const double lm = eval_loss(closure);
      p->value.at(i) = saved;

      const double numeric = (lp - lm) / (2.0 * epsilon);
      const double analytic = p->grad.at(i);
      const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
      const double err = std::fabs(analytic - numeric) / denom;
      if (err > entry.max_rel_err) {
        entry.max_rel_err = err;
        entry.worst_index = i;
        entry.analytic = analytic;
        entry.numeric = numeric;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace mhqg::num
