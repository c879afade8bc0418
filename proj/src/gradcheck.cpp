#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace gridvit {

namespace {

double eval_loss(const LossBuilder& f, const std::vector<Tensor64>& params) {
  Tape64 tape;
  std::vector<Tape64::Id> ids;
  ids.reserve(params.size());
  for (const Tensor64& p : params) ids.push_back(tape.leaf(p, false));
  const Tape64::Id loss = f(tape, ids);
  if (tape.value(loss).size() != 1) {
    fail(ErrorCode::validation, "grad_check requires a scalar-valued function");
  }
  return tape.value(loss)[0];
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& f, std::vector<Tensor64> params,
                           double h, int min_coords, Rng& rng) {
  if (h <= 0.0) fail(ErrorCode::validation, "grad_check step h must be > 0");
  if (params.empty()) fail(ErrorCode::validation, "grad_check needs parameters");

  // Analytic pass.
  Tape64 tape;
  std::vector<Tape64::Id> ids;
  ids.reserve(params.size());
  for (const Tensor64& p : params) ids.push_back(tape.leaf(p, true));
  const Tape64::Id loss = f(tape, ids);
  if (tape.value(loss).size() != 1) {
    fail(ErrorCode::validation, "grad_check requires a scalar-valued function");
  }
  tape.backward(loss);
  std::vector<Tensor64> analytic;
  analytic.reserve(params.size());
  for (Tape64::Id id : ids) analytic.push_back(tape.grad(id));

  // Sample coordinates: every tensor gets at least one, the remainder is
  // spread uniformly over the flattened parameter space.
  std::vector<std::pair<int, std::size_t>> coords;
  for (std::size_t t = 0; t < params.size(); ++t) {
    coords.emplace_back(static_cast<int>(t),
                        static_cast<std::size_t>(rng.uniform_int(
                            static_cast<int>(params[t].size()))));
  }
  std::size_t total = 0;
  for (const Tensor64& p : params) total += p.size();
  while (static_cast<int>(coords.size()) < min_coords) {
    std::size_t flat = static_cast<std::size_t>(
        rng.next_u64() % static_cast<std::uint64_t>(total));
    for (std::size_t t = 0; t < params.size(); ++t) {
      if (flat < params[t].size()) {
        coords.emplace_back(static_cast<int>(t), flat);
        break;
      }
      flat -= params[t].size();
    }
  }

  GradCheckReport report;
  for (const auto& [t, i] : coords) {
    Tensor64& p = params[static_cast<std::size_t>(t)];
    const double saved = p[i];
    p[i] = saved + h;
    const double up = eval_loss(f, params);
    p[i] = saved - h;
    const double down = eval_loss(f, params);
    p[i] = saved;

    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[static_cast<std::size_t>(t)][i];
    const double rel = std::fabs(a - numeric) /
                       std::max({std::fabs(a), std::fabs(numeric), 1e-8});
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = t;
      report.worst_coord = i;
    }
    report.coords_checked += 1;
  }
  return report;
}

}  // namespace gridvit
