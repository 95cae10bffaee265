#include "deskmt/nnet.hpp"

#include <algorithm>
#include <cmath>

namespace deskmt::nn {

bool GradCheckReport::passed() const {
  return std::all_of(groups.begin(), groups.end(), [](const auto& g) { return g.passed; });
}

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& g : groups) w = std::max(w, g.max_rel_error);
  return w;
}

GradCheckReport grad_check(const std::function<double()>& loss, std::span<const ParamGroup> groups,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (const auto& group : groups) {
    GradCheckEntry entry{group.name};
    auto& value = *group.value;
    const auto n = static_cast<std::size_t>(value.size());
    const std::size_t stride =
        options.max_entries == 0 || n <= options.max_entries ? 1 : (n + options.max_entries - 1) / options.max_entries;
    for (std::size_t k = 0; k < n; k += stride) {
      double& x = value.data()[k];
      const double saved = x;
      x = saved + options.epsilon;
      const double up = loss();
      x = saved - options.epsilon;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double analytic = group.analytic->data()[k];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double rel = std::isfinite(numeric) ? std::abs(analytic - numeric) / denom : INFINITY;
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
      ++entry.checked;
    }
    entry.passed = entry.max_rel_error < options.tolerance;
    report.groups.push_back(std::move(entry));
  }
  return report;
}

}  // namespace deskmt::nn
