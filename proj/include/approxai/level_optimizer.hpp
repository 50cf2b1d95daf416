#pragma once
// Selection of per-stage FFT approximation levels: minimize the sum of the
// levels subject to an empirical probability constraint. A sample signal
// counts as satisfied when its PSNR against the exact transform reaches the
// threshold and its energy stays within budget; a schedule is feasible when
// the satisfied fraction reaches the probability threshold.
//
// Small stage counts are searched exhaustively; larger ones use greedy
// descent from the all-exact schedule.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "approxai/approx_multiplier.hpp"
#include "approxai/error.hpp"
#include "approxai/fft.hpp"
#include "approxai/parallel.hpp"
#include "approxai/rng.hpp"

namespace approxai {

struct OptConstraints {
  /// Minimum PSNR in dB.
  double psnr_db = 40.0;
  /// Maximum energy units per transform.
  double energy_budget = std::numeric_limits<double>::infinity();
  /// Minimum fraction of samples that must satisfy both bounds.
  double probability = 0.9;

  void validate() const {
    if (!std::isfinite(psnr_db)) throw Error(Errc::invalid_argument, "PSNR threshold must be finite");
    // A zero budget is accepted and simply makes every schedule infeasible.
    if (!(energy_budget >= 0.0)) throw Error(Errc::invalid_argument, "energy budget must not be negative");
    if (!(probability >= 0.0 && probability <= 1.0)) {
      throw Error(Errc::invalid_argument, "probability threshold must lie in [0, 1]");
    }
  }
};

struct SearchOptions {
  EnergyTable table;
  std::size_t workers = 1;
};

/// Sample signals with their exact spectra precomputed.
class SampleSet {
 public:
  SampleSet() = default;
  explicit SampleSet(std::vector<ComplexSignal> signals) : signals_(std::move(signals)) {
    if (signals_.empty()) throw Error(Errc::empty_samples, "no sample signals");
    const std::size_t n = signals_.front().size();
    references_.reserve(signals_.size());
    for (const auto& s : signals_) {
      if (s.size() != n) throw Error(Errc::length_mismatch, "sample signals differ in length");
      const auto values = s.to_complex();
      references_.push_back(fft_exact(values));
    }
  }

  /// `count` real signals, uniform in [-1, 1], drawn from named child streams
  /// of `seed`.
  static SampleSet uniform(std::size_t length, std::size_t count, std::uint64_t seed) {
    require_power_of_two(length);
    if (count == 0) throw Error(Errc::empty_samples, "sample count must be at least 1");
    const Stream root = Stream(seed).split("levelopt.samples");
    std::vector<ComplexSignal> signals;
    signals.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      Stream s = root.split(i);
      std::vector<double> values(length);
      for (double& v : values) v = s.uniform(-1.0, 1.0);
      signals.push_back(ComplexSignal::from_real(values));
    }
    return SampleSet(std::move(signals));
  }

  [[nodiscard]] std::size_t size() const noexcept { return signals_.size(); }
  [[nodiscard]] bool empty() const noexcept { return signals_.empty(); }
  [[nodiscard]] std::size_t length() const noexcept { return signals_.empty() ? 0 : signals_.front().size(); }
  [[nodiscard]] const ComplexSignal& signal(std::size_t i) const { return signals_.at(i); }
  [[nodiscard]] const std::vector<std::complex<double>>& reference(std::size_t i) const {
    return references_.at(i);
  }

 private:
  std::vector<ComplexSignal> signals_;
  std::vector<std::vector<std::complex<double>>> references_;
};

struct ScheduleEvaluation {
  double feasible_fraction = 0.0;
  double mean_psnr = 0.0;
  double mean_energy = 0.0;
};

struct OptResult {
  LevelSchedule schedule;
  int objective = 0;
  double feasible_fraction = 0.0;
  double mean_psnr = 0.0;
  double mean_energy = 0.0;
  /// Greedy only: every accepted schedule from all-11 to the result.
  std::vector<LevelSchedule> path;
};

/// Energy of one n-point transform under a schedule: every stage performs
/// n/2 complex twiddle products of four real multiplies each.
[[nodiscard]] inline double schedule_energy(std::size_t n, const LevelSchedule& sched,
                                            const EnergyTable& table) {
  detail::check_schedule(n, sched);
  EnergyLedger ledger(table);
  for (std::size_t s = 0; s < sched.size(); ++s) ledger.record(sched[s], 2 * n);
  return ledger.total();
}

[[nodiscard]] inline ScheduleEvaluation evaluate_schedule(const LevelSchedule& sched,
                                                          const SampleSet& samples,
                                                          const OptConstraints& constraints,
                                                          const SearchOptions& options = {}) {
  constraints.validate();
  if (samples.empty()) throw Error(Errc::empty_samples, "no sample signals");
  detail::check_schedule(samples.length(), sched);
  const std::size_t count = samples.size();
  std::vector<double> psnrs(count), energies(count);
  EnergyLedger total(options.table);
  run_partitioned(count, options.workers, total, [&](RowRange range, EnergyLedger&) {
    for (std::size_t i = range.begin; i < range.end; ++i) {
      EnergyLedger ledger(options.table);
      const auto approx = ax_fft(samples.signal(i), sched, ledger).to_complex();
      psnrs[i] = psnr(samples.reference(i), approx).psnr_db;
      energies[i] = ledger.total();
    }
  });
  ScheduleEvaluation out;
  std::size_t satisfied = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (psnrs[i] >= constraints.psnr_db && energies[i] <= constraints.energy_budget) ++satisfied;
    out.mean_psnr += psnrs[i];
    out.mean_energy += energies[i];
  }
  out.feasible_fraction = static_cast<double>(satisfied) / static_cast<double>(count);
  out.mean_psnr /= static_cast<double>(count);
  out.mean_energy /= static_cast<double>(count);
  return out;
}

namespace detail {

// Feasibility only, stopping as soon as the outcome is decided. Agrees with
// evaluate_schedule(...).feasible_fraction >= probability.
inline bool is_feasible(const LevelSchedule& sched, const SampleSet& samples,
                        const OptConstraints& constraints, const SearchOptions& options) {
  const std::size_t count = samples.size();
  if (schedule_energy(samples.length(), sched, options.table) > constraints.energy_budget) {
    return constraints.probability <= 0.0;
  }
  std::size_t needed = 0;
  while (needed < count &&
         static_cast<double>(needed) / static_cast<double>(count) < constraints.probability) {
    ++needed;
  }
  if (static_cast<double>(needed) / static_cast<double>(count) < constraints.probability) return false;
  std::size_t passed = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (passed >= needed) return true;
    if (passed + (count - i) < needed) return false;
    EnergyLedger ledger(options.table);
    const auto approx = ax_fft(samples.signal(i), sched, ledger).to_complex();
    if (psnr(samples.reference(i), approx).psnr_db >= constraints.psnr_db) ++passed;
  }
  return passed >= needed;
}

inline OptResult finish(const LevelSchedule& sched, const SampleSet& samples,
                        const OptConstraints& constraints, const SearchOptions& options) {
  const auto eval = evaluate_schedule(sched, samples, constraints, options);
  return {sched, sched.sum(), eval.feasible_fraction, eval.mean_psnr, eval.mean_energy, {}};
}

inline void check_stage_count(std::size_t n_stages, const SampleSet& samples) {
  if (samples.empty()) throw Error(Errc::empty_samples, "no sample signals");
  if (std::size_t{1} << n_stages != samples.length()) {
    throw Error(Errc::schedule_mismatch, std::to_string(n_stages) + " stages do not match " +
                                             std::to_string(samples.length()) + "-point samples");
  }
}

}  // namespace detail

/// Minimal level sum over all 12^n_stages schedules; ties go to the
/// lexicographically smallest schedule.
[[nodiscard]] inline OptResult optimize_exhaustive(std::size_t n_stages, const SampleSet& samples,
                                                   const OptConstraints& constraints,
                                                   const SearchOptions& options = {}) {
  constraints.validate();
  if (n_stages > 4) {
    throw Error(Errc::invalid_argument, "exhaustive search supports at most 4 stages (12^4 schedules)");
  }
  detail::check_stage_count(n_stages, samples);
  std::size_t total = 1;
  for (std::size_t s = 0; s < n_stages; ++s) total *= ApproxLevel::count;
  std::vector<std::vector<int>> all;
  all.reserve(total);
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<int> levels(n_stages);
    std::size_t rest = code;
    for (std::size_t s = n_stages; s-- > 0;) {
      levels[s] = static_cast<int>(rest % ApproxLevel::count);
      rest /= ApproxLevel::count;
    }
    all.push_back(std::move(levels));
  }
  // Codes enumerate in lexicographic order already; a stable sort by sum
  // keeps that as the tie-break.
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return std::accumulate(a.begin(), a.end(), 0) < std::accumulate(b.begin(), b.end(), 0);
  });
  for (const auto& levels : all) {
    const auto sched = LevelSchedule::from_ints(levels);
    if (detail::is_feasible(sched, samples, constraints, options)) {
      return detail::finish(sched, samples, constraints, options);
    }
  }
  throw Error(Errc::infeasible, "no schedule satisfies the constraints");
}

/// Greedy descent from all-11. Each step lowers by one the stage whose
/// decrement stays feasible and saves the most energy. Equal savings (every
/// stage under a linear cost table) go to the candidate with the higher mean
/// PSNR after the decrement, then to the lower stage index. Stops when no
/// single decrement is feasible.
[[nodiscard]] inline OptResult optimize_greedy(std::size_t n_stages, const SampleSet& samples,
                                               const OptConstraints& constraints,
                                               const SearchOptions& options = {}) {
  constraints.validate();
  detail::check_stage_count(n_stages, samples);
  LevelSchedule sched = LevelSchedule::exact(n_stages);
  if (!detail::is_feasible(sched, samples, constraints, options)) {
    throw Error(Errc::infeasible, "the all-exact schedule already violates the constraints");
  }
  std::vector<LevelSchedule> path{sched};
  const double per_stage = 2.0 * static_cast<double>(samples.length());
  struct Candidate {
    double saving;
    double mean_psnr;
    std::size_t stage;
    LevelSchedule schedule;
  };
  for (;;) {
    std::vector<Candidate> feasible;
    for (std::size_t s = 0; s < n_stages; ++s) {
      const int level = sched[s].value();
      if (level == 0) continue;
      LevelSchedule trial = sched;
      trial.set(s, ApproxLevel(level - 1));
      const auto eval = evaluate_schedule(trial, samples, constraints, options);
      if (eval.feasible_fraction < constraints.probability) continue;
      const double saving = per_stage * (options.table.cost(ApproxLevel(level)) -
                                         options.table.cost(ApproxLevel(level - 1)));
      feasible.push_back({saving, eval.mean_psnr, s, std::move(trial)});
    }
    if (feasible.empty()) break;
    const auto better = [](const Candidate& a, const Candidate& b) {
      // Savings that differ only by rounding in the cost table are ties.
      const double scale = std::max(std::fabs(a.saving), std::fabs(b.saving));
      if (std::fabs(a.saving - b.saving) > 1e-9 * scale) return a.saving > b.saving;
      if (a.mean_psnr != b.mean_psnr) return a.mean_psnr > b.mean_psnr;
      return a.stage < b.stage;
    };
    sched = std::min_element(feasible.begin(), feasible.end(), better)->schedule;
    path.push_back(sched);
  }
  auto result = detail::finish(sched, samples, constraints, options);
  result.path = std::move(path);
  return result;
}

/// Feasibility of each uniform schedule, indexed by level.
[[nodiscard]] inline std::vector<bool> uniform_feasibility(const SampleSet& samples,
                                                           const OptConstraints& constraints,
                                                           const SearchOptions& options = {}) {
  const auto stages = static_cast<std::size_t>(log2_exact(samples.length()));
  std::vector<bool> out(ApproxLevel::count);
  for (int k = 0; k < ApproxLevel::count; ++k) {
    const auto eval = evaluate_schedule(LevelSchedule::uniform(stages, ApproxLevel(k)), samples,
                                        constraints, options);
    out[static_cast<std::size_t>(k)] = eval.feasible_fraction >= constraints.probability;
  }
  return out;
}

/// Lower median of the schedule's levels, for reuse by non-FFT multiplies.
[[nodiscard]] inline ApproxLevel median_level(const LevelSchedule& sched) {
  if (sched.size() == 0) return ApproxLevel::exact();
  auto levels = sched.to_ints();
  std::sort(levels.begin(), levels.end());
  return ApproxLevel(levels[(levels.size() - 1) / 2]);
}

}  // namespace approxai
