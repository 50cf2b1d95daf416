#pragma once
// Row-parallel operation splitter. A matrix's rows are cut into contiguous
// blocks, one per worker; every worker applies the same 1-D operation to its
// rows with a private energy ledger; results are merged by row index and the
// assembled matrix is transposed. Numeric results never depend on the worker
// count.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "approxai/approx_multiplier.hpp"
#include "approxai/error.hpp"
#include "approxai/fft.hpp"
#include "approxai/matrix.hpp"

namespace approxai {

enum class RowOp { fft, ifft, poly };

struct WorkPlan {
  std::size_t workers = 1;
  RowOp op = RowOp::fft;
  /// Stage levels for fft/ifft.
  LevelSchedule schedule;
  /// Multiplier level for poly.
  ApproxLevel level = ApproxLevel::exact();
  /// Left operand of the per-row matrix-vector product for poly.
  Matrix<double> poly_operator;
};

struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  [[nodiscard]] std::size_t size() const noexcept { return end - begin; }
};

/// Contiguous blocks: the first (rows mod workers) blocks hold one extra row.
[[nodiscard]] inline std::vector<RowRange> partition_rows(std::size_t rows, std::size_t workers) {
  if (workers == 0) throw Error(Errc::invalid_argument, "worker count must be at least 1");
  std::vector<RowRange> ranges(workers);
  const std::size_t base = rows / workers;
  const std::size_t extra = rows % workers;
  std::size_t start = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t len = base + (w < extra ? 1 : 0);
    ranges[w] = {start, start + len};
    start += len;
  }
  return ranges;
}

/// Runs body(range, ledger) for every non-empty range, one thread per range,
/// then merges the per-worker ledgers into `ledger`. The first worker
/// exception (by worker index) is rethrown after all threads join.
template <typename Body>
void run_partitioned(std::size_t items, std::size_t workers, EnergyLedger& ledger, Body&& body) {
  const auto ranges = partition_rows(items, workers);
  std::vector<EnergyLedger> ledgers(ranges.size(), ledger.empty_copy());
  std::vector<std::exception_ptr> errors(ranges.size());
  auto task = [&](std::size_t w) {
    try {
      body(ranges[w], ledgers[w]);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  {
    std::vector<std::jthread> threads;
    for (std::size_t w = 1; w < ranges.size(); ++w) {
      if (ranges[w].size() > 0) threads.emplace_back(task, w);
    }
    if (!ranges.empty() && ranges[0].size() > 0) task(0);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (const auto& l : ledgers) ledger.merge(l);
}

/// Applies `fn(row, ledger) -> std::vector<Out>` to every row in parallel,
/// concatenates the outputs in row order and returns the transpose.
template <typename Out, typename In, typename Fn>
[[nodiscard]] Matrix<Out> op_accel_rows(const Matrix<In>& x, std::size_t workers, Fn&& fn,
                                        EnergyLedger& ledger) {
  if (x.rows() == 0 || x.cols() == 0) throw Error(Errc::empty_matrix, "op_accel on an empty matrix");
  std::vector<std::vector<Out>> rows(x.rows());
  run_partitioned(x.rows(), workers, ledger, [&](RowRange range, EnergyLedger& local) {
    for (std::size_t r = range.begin; r < range.end; ++r) rows[r] = fn(x.row(r), local);
  });
  const std::size_t width = rows.front().size();
  Matrix<Out> assembled(x.rows(), width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) throw Error(Errc::shape_mismatch, "row outputs differ in length");
    std::copy(rows[r].begin(), rows[r].end(), assembled.row(r).begin());
  }
  return assembled.transposed();
}

/// Row-wise approximate FFT or IFFT (plan.op must be fft or ifft). Input is
/// M x N with N a power of two; output is N x M.
[[nodiscard]] inline Matrix<Complex16> op_accel(const Matrix<Complex16>& x, const WorkPlan& plan,
                                                EnergyLedger& ledger) {
  if (plan.op == RowOp::poly) {
    throw Error(Errc::invalid_argument, "poly operates on real matrices");
  }
  if (x.rows() == 0 || x.cols() == 0) throw Error(Errc::empty_matrix, "op_accel on an empty matrix");
  detail::check_schedule(x.cols(), plan.schedule);
  const bool inverse = plan.op == RowOp::ifft;
  return op_accel_rows<Complex16>(
      x, plan.workers,
      [&](std::span<const Complex16> row, EnergyLedger& local) {
        const ComplexSignal signal = ComplexSignal::from_row(row);
        const ComplexSignal out = inverse ? ax_ifft(signal, plan.schedule, local)
                                          : ax_fft(signal, plan.schedule, local);
        std::vector<Complex16> values(out.size());
        for (std::size_t i = 0; i < out.size(); ++i) values[i] = out.at(i);
        return values;
      },
      ledger);
}

/// Row-wise matrix-vector product with plan.poly_operator, every scalar
/// product through the split-limb approximate multiplier at plan.level and
/// accumulated in double in ascending column order. Input is M x N with
/// N == poly_operator.cols(); output is poly_operator.rows() x M.
[[nodiscard]] inline Matrix<double> op_accel(const Matrix<double>& x, const WorkPlan& plan,
                                             EnergyLedger& ledger) {
  if (plan.op != RowOp::poly) {
    throw Error(Errc::invalid_argument, "real matrices support only the poly operation");
  }
  if (x.rows() == 0 || x.cols() == 0) throw Error(Errc::empty_matrix, "op_accel on an empty matrix");
  const Matrix<double>& op = plan.poly_operator;
  if (op.cols() != x.cols() || op.rows() == 0) {
    throw Error(Errc::shape_mismatch, "poly operator is " + std::to_string(op.rows()) + "x" +
                                          std::to_string(op.cols()) + " but rows have length " +
                                          std::to_string(x.cols()));
  }
  return op_accel_rows<double>(
      x, plan.workers,
      [&](std::span<const double> row, EnergyLedger& local) {
        std::vector<double> out(op.rows(), 0.0);
        for (std::size_t i = 0; i < op.rows(); ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < row.size(); ++j) {
            acc += approx_multiply_split(op(i, j), row[j], plan.level, local);
          }
          out[i] = acc;
        }
        return out;
      },
      ledger);
}

}  // namespace approxai
