#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "fmfusion/tensor.hpp"

namespace fmf {

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Receives the gradient of the op's output and accumulates into its inputs.
using BackwardFn = std::function<void(std::span<const double> grad_out)>;

/// Ordered record of differentiable operations executed while the tape is
/// active on the current thread (see TapeScope).
///
/// A tape supports exactly one backward pass. Calling backward again without
/// reset() throws, since the intermediate gradients have already been spent.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void backward(const Tensor& loss);
  void reset();

  std::size_t size() const noexcept { return records_.size(); }
  std::size_t visited() const noexcept { return visited_; }
  bool consumed() const noexcept { return consumed_; }
  std::uint64_t id() const noexcept { return id_; }

  /// Tape active on this thread, or nullptr.
  static Tape* current() noexcept;

  /// Total number of backward records ever created in this process.
  static std::uint64_t records_created() noexcept;

  /// Appends an op. Called by op implementations through record_op().
  void push(std::shared_ptr<detail::TensorImpl> output, BackwardFn fn);

 private:
  struct Record {
    std::shared_ptr<detail::TensorImpl> output;
    BackwardFn backward;
  };
  std::vector<Record> records_;
  std::uint64_t id_;
  std::size_t visited_ = 0;
  bool consumed_ = false;
};

/// Makes `tape` the active tape on this thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording on this thread.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

/// Whether an op over `inputs` should be recorded: a tape is active and at
/// least one input requires a gradient.
bool should_record(std::initializer_list<const Tensor*> inputs);

/// Marks `output` as produced by the active tape and appends `fn`.
/// Precondition: should_record() returned true for the op's inputs.
void record_op(Tensor& output, BackwardFn fn);

}  // namespace fmf
