#include "fmfusion/tape.hpp"

#include <atomic>

namespace fmf {

namespace {

thread_local Tape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_records_created{0};
std::atomic<std::uint64_t> g_next_tape_id{1};

}  // namespace

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {}

Tape* Tape::current() noexcept { return g_active_tape; }

std::uint64_t Tape::records_created() noexcept {
  return g_records_created.load(std::memory_order_relaxed);
}

void Tape::push(std::shared_ptr<detail::TensorImpl> output, BackwardFn fn) {
  if (consumed_) {
    throw TapeError("recording onto a tape that has already run backward; call reset() first");
  }
  records_.push_back(Record{std::move(output), std::move(fn)});
  g_records_created.fetch_add(1, std::memory_order_relaxed);
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) {
    throw TapeError("backward called twice on the same tape without re-recording");
  }
  if (loss.numel() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  if (loss.impl().producer != id_) {
    throw TapeError("loss was not produced by operations recorded on this tape");
  }
  consumed_ = true;
  visited_ = 0;

  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    ++visited_;
    const auto& g = it->output->grad;
    if (g.empty()) continue;  // output does not reach the loss
    it->backward(g);
  }
}

void Tape::reset() {
  records_.clear();
  id_ = g_next_tape_id.fetch_add(1);
  visited_ = 0;
  consumed_ = false;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void record_op(Tensor& output, BackwardFn fn) {
  Tape* tape = g_active_tape;
  if (tape == nullptr) throw TapeError("record_op without an active tape");
  output.impl().requires_grad = true;
  output.impl().producer = tape->id();
  tape->push(output.handle(), std::move(fn));
}

}  // namespace fmf
