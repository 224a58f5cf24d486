#include "camd/diffcore/tape.h"

#include <numeric>
#include <sstream>

namespace camd::diff {

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << " x ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

void Tape::replay() {
  // Entries are moved out first so an adjoint can never observe a half-cleared tape.
  std::vector<Adjoint> entries = std::move(entries_);
  entries_.clear();
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) (*it)();
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

template <typename T>
void backward(Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward: root must be a scalar, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  Tape* tape = active_tape();
  if (tape == nullptr || !loss.requires_grad()) {
    throw ContractError("backward: loss was not produced on an active tape");
  }
  loss.grad()[0] += T(1);
  tape->replay();
}

template void backward<float>(Tensor<float>&);
template void backward<double>(Tensor<double>&);

}  // namespace camd::diff
