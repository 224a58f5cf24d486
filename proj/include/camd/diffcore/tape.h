#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "camd/diffcore/tensor.h"

namespace camd::diff {

// Ordered record of executed operations. Each entry is the adjoint of one
// operation; it reads its outputs' gradients and accumulates into its inputs'.
class Tape {
 public:
  using Adjoint = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(Adjoint adjoint) { entries_.push_back(std::move(adjoint)); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Replays adjoints in reverse execution order, each exactly once, then
  // discards them along with the references they hold.
  void replay();

  void clear() { entries_.clear(); }

 private:
  std::vector<Adjoint> entries_;
};

// Thread-local tape that operations record onto. nullptr means inference mode:
// nothing is recorded and results never require grad.
Tape* active_tape();

// Installs a tape as the active one for the current thread for the lifetime of
// the scope. Scopes nest.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording for the current thread (evaluation, finite differences).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

// Seeds d(loss)/d(loss) = 1 and replays the active tape. Gradients accumulate
// additively; callers zero them between steps.
template <typename T>
void backward(Tensor<T>& loss);

}  // namespace camd::diff
