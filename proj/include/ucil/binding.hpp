#pragma once

#include <vector>

#include "ucil/tape.hpp"

namespace ucil {

/// Pairs parameter storage with its tape leaf for one forward/backward pass.
/// A non-tracking binding registers parameters as constants, which is the
/// no-grad inference path.
class Binding {
 public:
  struct Entry {
    Matrix* param;
    Var var;
  };

  explicit Binding(Tape& tape, bool track = true) : tape_(&tape), track_(track) {}

  Var bind(Matrix& m) {
    if (!track_) return tape_->constant(m);
    Var v = tape_->leaf(m);
    entries_.push_back(Entry{&m, v});
    return v;
  }

  bool tracking() const { return track_; }
  const std::vector<Entry>& entries() const { return entries_; }
  Tape& tape() { return *tape_; }

 private:
  Tape* tape_;
  bool track_;
  std::vector<Entry> entries_;
};

}  // namespace ucil
