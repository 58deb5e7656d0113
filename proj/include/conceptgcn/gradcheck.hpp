#pragma once

#include <functional>

#include "conceptgcn/tape.hpp"

namespace conceptgcn {

// Builds a scalar (1x1) loss on `tape` from the parameter node it is given.
using ScalarFunction = std::function<NodeId(Tape& tape, NodeId parameter)>;

// Compares the backward() gradient of f at `point` with central differences
// of step `epsilon`. Returns max over entries of |a - b| / max(|a|, |b|, 1e-8).
// Throws NumericError if f is not finite at a perturbed point.
double finite_diff_check(const ScalarFunction& f, const DenseMatrix& point, double epsilon);

}  // namespace conceptgcn
