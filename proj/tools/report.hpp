#pragma once

// Output helpers for `export`: a 2-D PCA projection and the training-curve
// chart.

#include <string>

#include "conceptgcn/training.hpp"

namespace conceptgcn::cli {

// Rows projected onto the top `components` principal axes of the centred
// data. Each axis is signed so its largest-magnitude loading is positive.
DenseMatrix pca_project(const DenseMatrix& data, std::size_t components = 2);

// Loss and accuracy versus epoch, train and validation, as two panels.
std::string curves_svg(const MetricsLog& log, const std::string& title);

// Shortest text that reads back to the same double.
std::string format_double(double v);

// Quotes a CSV field when it needs it.
std::string csv_field(const std::string& s);

}  // namespace conceptgcn::cli
