#include "conceptgcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "conceptgcn/errors.hpp"

namespace conceptgcn {
namespace {

double evaluate(const ScalarFunction& f, const DenseMatrix& point) {
    Tape tape;
    const NodeId p = tape.parameter(point);
    const NodeId loss = f(tape, p);
    const DenseMatrix& v = tape.value(loss);
    if (v.rows() != 1 || v.cols() != 1) {
        throw ContractError("finite_diff_check: function must return a 1x1 value");
    }
    return v(0, 0);
}

}  // namespace

double finite_diff_check(const ScalarFunction& f, const DenseMatrix& point, double epsilon) {
    if (!(epsilon > 0.0)) throw ContractError("finite_diff_check: epsilon must be positive");

    Tape tape;
    const NodeId p = tape.parameter(point);
    tape.backward(f(tape, p));
    const DenseMatrix analytic = tape.grad(p);

    double worst = 0.0;
    DenseMatrix probe = point;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double original = probe.values()[i];
        double up = 0.0, down = 0.0;
        try {
            probe.values()[i] = original + epsilon;
            up = evaluate(f, probe);
            probe.values()[i] = original - epsilon;
            down = evaluate(f, probe);
        } catch (const NumericError&) {
            throw NumericError("finite_diff_check: non-finite value at perturbed entry " +
                               std::to_string(i));
        }
        probe.values()[i] = original;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError("finite_diff_check: non-finite value at perturbed entry " +
                               std::to_string(i));
        }
        const double numeric = (up - down) / (2.0 * epsilon);
        const double a = analytic.values()[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    return worst;
}

}  // namespace conceptgcn
