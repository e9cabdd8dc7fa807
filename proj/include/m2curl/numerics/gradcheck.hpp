#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "m2curl/numerics/tape.hpp"

namespace m2curl {

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

struct GradCheckReport {
    double tolerance = 0.0;
    double max_rel_error = 0.0;
    std::vector<GradCheckEntry> entries;
    std::vector<std::string> failures;

    bool ok() const { return failures.empty(); }

    std::string summary() const {
        std::ostringstream os;
        os << "max rel. error " << max_rel_error << " (tolerance " << tolerance << ")";
        if (!failures.empty()) {
            os << "; failing:";
            for (const auto& f : failures) os << ' ' << f;
        }
        return os.str();
    }

    void require_ok() const {
        if (!ok()) throw NumericError("gradient check failed: " + summary());
    }
};

/// Relative error with a floor on the denominator so that two tiny values agree.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares tape gradients of `loss_fn` against central finite differences for
/// every entry of every parameter in `params`.
///
/// `loss_fn(Tape<double>&) -> Var` must rebuild the whole computation from the
/// current parameter values each time it is called.
template <typename LossFn>
GradCheckReport grad_check(LossFn&& loss_fn, const ParamRefs<double>& params, double tolerance,
                           double h = 1e-5) {
    zero_grads(params);
    {
        Tape<double> tape;
        Var loss = loss_fn(tape);
        tape.backward(loss);
    }
    auto evaluate = [&]() {
        Tape<double> tape;
        return tape.value(loss_fn(tape)).item();
    };

    GradCheckReport report;
    report.tolerance = tolerance;
    for (auto* p : params) {
        GradCheckEntry entry;
        entry.name = p->name;
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + h;
            const double up = evaluate();
            p->value[i] = saved - h;
            const double down = evaluate();
            p->value[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = p->grad[i];
            const double err = relative_error(analytic, numeric);
            if (i == 0 || err > entry.max_rel_error) {
                entry.max_rel_error = err;
                entry.worst_index = i;
                entry.analytic = analytic;
                entry.numeric = numeric;
            }
        }
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        if (entry.max_rel_error > tolerance) report.failures.push_back(entry.name);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace m2curl
