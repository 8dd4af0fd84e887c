#pragma once

#include "hgul/autodiff.hpp"

namespace hgul::ad {

// Central-difference gradient checker. F builds a fresh scalar graph from a
// leaf tensor: Var f(Tape&, Var x). Returns the max over entries of
// |analytic - numeric| / max(1, |analytic|).
template <class F>
double check_gradients(F&& f, const Mat& x0, double eps = 1e-5) {
    Mat analytic;
    {
        Tape t;
        Var x = t.param(x0);
        Var loss = f(t, x);
        t.backward(loss);
        analytic = x->grad;
    }
    double worst = 0.0;
    Mat xp = x0;
    for (int i = 0; i < x0.rows(); ++i) {
        for (int j = 0; j < x0.cols(); ++j) {
            xp(i, j) = x0(i, j) + eps;
            Tape tp;
            double fp = f(tp, tp.param(xp))->value(0, 0);
            xp(i, j) = x0(i, j) - eps;
            Tape tm;
            double fm = f(tm, tm.param(xp))->value(0, 0);
            xp(i, j) = x0(i, j);
            double numeric = (fp - fm) / (2.0 * eps);
            double err = std::abs(analytic(i, j) - numeric) /
                         std::max(1.0, std::abs(analytic(i, j)));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace hgul::ad
