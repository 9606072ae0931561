#pragma once

// Thin wrapper over GSL's nmsimplex2 minimizer.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace tracelens::detail {

struct NelderMeadResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
};

inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    const std::vector<double>& start, double step, int max_iterations,
                                    double size_tolerance = 1e-6) {
    const std::size_t n = start.size();
    struct Ctx {
        const std::function<double(const std::vector<double>&)>* f;
        std::vector<double> buf;
    } ctx{&f, std::vector<double>(n)};

    gsl_multimin_function fn;
    fn.n = n;
    fn.params = &ctx;
    fn.f = [](const gsl_vector* v, void* p) {
        auto* c = static_cast<Ctx*>(p);
        for (std::size_t i = 0; i < c->buf.size(); ++i) c->buf[i] = gsl_vector_get(v, i);
        const double r = (*c->f)(c->buf);
        return std::isfinite(r) ? r : std::numeric_limits<double>::max() / 4;
    };

    gsl_vector* x = gsl_vector_alloc(n);
    gsl_vector* ss = gsl_vector_alloc(n);
    for (std::size_t i = 0; i < n; ++i) {
        gsl_vector_set(x, i, start[i]);
        gsl_vector_set(ss, i, step);
    }
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    gsl_multimin_fminimizer_set(s, &fn, x, ss);
    for (int it = 0; it < max_iterations; ++it) {
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), size_tolerance) == GSL_SUCCESS) break;
    }
    NelderMeadResult r;
    r.x.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.x[i] = gsl_vector_get(s->x, i);
    r.value = s->fval;
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(ss);
    gsl_vector_free(x);
    return r;
}

/// Disables GSL's abort-on-error handler once per process.
inline void quiet_gsl() {
    static const bool done = [] {
        gsl_set_error_handler_off();
        return true;
    }();
    (void)done;
}

}  // namespace tracelens::detail
