#pragma once

// Thin wrappers over Boost.Odeint for complex state vectors.

#include <complex>
#include <functional>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "cwkb/error.hpp"

namespace cwkb::ode {

using State = std::vector<std::complex<double>>;
using System = std::function<void(const State&, State&, double)>;
using Observer = std::function<void(const State&, double)>;

/// Dopri5 with dense output; `obs` fires at each requested time (ascending).
inline std::size_t integrate_dense(const System& sys, State& y, const std::vector<double>& times, double atol, double rtol,
                                   const Observer& obs, double dt0 = 1e-3) {
    namespace oi = boost::numeric::odeint;
    if (times.empty()) return 0;
    try {
        auto stepper = oi::make_dense_output(atol, rtol, oi::runge_kutta_dopri5<State>());
        return oi::integrate_times(stepper, std::ref(sys), y, times.begin(), times.end(), dt0, std::ref(obs));
    } catch (const std::exception& e) {
        throw Error(ErrorCode::StepUnderflow, std::string("dense integration failed: ") + e.what());
    }
}

/// Fehlberg 7(8) with step control, stepping exactly onto each requested time.
inline std::size_t integrate_rkf78(const System& sys, State& y, const std::vector<double>& times, double atol, double rtol,
                                   const Observer& obs, double dt0 = 1e-3, double max_dt = 0.0) {
    namespace oi = boost::numeric::odeint;
    if (times.empty()) return 0;
    try {
        auto stepper = oi::make_controlled(atol, rtol, max_dt, oi::runge_kutta_fehlberg78<State>());
        return oi::integrate_times(stepper, std::ref(sys), y, times.begin(), times.end(), dt0, std::ref(obs));
    } catch (const std::exception& e) {
        throw Error(ErrorCode::StepUnderflow, std::string("rkf78 integration failed: ") + e.what());
    }
}

/// Fehlberg 7(8) adaptive integration from t0 to t1; `obs` fires after every
/// accepted step (used to refresh continuation labels along complex paths).
inline std::size_t integrate_adaptive(const System& sys, State& y, double t0, double t1, double atol, double rtol,
                                      const Observer& obs, double dt0, double max_dt) {
    namespace oi = boost::numeric::odeint;
    try {
        auto stepper = oi::make_controlled(atol, rtol, max_dt, oi::runge_kutta_fehlberg78<State>());
        return oi::integrate_adaptive(stepper, std::ref(sys), y, t0, t1, dt0, std::ref(obs));
    } catch (const std::exception& e) {
        throw Error(ErrorCode::StepUnderflow, std::string("adaptive integration failed: ") + e.what());
    }
}

}  // namespace cwkb::ode
