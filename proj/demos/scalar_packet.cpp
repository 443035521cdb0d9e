// scalar_tanh has the exact solution f(t + ln cosh x).  Synthesize it from
// stationary solutions and print the error and the glued approximation.

#include <cstdio>

#include "cwkb/cwkb.hpp"

using namespace cwkb;

int main() {
    Model m = load_model(std::string(CWKB_MODEL_DIR) + "/scalar_tanh.json");
    EnergyDensity Q = EnergyDensity::of(m);
    const auto x = linspace(-40.0, 40.0, 1601);
    const std::vector<double> times{-20.0, -5.0, 0.0, 5.0};
    Synthesis s = synthesize(m, Q, 1.0, times, x);

    std::printf("%6s %12s %14s %14s\n", "t", "norm", "max error", "|exact-glued|");
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        double err = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double z = times[ti] + std::log(std::cosh(x[i]));
            const cplx f = std::sqrt(2 * std::numbers::pi) * std::exp(-I1 * z) * std::exp(-0.5 * z * z);
            err = std::max(err, std::abs(s.exact[ti].values(Eigen::Index(i), 0) - f));
        }
        std::printf("%6.1f %12.6f %14.3e %14.3e\n", times[ti], s.exact[ti].norm(), err, l2_distance(s.exact[ti], s.glued(ti)));
    }
}
