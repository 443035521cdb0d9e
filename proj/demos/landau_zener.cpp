// |S_21| of the two-level tanh sweep against the complex-WKB prediction,
// over a range of eps.

#include <cstdio>

#include "cwkb/cwkb.hpp"

using namespace cwkb;

int main(int argc, char** argv) {
    const std::string path = argc > 1 ? argv[1] : std::string(CWKB_MODEL_DIR) + "/adiabatic2.json";
    Model m = load_model(path);
    const double E = 1.0;

    EigenFrame f = kato_transport(m, E);
    WkbPrediction p = wkb_element(m, E, 0, 1);
    std::printf("branch point z0 = %.6f%+.6fi, Im action = %.6f\n", p.factors.front().bp.z0.real(), p.factors.front().bp.z0.imag(),
                p.total_action.imag());
    std::printf("%8s %14s %14s %12s\n", "eps", "|S21|", "WKB", "ratio - 1");
    std::vector<double> eps{0.1, 0.07, 0.05, 0.035, 0.025, 0.02}, mags;
    for (double e : eps) {
        ScatteringRecord r = s_matrix(f, e);
        mags.push_back(std::abs(r.S(1, 0)));
        std::printf("%8.4f %14.6e %14.6e %12.2e\n", e, mags.back(), p.magnitude(e), std::abs(r.S(1, 0) / p.value(e)) - 1.0);
    }
    DecayRateFit fit = decay_rate_fit(eps, mags);
    std::printf("fitted rate %.6f\n", fit.rate);
}
