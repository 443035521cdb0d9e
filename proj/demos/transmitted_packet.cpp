// The exponentially small packet that bo2 sends into the second mode:
// profile at the optimal energy, then the leading term at a few times.

#include <cstdio>

#include "cwkb/cwkb.hpp"

using namespace cwkb;

int main(int argc, char** argv) {
    const double eps = argc > 1 ? std::atof(argv[1]) : 0.02;
    Model m = load_model(std::string(CWKB_MODEL_DIR) + "/bo2.json");
    EnergyDensity Q = EnergyDensity::of(m);
    TransitionProfile p = transition_profile(m, Q, 0);

    std::printf("mode %d -> %d\n", p.j + 1, p.n + 1);
    std::printf("E* = %.8f  k* = %.8f  alpha(E*) = %.8f\n", p.E_star, p.k_star, p.alpha_star);
    std::printf("lambda1 = %.6f%+.6fi  lambda2 = %.6f%+.6fi\n", p.lambda1.real(), p.lambda1.imag(), p.lambda2.real(), p.lambda2.imag());
    std::printf("exp(-alpha/eps) = %.3e at eps = %g\n\n", std::exp(-p.alpha_star / eps), eps);

    std::printf("%8s %12s %12s %14s %12s\n", "t", "center", "width", "L2 norm", "vs Gaussian");
    for (double t : {0.0, 50.0, 100.0, 200.0}) {
        const auto x = packet_grid(p, eps, t);
        WaveField L = leading_term(p, Q, eps, t, x);
        WaveField G = gaussian_closed_form(p, Q, eps, t, x);
        std::printf("%8.1f %12.4f %12.4f %14.6e %12.2e\n", t, -p.dE_dk * t - p.lambda1.real(), gaussian_width(p, eps, t), L.norm(),
                    relative_distance(L, G));
    }

    // Compare with the free wave built from the numerical c_n(+inf, E).
    const auto x = packet_grid(p, eps, 0.0);
    SynthesisOptions opt;
    opt.incoming = p.j;
    WaveField A = asymptotic_wave(m, Q, eps, 0.0, 1, p.n, x, opt);
    std::printf("\nleading term vs numerical free wave at t = 0: relative L2 %.4f\n", relative_distance(leading_term(p, Q, eps, 0.0, x), A));
}
