#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace toolpose {

struct GradcheckConfig {
    int trials = 100;
    std::uint64_t seed = 0;
    int resolution = 64;
    double step = 1e-5;  // rad for omega and q, m for t
    double rel_tol = 1e-3;
    double abs_floor = 1e-8;
};

struct GradcheckComponent {
    double analytic = 0.0;
    double numeric = 0.0;
    double error = 0.0;  // see gradcheck_error
};

struct GradcheckInstance {
    /// omega x, y, z; t x, y, z; q1, q2, q3.
    std::array<GradcheckComponent, 9> components;
    double loss = 0.0;
    bool pass = true;
};

struct GradcheckReport {
    std::vector<GradcheckInstance> instances;
    /// Draws rejected because a finite-difference probe changed the depth order.
    int resampled = 0;
    int failures = 0;
    double max_error = 0.0;
    double seconds = 0.0;

    bool pass() const { return failures == 0 && !instances.empty(); }
};

/// |a - n| / max(|a|, |n|, floor).
double gradcheck_error(double analytic, double numeric, double floor);

/// Name of component i in GradcheckInstance::components.
const char* gradcheck_component_name(int i);

/// Compares the analytic (omega, t, q) gradient of the combined loss against a
/// fourth-order central difference. Each scene jitters the default tool's
/// appearance and draws a random state; the target is rendered from a perturbed
/// copy of that state. The renderer runs without the alpha cutoff so the loss is
/// smooth in every parameter.
GradcheckReport run_gradcheck(const GradcheckConfig& cfg);

}  // namespace toolpose
