#pragma once

#include "dynamix/trajectory.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace dynamix {

/// One benchmark ODE system: vector field, canonical parameters, integration
/// step, transient discard, and an initial-condition box inside the basin of
/// the catalog attractor.
struct SystemDef {
    std::string name;
    int dim = 0;
    std::map<std::string, double> params;
    double default_dt = 0.01;
    int transient_steps = 1000;
    std::vector<double> ic_lo; // initial-condition box, per dimension
    std::vector<double> ic_hi;
    // rhs(state, params, out_derivative)
    std::function<void(const double*, const std::map<std::string, double>&, double*)> rhs;

    void eval(const double* x, double* dxdt) const { rhs(x, params, dxdt); }
};

/// All registered benchmark systems, chaotic and cyclic.
const std::vector<SystemDef>& system_catalog();

/// Lookup by name; throws argument_error with the unknown name.
const SystemDef& find_system(const std::string& name);

/// Copy of a catalog system with parameter overrides ("rho=28,...").
SystemDef customize_system(const SystemDef& base, const std::map<std::string, double>& overrides);

/// Classic fixed-step 4th-order Runge-Kutta. Column 0 of the result is x0.
/// Throws divergence_error naming the step index if the state leaves the
/// finite domain.
Trajectory integrate_rk4(const SystemDef& system, const std::vector<double>& x0, double dt,
                         int n_steps);

/// Integrate from a seed-derived initial condition inside the system's IC
/// box, discard the transient, and return exactly n_steps columns. Pure
/// function of (system, seed, n_steps).
Trajectory simulate(const SystemDef& system, std::uint64_t seed, int n_steps);

/// Adds i.i.d. Gaussian noise per dimension with standard deviation
/// level * std(row). Rows with zero spread are left unchanged.
Trajectory add_noise(const Trajectory& traj, double level, std::uint64_t seed);

/// Shifts/scales each row to mean 0 and population std 1; returns the affine
/// parameters for the inverse transform. Rows with std below 1e-12 raise
/// degenerate_signal_error.
std::pair<Trajectory, Standardization> standardize(const Trajectory& traj);

/// Applies the stored affine parameters back onto standardized data.
Trajectory destandardize(const Trajectory& traj, const Standardization& s);

/// Training/evaluation corpus: equally shaped sequences plus the context
/// window geometry they were generated for.
struct Corpus {
    std::vector<Trajectory> sequences;
    int context_length = 0; // T_C
    int overlap = 0;        // window of overlap between context and unroll
    std::vector<std::string> provenance; // source system per sequence
};

struct CorpusParams {
    std::vector<std::string> systems;
    int sequences_per_system = 1;
    int t_seq = 550;
    int t_c = 500;
    int overlap = 50;
    double noise_level = 0.05;
    std::uint64_t seed = 0;
    int jobs = 1;
};

/// Simulates, noises, standardizes (per sequence), and collects windows from
/// every listed system. Lower-dimensional systems are zero-filled up to the
/// corpus dimension after standardization. Per-sequence seeds are derived
/// from (seed, system index, sequence index) so the result is independent of
/// the parallel schedule.
Corpus generate_corpus(const CorpusParams& params);

/// Same pipeline over explicit (possibly customized) system definitions;
/// params.systems is ignored.
Corpus generate_corpus(const std::vector<SystemDef>& systems, const CorpusParams& params);

} // namespace dynamix
