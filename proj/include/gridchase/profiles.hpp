#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridchase/grid.hpp"

namespace gridchase {

// Internal unit system: squared voltages in (kV)^2, power in MW / MVar,
// impedances in Ohm. These are mutually consistent: Ohm * MVar = (kV)^2.
// File formats carry SI (W / var); loaders convert.

/// Exogenous injection time series: net active power and exogenous reactive
/// power per branch bus.
struct InjectionProfile {
    int T = 0;
    double dt_s = 6.0;
    Matrix p_mw;      // T x n
    Matrix q_e_mvar;  // T x n
};

/// v_par(t) = R p(t) + X q_e(t) + v0 * 1, and its step differences w.
struct ExogenousTrace {
    Matrix v_par;     // T x n, (kV)^2
    Matrix w;         // (T-1) x n: w[t-1] = v_par(t) - v_par(t-1)
    double eta_hat = 0.0;  // max_t ||w(t)||_inf
};

/// Coordinate-wise rectangle containing every v_par row.
struct VparBox {
    Vector lo;
    Vector hi;
    bool contains(const Vector& v, double tol = 0.0) const;
};

struct Assumption1Report {
    bool ok = false;
    double worst = 0.0;  // eta_hat of the trace
    int argmax_t = -1;   // step index achieving the worst change
    std::string reason;  // empty when ok
};

struct Assumption3Report {
    double feasible_fraction = 0.0;
    int n_checked = 0;
    int n_feasible = 0;
};

/// CSV schema: header exactly `t,bus,p_w,q_e_var`, long format, every (t, bus)
/// cell present, bus ids 1..n, t ids 0..T-1. Values in W / var.
InjectionProfile load_profile(const std::string& path, double dt_s = 6.0);
void save_profile(const InjectionProfile& profile, const std::string& path);

struct SynthOptions {
    int n = 55;
    int T = 1000;
    double dt_s = 6.0;
    double smoothness = 1.0;      // scales all time variation; 0 => constant
    std::vector<int> pv_buses;    // 1-based bus ids with PV generation
    double pv_peak_mw = 0.35;     // midday bell peak per PV bus
    double load_mw = 0.10;        // per-bus mean consumption scale
    double jitter_mw = 0.004;     // random-walk step scale
    std::uint64_t seed = 0;
};

/// Deterministic synthetic day: diurnal load swing, a midday PV bell on the
/// PV buses, and a small reflected random walk. All time variation is
/// multiplied by `smoothness`.
InjectionProfile synth_profile(const SynthOptions& opt);

ExogenousTrace compute_trace(const SensitivityModel& model,
                             const InjectionProfile& profile, double v0);

VparBox vpar_box(const ExogenousTrace& trace, double inflation = 0.0);

/// Assumption check: eta_hat <= eta, and eta <= min_i (v_hi - v_lo)_i / 2
/// when voltage limits are supplied.
Assumption1Report check_assumption1(const ExogenousTrace& trace, double eta,
                                    const Vector* v_lo = nullptr,
                                    const Vector* v_hi = nullptr);

/// Monte Carlo feasibility check: for sampled (v_par in box) x (X in
/// X_samples), is there q_c in [q_lo, q_hi] with
/// X q_c + v_par in [v_lo + (eta+eps), v_hi - (eta+eps)]?
/// Box corners are always part of the sample (all corners when 2^n is small,
/// otherwise the all-lo/all-hi pair plus random corners).
Assumption3Report check_assumption3(const VparBox& box,
                                    const std::vector<Matrix>& X_samples,
                                    const Vector& q_lo, const Vector& q_hi,
                                    const Vector& v_lo, const Vector& v_hi,
                                    double eta, double epsilon, int n_mc,
                                    std::uint64_t seed);

}  // namespace gridchase
