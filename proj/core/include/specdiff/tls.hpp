#pragma once

#include <span>
#include <vector>

#include "specdiff/types.hpp"

// Fixed-detuning physics of the driven two-level system: closed-form steady
// state, power-broadened linewidth, and the intensity correlation g2(tau),
// plus an independent numerical cross-check that integrates the optical Bloch
// equations and applies the quantum regression theorem.

namespace specdiff {

// Steady-state excited population at detuning delta = laser - transition
// [rad/s]:  rho_ee = (1/2) Omega^2 T1/T2 / (delta^2 + 1/T2^2 + Omega^2 T1/T2).
// Even and monotone nonincreasing in |delta|; in [0, 1/2).
double steady_state_population(const DriveParams& drive,
                               const EmitterParams& emitter, double detuning);

// Power-broadened homogeneous FWHM in Hz: sqrt(1 + S)/(pi*T2), S = O^2 T1 T2.
double homogeneous_fwhm(const DriveParams& drive, const EmitterParams& emitter);

// Closed-form g2 at fixed detuning:
//   g2(tau) = 1 - exp(-gamma*tau) * (cos(x) + gamma*tau*sinc(x)),
//   x = sqrt(Omega^2 + delta^2) * tau,  gamma = (T1 + T2)/(2 T1 T2).
// Exact when the population and coherence decay rates coincide (T2 = T1);
// elsewhere it is the standard approximation whose error grows with
// |1/T1 - 1/T2| and with detuning (quantified by the master-equation
// cross-check below).  Negative tau is folded by symmetry.
double g2_homogeneous(double tau, double detuning, const DriveParams& drive,
                      const EmitterParams& emitter);

// Damping-envelope bound used as a property check for the closed form:
// |g2(tau) - 1| <= exp(-gamma*tau)*(1 + gamma/sqrt(Omega^2 + delta^2)).
double g2_envelope_bound(double tau, double detuning, const DriveParams& drive,
                         const EmitterParams& emitter);

// Bloch steady state (u, v, w) mapped to BlochState, from the exact 3x3
// linear solve of the driven, damped fixed point.
BlochState bloch_steady_state(const DriveParams& drive,
                              const EmitterParams& emitter, double detuning);

struct MasterEquationDiagnostics {
  double step = 0.0;          // final RK4 step after the convergence sweep [s]
  int halvings = 0;           // number of step halvings performed
  long steps = 0;             // RK4 steps taken for the final curve
  double steady_residual = 0.0; // ||d rho/dt|| at the accepted steady state
  bool steady_from_solve = false; // true if the exact solve replaced the
                                  // integrated steady state
};

// Independent g2 oracle: integrate the optical Bloch equations to steady
// state, reset (rho_ee = 0, coherence = 0) as after a photon emission, evolve
// the reset state, and normalize the regrowing population by its steady-state
// value.  Fixed-step RK4 with step = min(T1, T2, 2*pi/sqrt(O^2+d^2))/50,
// halving until the curve changes by < 1e-6.  Physicality of the state is
// checked at every step.  For rabi = 0 the emission rate vanishes and the
// regression limit equals the Omega -> 0 limit of the closed form, which is
// returned directly.
std::vector<double> integrate_master_equation(
    const DriveParams& drive, const EmitterParams& emitter, double detuning,
    std::span<const double> tau_grid,
    MasterEquationDiagnostics* diag = nullptr);

} // namespace specdiff
