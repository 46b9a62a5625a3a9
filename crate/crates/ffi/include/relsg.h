/* C interface to the relsg relativistic Stern-Gerlach toolkit.
 * Generated by cbindgen; do not edit by hand. */

#ifndef RELSG_H
#define RELSG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum RelsgStatus {
  /**
   * Success.
   */
  RelsgStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  RelsgStatus_NullPointer = 1,
  /**
   * The inputs describe an invalid configuration (bad velocity, axis,
   * field, or parameter value).
   */
  RelsgStatus_InvalidConfig = 2,
  /**
   * The inputs are structurally valid but outside the mathematical
   * domain (off-shell momentum, mismatched momenta, rank-deficient
   * systems, ...).
   */
  RelsgStatus_Domain = 3,
  /**
   * A numerical procedure failed (integration blow-up, step budget).
   */
  RelsgStatus_Numerical = 4,
} RelsgStatus;

/**
 * Opaque Stern-Gerlach apparatus configuration.
 */
typedef struct RelsgConfig RelsgConfig;

/**
 * Opaque momentum-labeled 2-spinor state.
 */
typedef struct RelsgSpinor RelsgSpinor;

/**
 * Field-slab and integrator parameters for `relsg_simulate`.
 */
typedef struct RelsgSimParams {
  /**
   * Device-frame magnitude slope.
   */
  double gradient;
  /**
   * Unit gradient direction (device frame).
   */
  double gradient_dir[3];
  /**
   * Unit beam axis of the slab (device frame).
   */
  double slab_axis[3];
  /**
   * Slab extent along the axis.
   */
  double slab_min;
  double slab_max;
  /**
   * Smooth ramp width at the slab edges.
   */
  double edge_width;
  /**
   * Slab origin, device frame.
   */
  double origin[3];
  /**
   * Electric charge.
   */
  double charge;
  /**
   * Magnetic-moment coupling.
   */
  double coupling;
  /**
   * Detector coordinate along the slab axis.
   */
  double detector_plane;
  /**
   * Initial event (t, x, y, z).
   */
  double x0[4];
  /**
   * Proper-time step.
   */
  double dtau;
  /**
   * Step budget.
   */
  uintptr_t max_steps;
  /**
   * Separation threshold for the `resolved` flag.
   */
  double packet_width;
} RelsgSimParams;

/**
 * Per-branch outcome of `relsg_simulate`.
 */
typedef struct RelsgBranchOutcome {
  /**
   * +1.0 or -1.0.
   */
  double branch;
  /**
   * Born weight of the branch.
   */
  double weight;
  /**
   * Transverse arrival position relative to the free ray.
   */
  double deflection[3];
  /**
   * Proper time at the detector plane.
   */
  double arrival_tau;
  /**
   * Drift of the conserved ray scalar over the run.
   */
  double conservation_drift;
} RelsgBranchOutcome;

/**
 * Outcome report of `relsg_simulate`.
 */
typedef struct RelsgReport {
  struct RelsgBranchOutcome plus;
  struct RelsgBranchOutcome minus;
  /**
   * Distance between the two arrival spots.
   */
  double separation;
  /**
   * 1 if the separation exceeds the packet width, else 0.
   */
  int32_t resolved;
  /**
   * Worst |div B| encountered, a diagnostic of the idealized profile.
   */
  double maxwell_violation;
} RelsgReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the most recent error message on this thread into `buf`
 * (NUL-terminated, truncated to `len` bytes) and returns the full
 * message length including the NUL. `buf` may be null to query the
 * required size.
 */
uintptr_t relsg_last_error(char *buf, uintptr_t len);

/**
 * Creates a configuration from a device 4-velocity `v`, a unit spacelike
 * field direction `b` orthogonal to `v`, and the device-frame magnitude.
 */
enum RelsgStatus relsg_config_new(const double *v,
                                  const double *b,
                                  double magnitude,
                                  struct RelsgConfig **out);

/**
 * Creates a configuration for an apparatus at rest with field along the
 * 3-direction `dir` (need not be normalized).
 */
enum RelsgStatus relsg_config_device_rest(const double *dir,
                                          double magnitude,
                                          struct RelsgConfig **out);

/**
 * Releases a configuration handle.
 */
void relsg_config_free(struct RelsgConfig *cfg);

/**
 * Creates a spinor state from an amplitude (re0, im0, re1, im1), an
 * on-shell momentum `p`, and the mass.
 */
enum RelsgStatus relsg_spinor_new(const double *psi,
                                  const double *p,
                                  double mass,
                                  struct RelsgSpinor **out);

/**
 * Releases a spinor handle.
 */
void relsg_spinor_free(struct RelsgSpinor *s);

/**
 * I_u norm of the state.
 */
enum RelsgStatus relsg_spinor_norm(const struct RelsgSpinor *s, double *out);

/**
 * Expectation of the covariant Stern-Gerlach observable in the state.
 */
enum RelsgStatus relsg_expectation(const struct RelsgConfig *cfg,
                                   const struct RelsgSpinor *state,
                                   double *out);

/**
 * Measurement axis `n` (4-vector) and rest-frame magnetic field `b_rf`
 * for a particle of momentum `p` and the given mass. Either output may
 * be null if not wanted.
 */
enum RelsgStatus relsg_direction(const struct RelsgConfig *cfg,
                                 const double *p,
                                 double mass,
                                 double *n_out,
                                 double *b_rf_out);

/**
 * Expectations of the three candidate spin operators in the state:
 * the covariant operator and the two rival constructions.
 */
enum RelsgStatus relsg_compare(const struct RelsgConfig *cfg,
                               const struct RelsgSpinor *state,
                               double *sg_out,
                               double *sprime_out,
                               double *sdoubleprime_out);

/**
 * Predicted measurement mean for a rest-frame Bloch vector `r` measured
 * by the apparatus on a particle of momentum `p` and the given mass.
 */
enum RelsgStatus relsg_predict_mean(const double *r,
                                    const struct RelsgConfig *cfg,
                                    const double *p,
                                    double mass,
                                    double *out);

/**
 * Splits the state on the apparatus eigenbasis and integrates both
 * branches through the field slab to the detector plane.
 */
enum RelsgStatus relsg_simulate(const struct RelsgConfig *cfg,
                                const struct RelsgSpinor *state,
                                const struct RelsgSimParams *params,
                                struct RelsgReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELSG_H */
