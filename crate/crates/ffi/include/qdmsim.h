#ifndef QDMSIM_H
#define QDMSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum QdmStatus {
  QDM_OK = 0,
  // A pointer argument was null.
  QDM_ERR_NULL = 1,
  // Out-of-range or malformed argument.
  QDM_ERR_INVALID_ARGUMENT = 2,
  // Configuration text could not be parsed or validated.
  QDM_ERR_CONFIG = 3,
  // A numerical routine failed (non-convergence, positivity loss, ...).
  QDM_ERR_NUMERIC = 4,
  // Output buffer too small.
  QDM_ERR_BUFFER_TOO_SMALL = 5,
  QDM_ERR_IO = 6,
  // A Rust panic was caught at the boundary.
  QDM_ERR_PANIC = 7,
} QdmStatus;

// Charge sector selector.
typedef enum QdmSector {
  QDM_ONE_ELECTRON = 1,
  QDM_TWO_ELECTRON_SINGLET = 2,
} QdmSector;

// Opaque handle: geometry, device model and phonon tables for one tunnel coupling.
typedef struct QdmDevice QdmDevice;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *qdm_version(void);

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length in bytes.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
uintptr_t qdm_last_error_message(char *buf, uintptr_t len);

// Creates a device with default material parameters for tunnel coupling `t_e` (meV).
//
// # Safety
// `out` must be a valid pointer to a handle slot.
enum QdmStatus qdm_device_new(enum QdmSector sector, double t_e, struct QdmDevice **out);

// Creates a device from TOML configuration text (same schema as the command line tool).
//
// # Safety
// `config_toml` must be a NUL-terminated string; `out` a valid handle slot.
enum QdmStatus qdm_device_new_from_config(const char *config_toml,
                                          enum QdmSector sector,
                                          double t_e,
                                          struct QdmDevice **out);

// Releases a handle; null is ignored.
//
// # Safety
// `dev` must come from a `qdm_device_new*` call and not be used afterwards.
void qdm_device_free(struct QdmDevice *dev);

// Tunnel coupling (meV), dipole length (nm) and barrier width (nm) of the device.
//
// # Safety
// All pointers must be valid.
enum QdmStatus qdm_device_geometry(const struct QdmDevice *dev,
                                   double *t_e,
                                   double *dipole_length,
                                   double *barrier_width);

// Coulomb elements V_BB, V_BT, V_TT in meV written to `out[0..3]`.
//
// # Safety
// `out` must point to three writable doubles.
enum QdmStatus qdm_device_coulomb(const struct QdmDevice *dev, double *out);

// Eigenvalues (meV, ascending) of the sector Hamiltonian at field `field` (V/nm).
//
// # Safety
// `energies` must point to `len` writable doubles.
enum QdmStatus qdm_spectrum(const struct QdmDevice *dev,
                            double field,
                            double *energies,
                            uintptr_t len);

// Runs one switching protocol at speed `v` (V/ps) and temperature (K).
// Final eigenbasis populations go to `populations[0..dim]`, the target-state
// population to `fidelity`.
//
// # Safety
// `populations` must point to `len` writable doubles; `fidelity` must be valid.
enum QdmStatus qdm_switch(const struct QdmDevice *dev,
                          double temperature,
                          double v,
                          int dissipation,
                          double *populations,
                          uintptr_t len,
                          double *fidelity);

// |t_e| (meV) of the default-material geometry with barrier width `w` (nm).
//
// # Safety
// `t_e` must be a valid pointer.
enum QdmStatus qdm_tunnel_coupling_for_barrier(double w, double *t_e);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QDMSIM_H */
