#ifndef QCD_QCD_H
#define QCD_QCD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(QCD_BUILDING_LIBRARY)
#    define QCD_API __declspec(dllexport)
#  else
#    define QCD_API __declspec(dllimport)
#  endif
#else
#  define QCD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qcd_status {
    QCD_OK = 0,
    QCD_ERR_CONFIG = 1,      /* invalid config or argument */
    QCD_ERR_DOMAIN = 2,
    QCD_ERR_NUMERIC = 3,
    QCD_ERR_ESTIMATION = 4,  /* e.g. every run truncated, no calibration bracket */
    QCD_ERR_IO = 5,
    QCD_ERR_INTERNAL = 6
} qcd_status;

/* Parsed experiment file: scenario, grid, replication counts and RNG policy. */
typedef struct qcd_scenario qcd_scenario;

typedef struct qcd_replication {
    int64_t stopping_slot;  /* -1 when the horizon was reached */
    int64_t change_slot;    /* -1 for no change */
    int64_t initial_queue;
} qcd_replication;

/* Message for the last failing call on this thread; never NULL. */
QCD_API const char* qcd_last_error(void);
QCD_API const char* qcd_version(void);

QCD_API qcd_status qcd_scenario_from_json(const char* json, qcd_scenario** out);
QCD_API qcd_status qcd_scenario_from_file(const char* path, qcd_scenario** out);
QCD_API qcd_status qcd_scenario_default(qcd_scenario** out);
QCD_API void qcd_scenario_free(qcd_scenario* scenario);

QCD_API qcd_status qcd_scenario_set_seed(qcd_scenario* scenario, uint64_t seed);
QCD_API qcd_status qcd_scenario_set_reps(qcd_scenario* scenario, int64_t reps);
QCD_API qcd_status qcd_scenario_grid_size(const qcd_scenario* scenario, size_t* out);

/* Information number of the scenario (single or multi-sensor), nats per slot. */
QCD_API qcd_status qcd_information_number(const qcd_scenario* scenario, double* out);

/* detector: "recursive", "generalized" or "oblivious". */
QCD_API qcd_status qcd_run_replication(const qcd_scenario* scenario, const char* detector, double threshold,
                                       uint64_t replication, qcd_replication* out);

/* CSV text (header plus rows); release with qcd_string_free. */
QCD_API qcd_status qcd_simulate(const qcd_scenario* scenario, unsigned parallelism, char** csv_out);
QCD_API qcd_status qcd_sweep(const qcd_scenario* scenario, unsigned parallelism, char** csv_out,
                             size_t* failed_rows);

/* Calibrates h for the scenario's single target gamma and detector. */
QCD_API qcd_status qcd_calibrate(const qcd_scenario* scenario, unsigned parallelism, double* threshold_out,
                                 double* arl_out);

/* Per-slot dump of one replication at the scenario's threshold. */
QCD_API qcd_status qcd_trace(const qcd_scenario* scenario, uint64_t replication, char** text_out);

/* Invariant report, one line per check; *all_passed is 1 when every check passed. */
QCD_API qcd_status qcd_verify(const qcd_scenario* scenario, unsigned parallelism, char** report_out,
                              int* all_passed);

QCD_API void qcd_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
