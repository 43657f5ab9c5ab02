/*
 * ffdn - filter feedback delay network toolkit.
 *
 * C interface to the shared library. All objects are opaque handles; every
 * fallible call returns an ffdn_status and leaves a human-readable message
 * in ffdn_last_error() (thread local). Arrays returned through double**
 * must be released with ffdn_free_buffer, strings with ffdn_free_string.
 */
#ifndef FFDN_H
#define FFDN_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ffdn_status {
    FFDN_OK = 0,
    FFDN_ERR_ARGUMENT = 1, /* bad input: spec, config, parameter */
    FFDN_ERR_NUMERIC = 2,  /* instability, non-convergence */
    FFDN_ERR_IO = 3,       /* file problems */
} ffdn_status;

const char* ffdn_version(void);
const char* ffdn_last_error(void);
void ffdn_free_string(char* s);
void ffdn_free_buffer(double* p);

/* ------------------------------------------------------------------ FFM */

typedef struct ffdn_ffm ffdn_ffm;

/*
 * spec is the flat key=value format, e.g.
 *   family = vfm
 *   size = 4
 *   stages = 2
 *   density = 0.0333
 *   seed = 17
 */
ffdn_status ffdn_ffm_create(const char* spec, ffdn_ffm** out);
void ffdn_ffm_destroy(ffdn_ffm* ffm);

ffdn_status ffdn_ffm_info(const ffdn_ffm* ffm, int* size, int* order, long* degree);

/* Max deviation of A^H A from identity over a sufficient unit-circle grid. */
ffdn_status ffdn_ffm_paraunitarity(const ffdn_ffm* ffm, double tol, int* paraunitary,
                                   double* max_deviation);

/* Expanded coefficient matrices in the plain-text exchange format. */
ffdn_status ffdn_ffm_to_text(const ffdn_ffm* ffm, char** text);

/* Pulses per entry of the expanded matrix (tap count of entry 0,0). */
ffdn_status ffdn_ffm_pulses(const ffdn_ffm* ffm, long* pulses);

/*
 * Per-sample operation counts of the cascade realization plus the
 * pulses-per-filter column of the published cost table.
 */
ffdn_status ffdn_ffm_cost(const ffdn_ffm* ffm, long* adds, long* mults, long* delay_rw,
                          long* table_pulses);

/* ------------------------------------------------------------------ jobs */

typedef struct ffdn_job ffdn_job;

/* Full job config: FFM keys plus delays, gains, sample_rate, attenuation,
 * seconds, engine, output paths. */
ffdn_status ffdn_job_parse(const char* text, ffdn_job** out);
ffdn_status ffdn_job_load(const char* path, ffdn_job** out);
void ffdn_job_destroy(ffdn_job* job);

ffdn_status ffdn_job_size(const ffdn_job* job, int* size);
ffdn_status ffdn_job_sample_rate(const ffdn_job* job, double* sample_rate);
ffdn_status ffdn_job_total_order(const ffdn_job* job, long* order);
ffdn_status ffdn_job_seconds(const ffdn_job* job, double* seconds);
ffdn_status ffdn_job_out_paths(const ffdn_job* job, char** wav_path, char** csv_path);

/* ---------------------------------------------------------------- render */

#define FFDN_ENGINE_DEFAULT (-1)
#define FFDN_ENGINE_CASCADE 0
#define FFDN_ENGINE_FFT 1

/*
 * Renders the impulse response. engine selects the execution path
 * (FFDN_ENGINE_DEFAULT uses the config). used_engine reports the path that
 * actually ran; the FFT engine falls back to cascade when the feedback
 * latency makes block processing impossible.
 */
ffdn_status ffdn_render(const ffdn_job* job, int engine, double seconds, double** samples,
                        long* count, int* used_engine);

ffdn_status ffdn_write_wav(const char* path, const double* samples, long count,
                           double sample_rate);
ffdn_status ffdn_write_csv(const char* path, const double* samples, long count);

/* Mono 32-bit float WAV reader (first channel of multichannel files). */
ffdn_status ffdn_read_wav(const char* path, double** samples, long* count, double* sample_rate);

/* ----------------------------------------------------------------- modal */

typedef struct ffdn_modal ffdn_modal;

/* Ehrlich-Aberth modal decomposition; pass 0 for default tol (1e-10) and
 * max_sweeps (100). order_cap refuses oversized systems (0 = 50000). */
ffdn_status ffdn_modal_solve(const ffdn_job* job, double tol, int max_sweeps, long order_cap,
                             ffdn_modal** out);
void ffdn_modal_destroy(ffdn_modal* modal);

long ffdn_modal_count(const ffdn_modal* modal);
int ffdn_modal_converged(const ffdn_modal* modal); /* 1 when every pole converged */
ffdn_status ffdn_modal_poles(const ffdn_modal* modal, double* re, double* im);
ffdn_status ffdn_modal_residues(const ffdn_modal* modal, double* re, double* im);

/* Reconstruction h[0] = d, h[n] = Re sum rho_i lambda_i^(n-1). */
ffdn_status ffdn_modal_reconstruct(const ffdn_modal* modal, long length, double** samples);

/* poles CSV: re,im,magnitude,t60,residue_re,residue_im per row. */
ffdn_status ffdn_modal_write_csv(const ffdn_modal* modal, const char* path);

/* T60 histogram CSV (t60,probability) and decay statistics. target_t60 > 0
 * also reports the max relative per-mode deviation. */
ffdn_status ffdn_modal_decay(const ffdn_modal* modal, double target_t60, const char* csv_path,
                             double* max_rel_deviation, long* non_decaying);

/* --------------------------------------------------------------- density */

/* Normalized echo density profile of an impulse response; window in
 * milliseconds at the given rate (20 ms typical). hop >= 1 trades accuracy
 * for speed. mixing_sample is -1 when the profile never crosses the
 * threshold. */
ffdn_status ffdn_echo_density(const double* ir, long count, double sample_rate,
                              double window_ms, double threshold, int hop, double** profile,
                              long* profile_len, long* mixing_sample);

/*
 * Monte-Carlo relative mixing-time study. families is a comma list out of
 * ebfm,dfm,rdfm,vfm,sfm4,sfm16 (sfm4 always runs as baseline). Returns a
 * JSON summary with per-family median/quartiles of the mixing time and of
 * the ratio to the SFM-4 baseline.
 */
ffdn_status ffdn_monte_carlo(const char* families, int trials, unsigned long long seed,
                             char** json_summary);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* FFDN_H */
