#include "ffdn.h"

#include "density.hpp"
#include "jobconfig.hpp"
#include "modal.hpp"
#include "polymat.hpp"
#include "wavio.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <sstream>

namespace {

thread_local std::string g_last_error;

ffdn_status set_error(ffdn_status code, const std::string& message) {
    g_last_error = message;
    return code;
}

template <typename Fn>
ffdn_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& ex) {
        return set_error(FFDN_ERR_ARGUMENT, ex.what());
    } catch (const std::domain_error& ex) {
        return set_error(FFDN_ERR_ARGUMENT, ex.what());
    } catch (const std::ios_base::failure& ex) {
        return set_error(FFDN_ERR_IO, ex.what());
    } catch (const std::exception& ex) {
        return set_error(FFDN_ERR_NUMERIC, ex.what());
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

double* dup_buffer(const std::vector<double>& v) {
    double* out = static_cast<double*>(std::malloc(v.size() * sizeof(double)));
    std::memcpy(out, v.data(), v.size() * sizeof(double));
    return out;
}

}  // namespace

struct ffdn_ffm {
    ffdn::FfmParams params;
    ffdn::FfmCascade cascade;
};

struct ffdn_job {
    ffdn::JobConfig job;
};

struct ffdn_modal {
    ffdn::ModalDecomposition md;
    double sample_rate = 48000.0;
};

extern "C" {

const char* ffdn_version(void) { return "0.1.0 (config format 1)"; }

const char* ffdn_last_error(void) { return g_last_error.c_str(); }

void ffdn_free_string(char* s) { std::free(s); }
void ffdn_free_buffer(double* p) { std::free(p); }

ffdn_status ffdn_ffm_create(const char* spec, ffdn_ffm** out) {
    if (!spec || !out) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        ffdn::JobConfig job = ffdn::parse_job(spec);
        *out = new ffdn_ffm{job.ffm_params, ffdn::build_ffm(job.ffm_params)};
        return FFDN_OK;
    });
}

void ffdn_ffm_destroy(ffdn_ffm* ffm) { delete ffm; }

ffdn_status ffdn_ffm_info(const ffdn_ffm* ffm, int* size, int* order, long* degree) {
    if (!ffm) return set_error(FFDN_ERR_ARGUMENT, "null handle");
    return guarded([&]() {
        if (size) *size = ffm->cascade.size();
        if (order) *order = ffdn::expand(ffm->cascade).order();
        if (degree) *degree = ffm->cascade.total_internal_delay();
        return FFDN_OK;
    });
}

ffdn_status ffdn_ffm_paraunitarity(const ffdn_ffm* ffm, double tol, int* paraunitary,
                                   double* max_deviation) {
    if (!ffm) return set_error(FFDN_ERR_ARGUMENT, "null handle");
    return guarded([&]() {
        const ffdn::PolynomialMatrix a = ffdn::expand(ffm->cascade);
        const ffdn::FrequencyGrid grid(std::max(2 * a.order() + 1, 16));
        const auto report = ffdn::is_paraunitary(a, grid, tol > 0.0 ? tol : 1e-9);
        if (paraunitary) *paraunitary = report.paraunitary ? 1 : 0;
        if (max_deviation) *max_deviation = report.max_deviation;
        return FFDN_OK;
    });
}

ffdn_status ffdn_ffm_to_text(const ffdn_ffm* ffm, char** text) {
    if (!ffm || !text) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        *text = dup_string(ffdn::to_text(ffdn::expand(ffm->cascade)));
        return FFDN_OK;
    });
}

ffdn_status ffdn_ffm_pulses(const ffdn_ffm* ffm, long* pulses) {
    if (!ffm || !pulses) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        const ffdn::PolynomialMatrix a = ffdn::expand(ffm->cascade);
        long count = 0;
        for (int l = 0; l <= a.order(); ++l)
            if (a.coeff(l)(0, 0) != 0.0) ++count;
        *pulses = count;
        return FFDN_OK;
    });
}

ffdn_status ffdn_ffm_cost(const ffdn_ffm* ffm, long* adds, long* mults, long* delay_rw,
                          long* table_pulses) {
    if (!ffm) return set_error(FFDN_ERR_ARGUMENT, "null handle");
    return guarded([&]() {
        const bool hadamard = ffdn::family_is_hadamard(ffm->params.family);
        const auto counts = ffdn::operation_count(ffm->cascade, hadamard);
        if (adds) *adds = counts.adds;
        if (mults) *mults = counts.mults;
        if (delay_rw) *delay_rw = counts.delay_rw;
        if (table_pulses)
            *table_pulses = ffdn::table_pulses_per_filter(
                ffm->cascade.size(), ffm->cascade.delay_stage_count(), hadamard);
        return FFDN_OK;
    });
}

ffdn_status ffdn_job_parse(const char* text, ffdn_job** out) {
    if (!text || !out) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        *out = new ffdn_job{ffdn::parse_job(text)};
        return FFDN_OK;
    });
}

ffdn_status ffdn_job_load(const char* path, ffdn_job** out) {
    if (!path || !out) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        std::ifstream is(path);
        if (!is) return set_error(FFDN_ERR_IO, std::string("cannot open config: ") + path);
        std::ostringstream buf;
        buf << is.rdbuf();
        *out = new ffdn_job{ffdn::parse_job(buf.str())};
        return FFDN_OK;
    });
}

void ffdn_job_destroy(ffdn_job* job) { delete job; }

ffdn_status ffdn_job_size(const ffdn_job* job, int* size) {
    if (!job || !size) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        *size = job->job.require_config().size();
        return FFDN_OK;
    });
}

ffdn_status ffdn_job_sample_rate(const ffdn_job* job, double* sample_rate) {
    if (!job || !sample_rate) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        *sample_rate = job->job.require_config().sample_rate;
        return FFDN_OK;
    });
}

ffdn_status ffdn_job_total_order(const ffdn_job* job, long* order) {
    if (!job || !order) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        *order = ffdn::total_order(job->job.require_config());
        return FFDN_OK;
    });
}

ffdn_status ffdn_job_seconds(const ffdn_job* job, double* seconds) {
    if (!job || !seconds) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    *seconds = job->job.seconds;
    return FFDN_OK;
}

ffdn_status ffdn_job_out_paths(const ffdn_job* job, char** wav_path, char** csv_path) {
    if (!job) return set_error(FFDN_ERR_ARGUMENT, "null handle");
    if (wav_path) *wav_path = job->job.out_wav.empty() ? nullptr : dup_string(job->job.out_wav);
    if (csv_path) *csv_path = job->job.out_csv.empty() ? nullptr : dup_string(job->job.out_csv);
    return FFDN_OK;
}

ffdn_status ffdn_render(const ffdn_job* job, int engine, double seconds, double** samples,
                        long* count, int* used_engine) {
    if (!job || !samples || !count) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        const ffdn::FfdnConfig& cfg = job->job.require_config();
        const double secs = seconds > 0.0 ? seconds : job->job.seconds;
        const long length = static_cast<long>(secs * cfg.sample_rate);
        if (length < 1) return set_error(FFDN_ERR_ARGUMENT, "render length below one sample");
        ffdn::EngineKind kind = job->job.engine;
        if (engine == FFDN_ENGINE_CASCADE) kind = ffdn::EngineKind::cascade;
        if (engine == FFDN_ENGINE_FFT) kind = ffdn::EngineKind::fast_convolution;
        const auto att = ffdn::design_attenuation(cfg, job->job.attenuation);
        const auto res = ffdn::render(cfg, att, length, kind);
        *samples = dup_buffer(res.samples);
        *count = static_cast<long>(res.samples.size());
        if (used_engine)
            *used_engine = res.engine_used == ffdn::EngineKind::cascade ? FFDN_ENGINE_CASCADE
                                                                        : FFDN_ENGINE_FFT;
        return FFDN_OK;
    });
}

ffdn_status ffdn_write_wav(const char* path, const double* samples, long count,
                           double sample_rate) {
    if (!path || !samples || count < 0) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        ffdn::write_wav(path, std::vector<double>(samples, samples + count), sample_rate);
        return FFDN_OK;
    });
}

ffdn_status ffdn_write_csv(const char* path, const double* samples, long count) {
    if (!path || !samples || count < 0) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        ffdn::write_ir_csv(path, std::vector<double>(samples, samples + count));
        return FFDN_OK;
    });
}

ffdn_status ffdn_read_wav(const char* path, double** samples, long* count, double* sample_rate) {
    if (!path || !samples || !count) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        double rate = 0.0;
        const auto data = ffdn::read_wav(path, &rate);
        *samples = dup_buffer(data);
        *count = static_cast<long>(data.size());
        if (sample_rate) *sample_rate = rate;
        return FFDN_OK;
    });
}

ffdn_status ffdn_modal_solve(const ffdn_job* job, double tol, int max_sweeps, long order_cap,
                             ffdn_modal** out) {
    if (!job || !out) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        const ffdn::FfdnConfig& cfg = job->job.require_config();
        const auto att = ffdn::design_attenuation(cfg, job->job.attenuation);
        ffdn::GcpContext ctx(cfg, att);
        const long cap = order_cap > 0 ? order_cap : 50000;
        if (ctx.total_order() > cap)
            return set_error(FFDN_ERR_ARGUMENT,
                             "system order " + std::to_string(ctx.total_order()) +
                                 " exceeds the cap " + std::to_string(cap));
        ffdn::EaiOptions opts;
        if (tol > 0.0) opts.tol = tol;
        if (max_sweeps > 0) opts.max_sweeps = max_sweeps;
        auto md = ffdn::eai_solve(ctx, opts);
        if (!md.all_converged())
            return set_error(FFDN_ERR_NUMERIC, "Ehrlich-Aberth iteration did not converge for "
                                               "every pole within the sweep limit");
        ffdn::compute_residues(ctx, md);
        *out = new ffdn_modal{std::move(md), cfg.sample_rate};
        return FFDN_OK;
    });
}

void ffdn_modal_destroy(ffdn_modal* modal) { delete modal; }

long ffdn_modal_count(const ffdn_modal* modal) {
    return modal ? static_cast<long>(modal->md.poles.size()) : 0;
}

int ffdn_modal_converged(const ffdn_modal* modal) {
    return modal && modal->md.all_converged() ? 1 : 0;
}

ffdn_status ffdn_modal_poles(const ffdn_modal* modal, double* re, double* im) {
    if (!modal || !re || !im) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    for (std::size_t k = 0; k < modal->md.poles.size(); ++k) {
        re[k] = modal->md.poles[k].real();
        im[k] = modal->md.poles[k].imag();
    }
    return FFDN_OK;
}

ffdn_status ffdn_modal_residues(const ffdn_modal* modal, double* re, double* im) {
    if (!modal || !re || !im) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    for (std::size_t k = 0; k < modal->md.residues.size(); ++k) {
        re[k] = modal->md.residues[k].real();
        im[k] = modal->md.residues[k].imag();
    }
    return FFDN_OK;
}

ffdn_status ffdn_modal_reconstruct(const ffdn_modal* modal, long length, double** samples) {
    if (!modal || !samples || length < 1) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        *samples = dup_buffer(ffdn::modal_reconstruction(modal->md, length));
        return FFDN_OK;
    });
}

ffdn_status ffdn_modal_write_csv(const ffdn_modal* modal, const char* path) {
    if (!modal || !path) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        std::ofstream os(path);
        if (!os) return set_error(FFDN_ERR_IO, std::string("cannot open for writing: ") + path);
        os << "re,im,magnitude,t60,residue_re,residue_im\n";
        for (std::size_t k = 0; k < modal->md.poles.size(); ++k) {
            const auto pole = modal->md.poles[k];
            const double mag = std::abs(pole);
            const double t60 = mag < 1.0 ? -3.0 / (modal->sample_rate * std::log10(mag)) : -1.0;
            const auto res = k < modal->md.residues.size() ? modal->md.residues[k] : ffdn::cplx(0);
            os << pole.real() << ',' << pole.imag() << ',' << mag << ',' << t60 << ','
               << res.real() << ',' << res.imag() << '\n';
        }
        return FFDN_OK;
    });
}

ffdn_status ffdn_modal_decay(const ffdn_modal* modal, double target_t60, const char* csv_path,
                             double* max_rel_deviation, long* non_decaying) {
    if (!modal) return set_error(FFDN_ERR_ARGUMENT, "null handle");
    return guarded([&]() {
        const auto dist = ffdn::decay_distribution(modal->md, modal->sample_rate, target_t60);
        if (csv_path) {
            std::ofstream os(csv_path);
            if (!os)
                return set_error(FFDN_ERR_IO, std::string("cannot open for writing: ") + csv_path);
            os << "t60,probability\n";
            for (std::size_t k = 0; k < dist.bin_centers.size(); ++k)
                os << dist.bin_centers[k] << ',' << dist.probability[k] << '\n';
        }
        if (max_rel_deviation) *max_rel_deviation = dist.max_rel_deviation;
        if (non_decaying) *non_decaying = dist.flagged;
        return FFDN_OK;
    });
}

ffdn_status ffdn_echo_density(const double* ir, long count, double sample_rate,
                              double window_ms, double threshold, int hop, double** profile,
                              long* profile_len, long* mixing_sample) {
    if (!ir || count < 1 || !profile || !profile_len)
        return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        const int window = static_cast<int>(window_ms * sample_rate / 1000.0);
        auto prof = ffdn::echo_density(std::vector<double>(ir, ir + count), window,
                                       hop > 0 ? hop : 1);
        const auto mix = ffdn::mixing_time(prof, threshold > 0.0 ? threshold : 0.9);
        *profile = dup_buffer(prof.density);
        *profile_len = static_cast<long>(prof.density.size());
        if (mixing_sample) *mixing_sample = mix ? *mix : -1;
        return FFDN_OK;
    });
}

ffdn_status ffdn_monte_carlo(const char* families, int trials, unsigned long long seed,
                             char** json_summary) {
    if (!families || !json_summary) return set_error(FFDN_ERR_ARGUMENT, "null argument");
    return guarded([&]() {
        std::vector<ffdn::FfmFamily> list;
        std::stringstream ss(families);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item.erase(0, item.find_first_not_of(" \t"));
            item.erase(item.find_last_not_of(" \t") + 1);
            if (item.empty()) continue;
            const auto f = ffdn::family_from_name(item);
            if (!f) return set_error(FFDN_ERR_ARGUMENT, "unknown family '" + item + "'");
            list.push_back(*f);
        }
        const auto result = ffdn::monte_carlo_mixing(list, trials, seed);

        nlohmann::json j;
        j["trials"] = result.trials;
        for (const auto& [family, stats] : result.mixing_samples) {
            nlohmann::json s;
            s["median_samples"] = stats.median;
            s["q25_samples"] = stats.q25;
            s["q75_samples"] = stats.q75;
            const auto& rel = result.relative_to_sfm4.at(family);
            s["median_vs_sfm4"] = rel.median;
            s["q25_vs_sfm4"] = rel.q25;
            s["q75_vs_sfm4"] = rel.q75;
            j["families"][ffdn::family_name(family)] = s;
        }
        *json_summary = dup_string(j.dump(2));
        return FFDN_OK;
    });
}

}  // extern "C"
