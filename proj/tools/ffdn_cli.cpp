// Command-line front end for the ffdn shared library. Talks to the core
// exclusively through the C API in ffdn.h.

#include <ffdn.h>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumeric = 1;
constexpr int kExitUsage = 2;

int exit_code(ffdn_status status) {
    switch (status) {
        case FFDN_OK: return kExitOk;
        case FFDN_ERR_NUMERIC: return kExitNumeric;
        default: return kExitUsage;
    }
}

int report(ffdn_status status) {
    if (status != FFDN_OK) std::cerr << "error: " << ffdn_last_error() << "\n";
    return exit_code(status);
}

// The CLI merges config files with --set/flag overrides at the text level;
// all validation happens inside the library.
class ConfigText {
public:
    bool load_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) return false;
        std::string line;
        while (std::getline(is, line)) add_line(line);
        return true;
    }

    void add_line(const std::string& line) {
        const auto eq = line.find('=');
        const auto hash = line.find('#');
        if (eq == std::string::npos || (hash != std::string::npos && hash < eq)) return;
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t\r\n") + 1);
            return s;
        };
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    void add_pairs(const std::string& comma_list) {
        std::stringstream ss(comma_list);
        std::string item;
        while (std::getline(ss, item, ',')) {
            // Values may themselves contain commas (lists); only split on
            // commas that are followed by another key=value pair.
            if (item.find('=') == std::string::npos && !last_key_.empty()) {
                values_[last_key_] += "," + item;
                continue;
            }
            const auto eq = item.find('=');
            if (eq == std::string::npos) continue;
            last_key_ = item.substr(0, eq);
            set(last_key_, item.substr(eq + 1));
        }
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string text() const {
        std::ostringstream os;
        for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
        return os.str();
    }

private:
    std::map<std::string, std::string> values_;
    std::string last_key_;
};

struct JobDeleter {
    void operator()(ffdn_job* j) const { ffdn_job_destroy(j); }
};
struct FfmDeleter {
    void operator()(ffdn_ffm* f) const { ffdn_ffm_destroy(f); }
};
struct ModalDeleter {
    void operator()(ffdn_modal* m) const { ffdn_modal_destroy(m); }
};

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string ffm_spec;
    std::string delays;
    std::string t60;
    double seconds = 0.0;
    std::string engine;
    long seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_render_flags) {
    cmd->add_option("--config", opts.config_path, "job config file (key = value lines)");
    cmd->add_option("--set", opts.sets, "override a config key, e.g. --set seed=7")
        ->take_all();
    cmd->add_option("--ffm", opts.ffm_spec,
                    "FFM spec as comma pairs, e.g. family=vfm,size=4,stages=2,density=0.033");
    cmd->add_option("--seed", opts.seed, "construction seed");
    if (with_render_flags) {
        cmd->add_option("--delays", opts.delays, "main delays in samples, comma list");
        cmd->add_option("--t60", opts.t60, "target T60 seconds (flat or freq:sec pairs)");
        cmd->add_option("--seconds", opts.seconds, "render length in seconds");
        cmd->add_option("--engine", opts.engine, "cascade | fft");
    }
}

bool assemble(const CommonOpts& opts, ConfigText& cfg) {
    if (!opts.config_path.empty() && !cfg.load_file(opts.config_path)) {
        std::cerr << "error: cannot open config: " << opts.config_path << "\n";
        return false;
    }
    if (!opts.ffm_spec.empty()) cfg.add_pairs(opts.ffm_spec);
    if (!opts.delays.empty()) cfg.set("delays", opts.delays);
    if (!opts.t60.empty()) {
        cfg.set("attenuation", "t60");
        cfg.set("t60", opts.t60);
    }
    if (opts.seconds > 0.0) cfg.set("seconds", std::to_string(opts.seconds));
    if (!opts.engine.empty()) cfg.set("engine", opts.engine);
    if (opts.seed >= 0) cfg.set("seed", std::to_string(opts.seed));
    for (const auto& s : opts.sets) cfg.add_pairs(s);
    return true;
}

int run_gen(const CommonOpts& opts, const std::string& out_path) {
    ConfigText cfg;
    if (!assemble(opts, cfg)) return kExitUsage;
    ffdn_ffm* raw = nullptr;
    ffdn_status st = ffdn_ffm_create(cfg.text().c_str(), &raw);
    if (st != FFDN_OK) return report(st);
    std::unique_ptr<ffdn_ffm, FfmDeleter> ffm(raw);

    int size = 0, order = 0;
    long degree = 0;
    ffdn_ffm_info(ffm.get(), &size, &order, &degree);
    int pu = 0;
    double dev = 0.0;
    st = ffdn_ffm_paraunitarity(ffm.get(), 1e-9, &pu, &dev);
    if (st != FFDN_OK) return report(st);
    long pulses = 0;
    ffdn_ffm_pulses(ffm.get(), &pulses);

    std::printf("size %d  order %d  degree %ld  pulses/filter %ld\n", size, order, degree, pulses);
    std::printf("paraunitary %s  max deviation %.3e\n", pu ? "yes" : "NO", dev);

    char* text = nullptr;
    st = ffdn_ffm_to_text(ffm.get(), &text);
    if (st != FFDN_OK) return report(st);
    if (out_path.empty() || out_path == "-") {
        std::fputs(text, stdout);
    } else {
        std::ofstream os(out_path);
        os << text;
        if (!os) {
            std::cerr << "error: cannot write " << out_path << "\n";
            ffdn_free_string(text);
            return kExitUsage;
        }
        std::printf("wrote %s\n", out_path.c_str());
    }
    ffdn_free_string(text);
    return kExitOk;
}

int run_cost(const CommonOpts& opts) {
    ConfigText cfg;
    if (!assemble(opts, cfg)) return kExitUsage;
    ffdn_ffm* raw = nullptr;
    ffdn_status st = ffdn_ffm_create(cfg.text().c_str(), &raw);
    if (st != FFDN_OK) return report(st);
    std::unique_ptr<ffdn_ffm, FfmDeleter> ffm(raw);
    long adds = 0, mults = 0, rw = 0, pulses = 0;
    st = ffdn_ffm_cost(ffm.get(), &adds, &mults, &rw, &pulses);
    if (st != FFDN_OK) return report(st);
    std::printf("adds %ld  mults %ld  delay_rw %ld  pulses_per_filter %ld\n", adds, mults, rw,
                pulses);
    return kExitOk;
}

int run_render(const CommonOpts& opts, const std::string& out_path, int engine_flag) {
    ConfigText cfg;
    if (!assemble(opts, cfg)) return kExitUsage;
    if (!out_path.empty()) {
        if (out_path.size() > 4 && out_path.substr(out_path.size() - 4) == ".csv")
            cfg.set("out_csv", out_path);
        else
            cfg.set("out_wav", out_path);
    }

    ffdn_job* raw = nullptr;
    ffdn_status st = ffdn_job_parse(cfg.text().c_str(), &raw);
    if (st != FFDN_OK) return report(st);
    std::unique_ptr<ffdn_job, JobDeleter> job(raw);

    char* wav_path = nullptr;
    char* csv_path = nullptr;
    ffdn_job_out_paths(job.get(), &wav_path, &csv_path);
    if (!wav_path && !csv_path) {
        std::cerr << "error: no output path; use --out or set out_wav/out_csv\n";
        return kExitUsage;
    }

    double* samples = nullptr;
    long count = 0;
    int used = 0;
    st = ffdn_render(job.get(), engine_flag, 0.0, &samples, &count, &used);
    if (st != FFDN_OK) {
        ffdn_free_string(wav_path);
        ffdn_free_string(csv_path);
        return report(st);
    }
    double rate = 48000.0;
    ffdn_job_sample_rate(job.get(), &rate);

    if (wav_path) {
        st = ffdn_write_wav(wav_path, samples, count, rate);
        if (st == FFDN_OK) std::printf("wrote %s (%ld samples, %s engine)\n", wav_path, count,
                                       used == FFDN_ENGINE_FFT ? "fft" : "cascade");
    }
    if (st == FFDN_OK && csv_path) {
        st = ffdn_write_csv(csv_path, samples, count);
        if (st == FFDN_OK) std::printf("wrote %s\n", csv_path);
    }
    ffdn_free_buffer(samples);
    ffdn_free_string(wav_path);
    ffdn_free_string(csv_path);
    return report(st);
}

int run_modal(const CommonOpts& opts, double tol, int max_iter, long order_cap,
              const std::string& out_path, const std::string& decay_path, double target_t60) {
    ConfigText cfg;
    if (!assemble(opts, cfg)) return kExitUsage;
    ffdn_job* raw = nullptr;
    ffdn_status st = ffdn_job_parse(cfg.text().c_str(), &raw);
    if (st != FFDN_OK) return report(st);
    std::unique_ptr<ffdn_job, JobDeleter> job(raw);

    ffdn_modal* mraw = nullptr;
    st = ffdn_modal_solve(job.get(), tol, max_iter, order_cap, &mraw);
    if (st != FFDN_OK) return report(st);
    std::unique_ptr<ffdn_modal, ModalDeleter> modal(mraw);

    std::printf("poles %ld  converged %s\n", ffdn_modal_count(modal.get()),
                ffdn_modal_converged(modal.get()) ? "yes" : "NO");
    if (!out_path.empty()) {
        st = ffdn_modal_write_csv(modal.get(), out_path.c_str());
        if (st != FFDN_OK) return report(st);
        std::printf("wrote %s\n", out_path.c_str());
    }
    double max_dev = 0.0;
    long flagged = 0;
    st = ffdn_modal_decay(modal.get(), target_t60, decay_path.empty() ? nullptr : decay_path.c_str(),
                          &max_dev, &flagged);
    if (st != FFDN_OK) return report(st);
    if (!decay_path.empty()) std::printf("wrote %s\n", decay_path.c_str());
    if (target_t60 > 0.0)
        std::printf("max T60 deviation %.4f%%  non-decaying poles %ld\n", 100.0 * max_dev, flagged);
    return kExitOk;
}

int run_density(const std::string& in_path, const CommonOpts& opts, double window_ms,
                double threshold, int hop, const std::string& out_path) {
    double* ir = nullptr;
    long count = 0;
    double rate = 48000.0;

    if (in_path.size() > 4 && in_path.substr(in_path.size() - 4) == ".wav") {
        ffdn_status st = ffdn_read_wav(in_path.c_str(), &ir, &count, &rate);
        if (st != FFDN_OK) return report(st);
    } else {
        CommonOpts with_file = opts;
        with_file.config_path = in_path.empty() ? opts.config_path : in_path;
        ConfigText cfg;
        if (!assemble(with_file, cfg)) return kExitUsage;
        ffdn_job* raw = nullptr;
        ffdn_status st = ffdn_job_parse(cfg.text().c_str(), &raw);
        if (st != FFDN_OK) return report(st);
        std::unique_ptr<ffdn_job, JobDeleter> job(raw);
        st = ffdn_render(job.get(), FFDN_ENGINE_DEFAULT, 0.0, &ir, &count, nullptr);
        if (st != FFDN_OK) return report(st);
        ffdn_job_sample_rate(job.get(), &rate);
    }

    double* profile = nullptr;
    long len = 0;
    long mix = -1;
    ffdn_status st =
        ffdn_echo_density(ir, count, rate, window_ms, threshold, hop, &profile, &len, &mix);
    ffdn_free_buffer(ir);
    if (st != FFDN_OK) return report(st);

    if (mix >= 0)
        std::printf("mixing time %ld samples (%.1f ms)\n", mix, 1000.0 * mix / rate);
    else
        std::printf("mixing time: none within %ld samples\n", len);

    if (!out_path.empty()) {
        st = ffdn_write_csv(out_path.c_str(), profile, len);
        if (st == FFDN_OK) std::printf("wrote %s\n", out_path.c_str());
    }
    ffdn_free_buffer(profile);
    return report(st);
}

int run_mc(const std::string& families, int trials, unsigned long long seed,
           const std::string& out_path) {
    char* json = nullptr;
    ffdn_status st = ffdn_monte_carlo(families.c_str(), trials, seed, &json);
    if (st != FFDN_OK) return report(st);
    if (out_path.empty() || out_path == "-") {
        std::puts(json);
    } else {
        std::ofstream os(out_path);
        os << json << "\n";
        std::printf("wrote %s\n", out_path.c_str());
    }
    ffdn_free_string(json);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"filter feedback delay network toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("ffdn ") + ffdn_version());

    CommonOpts gen_opts, cost_opts, render_opts, modal_opts, density_opts;
    std::string gen_out, render_out, modal_out, modal_decay, density_in, density_out, mc_out;
    std::string render_engine;
    double modal_tol = 1e-10, modal_t60 = 0.0;
    int modal_iter = 100;
    long modal_cap = 50000;
    double window_ms = 20.0, threshold = 0.9;
    int hop = 1;
    std::string mc_families = "ebfm,dfm,rdfm,vfm,sfm4,sfm16";
    int mc_trials = 100;
    unsigned long long mc_seed = 1;

    auto* gen = app.add_subcommand("gen", "construct an FFM and dump it as text");
    add_common(gen, gen_opts, false);
    gen->add_option("--out", gen_out, "output path for the matrix text ('-' = stdout)");

    auto* cost = app.add_subcommand("cost", "per-sample operation counts of an FFM");
    add_common(cost, cost_opts, false);

    auto* render = app.add_subcommand("render", "render the FFDN impulse response");
    add_common(render, render_opts, true);
    render->add_option("--out", render_out, "output .wav or .csv path");

    auto* modal = app.add_subcommand("modal", "modal decomposition (poles and residues)");
    add_common(modal, modal_opts, true);
    modal->add_option("--tol", modal_tol, "per-pole step tolerance");
    modal->add_option("--max-iter", modal_iter, "maximum sweeps");
    modal->add_option("--order-cap", modal_cap, "refuse systems above this order");
    modal->add_option("--out", modal_out, "poles/residues CSV path");
    modal->add_option("--decay-out", modal_decay, "T60 histogram CSV path");
    modal->add_option("--target-t60", modal_t60, "report max deviation against this T60");

    auto* density = app.add_subcommand("density", "echo density profile and mixing time");
    add_common(density, density_opts, true);
    density->add_option("--in", density_in, "input .wav or job config");
    density->add_option("--window-ms", window_ms, "analysis window (default 20 ms)");
    density->add_option("--threshold", threshold, "mixing threshold (default 0.9)");
    density->add_option("--hop", hop, "evaluation hop in samples");
    density->add_option("--out", density_out, "profile CSV path");

    auto* mc = app.add_subcommand("mc", "Monte-Carlo relative mixing-time study");
    mc->add_option("--families", mc_families, "comma list: ebfm,dfm,rdfm,vfm,sfm4,sfm16");
    mc->add_option("--trials", mc_trials, "number of trials (>= 10)");
    mc->add_option("--seed", mc_seed, "master seed");
    mc->add_option("--out", mc_out, "summary JSON path ('-' = stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (gen->parsed()) return run_gen(gen_opts, gen_out);
    if (cost->parsed()) return run_cost(cost_opts);
    if (render->parsed()) {
        int engine_flag = FFDN_ENGINE_DEFAULT;
        if (render_opts.engine == "cascade") engine_flag = FFDN_ENGINE_CASCADE;
        if (render_opts.engine == "fft") engine_flag = FFDN_ENGINE_FFT;
        return run_render(render_opts, render_out, engine_flag);
    }
    if (modal->parsed())
        return run_modal(modal_opts, modal_tol, modal_iter, modal_cap, modal_out, modal_decay,
                         modal_t60);
    if (density->parsed())
        return run_density(density_in, density_opts, window_ms, threshold, hop, density_out);
    if (mc->parsed()) return run_mc(mc_families, mc_trials, mc_seed, mc_out);
    return kExitUsage;
}
