#include "jobconfig.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ffdn {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void fail(int line, const std::string& what) {
    throw std::invalid_argument("line " + std::to_string(line) + ": " + what);
}

struct KvEntry {
    std::string value;
    int line = 0;
};

std::map<std::string, KvEntry> parse_kv(const std::string& text) {
    std::map<std::string, KvEntry> kv;
    std::istringstream is(text);
    std::string raw;
    int line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string s = trim(raw);
        if (s.empty()) continue;
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) fail(line, "expected key = value");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty()) fail(line, "empty key");
        if (kv.count(key)) fail(line, "duplicate key '" + key + "'");
        kv[key] = {value, line};
    }
    return kv;
}

double to_double(const KvEntry& e) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(e.value, &pos);
    } catch (const std::exception&) {
        fail(e.line, "expected a number, got '" + e.value + "'");
    }
    if (pos != e.value.size()) fail(e.line, "trailing characters after number '" + e.value + "'");
    return v;
}

long to_long(const KvEntry& e) {
    const double v = to_double(e);
    const long l = static_cast<long>(v);
    if (static_cast<double>(l) != v) fail(e.line, "expected an integer, got '" + e.value + "'");
    return l;
}

std::vector<double> to_double_list(const KvEntry& e) {
    std::vector<double> out;
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) fail(e.line, "empty list element");
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            fail(e.line, "expected a number, got '" + item + "'");
        }
    }
    if (out.empty()) fail(e.line, "empty list");
    return out;
}

std::vector<int> to_int_list(const KvEntry& e) {
    std::vector<int> out;
    for (double v : to_double_list(e)) {
        const int i = static_cast<int>(v);
        if (static_cast<double>(i) != v) fail(e.line, "expected integers in list");
        out.push_back(i);
    }
    return out;
}

// "0:5" or "0:5,8000:2" frequency:seconds pairs; a bare number is flat.
std::vector<RtPoint> to_rt_curve(const KvEntry& e) {
    std::vector<RtPoint> curve;
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        const std::size_t colon = item.find(':');
        RtPoint p;
        try {
            if (colon == std::string::npos) {
                p.freq_hz = 0.0;
                p.t60_s = std::stod(item);
            } else {
                p.freq_hz = std::stod(item.substr(0, colon));
                p.t60_s = std::stod(item.substr(colon + 1));
            }
        } catch (const std::exception&) {
            fail(e.line, "expected T60 seconds or freq:seconds pairs");
        }
        curve.push_back(p);
    }
    if (curve.empty()) fail(e.line, "empty T60 specification");
    return curve;
}

const std::vector<std::string> kKnownKeys = {
    "family", "size", "stages", "density", "seed", "dfm_m0", "dfm_m1",
    "delays", "b", "c", "d", "sample_rate",
    "attenuation", "gain_per_sample", "t60",
    "seconds", "engine", "out_wav", "out_csv",
};

}  // namespace

bool family_is_hadamard(const std::string& family) {
    return family == "hadamard" || family == "vfm";
}

FfmCascade build_ffm(const FfmParams& p) {
    if (p.size < 1) throw std::invalid_argument("FFM size must be positive");
    if (p.family == "identity") return FfmCascade::scalar(Mat::Identity(p.size, p.size));
    if (p.family == "sfm") {
        Rng rng(p.seed);
        return FfmCascade::scalar(random_orthogonal(p.size, rng));
    }
    if (p.family == "hadamard") return hadamard_ffm(p.size, p.stages);
    if (p.family == "vfm") return vfm({p.size, p.stages, p.density, p.seed});
    if (p.family == "rdfm") return rdfm(p.size, p.stages, p.seed);
    if (p.family == "ebfm") return ebfm_cascade(random_elemental(p.size, p.stages, p.seed));
    if (p.family == "dfm") {
        Rng rng(p.seed);
        std::vector<int> m0, m1;
        if (p.dfm_m0 && p.dfm_m1) {
            m0 = *p.dfm_m0;
            m1 = *p.dfm_m1;
        } else {
            std::uniform_int_distribution<int> d(0, 50);
            m0.resize(static_cast<std::size_t>(p.size));
            m1.resize(static_cast<std::size_t>(p.size));
            for (int& v : m1) v = d(rng);
            for (int& v : m0) v = d(rng);
        }
        return dfm(m1, random_orthogonal(p.size, rng), m0);
    }
    throw std::invalid_argument("unknown FFM family '" + p.family + "'");
}

const FfdnConfig& JobConfig::require_config() const {
    if (!config) throw std::invalid_argument("job config is missing the 'delays' key");
    return *config;
}

JobConfig parse_job(const std::string& text) {
    const auto kv = parse_kv(text);
    for (const auto& [key, entry] : kv)
        if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end())
            fail(entry.line, "unknown key '" + key + "'");

    JobConfig job;
    auto get = [&kv](const std::string& key) -> const KvEntry* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };

    if (const auto* e = get("family")) job.ffm_params.family = e->value;
    if (const auto* e = get("size")) job.ffm_params.size = static_cast<int>(to_long(*e));
    if (const auto* e = get("stages")) job.ffm_params.stages = static_cast<int>(to_long(*e));
    if (const auto* e = get("density")) job.ffm_params.density = to_double(*e);
    if (const auto* e = get("seed")) job.ffm_params.seed = static_cast<std::uint64_t>(to_long(*e));
    if (const auto* e = get("dfm_m0")) job.ffm_params.dfm_m0 = to_int_list(*e);
    if (const auto* e = get("dfm_m1")) job.ffm_params.dfm_m1 = to_int_list(*e);

    FfmCascade ffm = [&] {
        try {
            return build_ffm(job.ffm_params);
        } catch (const std::invalid_argument& ex) {
            const int line = get("family") ? get("family")->line : 0;
            fail(line, ex.what());
        }
    }();
    const int n = ffm.size();

    if (const auto* e = get("attenuation")) {
        if (e->value == "lossless") {
            job.attenuation = AttenuationSpec::lossless();
        } else if (e->value == "broadband") {
            const auto* g = get("gain_per_sample");
            if (!g) fail(e->line, "broadband attenuation needs gain_per_sample");
            try {
                job.attenuation = AttenuationSpec::broadband(to_double(*g));
            } catch (const std::invalid_argument& ex) {
                fail(g->line, ex.what());
            }
        } else if (e->value == "t60") {
            const auto* t = get("t60");
            if (!t) fail(e->line, "t60 attenuation needs a t60 key");
            try {
                job.attenuation = AttenuationSpec::frequency_dependent(to_rt_curve(*t));
            } catch (const std::invalid_argument& ex) {
                fail(t->line, ex.what());
            }
        } else {
            fail(e->line, "attenuation must be lossless, broadband or t60");
        }
    } else if (const auto* t = get("t60")) {
        try {
            job.attenuation = AttenuationSpec::frequency_dependent(to_rt_curve(*t));
        } catch (const std::invalid_argument& ex) {
            fail(t->line, ex.what());
        }
    }

    if (const auto* e = get("seconds")) {
        job.seconds = to_double(*e);
        if (!(job.seconds > 0.0)) fail(e->line, "seconds must be positive");
    }
    if (const auto* e = get("engine")) {
        if (e->value == "cascade") job.engine = EngineKind::cascade;
        else if (e->value == "fft") job.engine = EngineKind::fast_convolution;
        else fail(e->line, "engine must be cascade or fft");
    }
    if (const auto* e = get("out_wav")) job.out_wav = e->value;
    if (const auto* e = get("out_csv")) job.out_csv = e->value;

    if (const auto* e = get("delays")) {
        FfdnConfig cfg{to_int_list(*e),
                       Eigen::VectorXd::Ones(n),
                       Eigen::VectorXd::Ones(n),
                       0.0,
                       std::move(ffm),
                       48000.0};
        if (const auto* b = get("b")) {
            const auto vals = to_double_list(*b);
            if (static_cast<int>(vals.size()) != n) fail(b->line, "b length must match FFM size");
            cfg.input_gains = Eigen::Map<const Eigen::VectorXd>(vals.data(), n);
        }
        if (const auto* c = get("c")) {
            const auto vals = to_double_list(*c);
            if (static_cast<int>(vals.size()) != n) fail(c->line, "c length must match FFM size");
            cfg.output_gains = Eigen::Map<const Eigen::VectorXd>(vals.data(), n);
        }
        if (const auto* d = get("d")) cfg.direct_gain = to_double(*d);
        if (const auto* r = get("sample_rate")) {
            cfg.sample_rate = to_double(*r);
            if (!(cfg.sample_rate > 0.0)) fail(r->line, "sample_rate must be positive");
        }
        try {
            cfg.validate();
        } catch (const std::invalid_argument& ex) {
            fail(e->line, ex.what());
        }
        job.config = std::move(cfg);
    }
    return job;
}

JobConfig load_job(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_job(buf.str());
}

}  // namespace ffdn
