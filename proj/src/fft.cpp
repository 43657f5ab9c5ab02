#include "fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>
#include <unordered_map>

namespace ffdn::fft {

namespace {

// fftw plan creation is not thread-safe; execution via fftw_execute_dft is.
std::mutex plan_mutex;

fftw_plan plan_for(std::size_t n, int sign) {
    struct Key {
        std::size_t n;
        int sign;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            return std::hash<std::size_t>()(k.n) * 31 + std::hash<int>()(k.sign);
        }
    };
    static std::unordered_map<Key, fftw_plan, KeyHash> cache;

    std::lock_guard lock(plan_mutex);
    Key key{n, sign};
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    std::vector<cplx> scratch(n);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign, FFTW_ESTIMATE);
    if (!plan) throw std::runtime_error("fftw plan creation failed");
    cache.emplace(key, plan);
    return plan;
}

}  // namespace

void forward(std::vector<cplx>& x) {
    if (x.empty()) return;
    fftw_plan plan = plan_for(x.size(), FFTW_FORWARD);
    auto* buf = reinterpret_cast<fftw_complex*>(x.data());
    fftw_execute_dft(plan, buf, buf);
}

void inverse(std::vector<cplx>& x) {
    if (x.empty()) return;
    fftw_plan plan = plan_for(x.size(), FFTW_BACKWARD);
    auto* buf = reinterpret_cast<fftw_complex*>(x.data());
    fftw_execute_dft(plan, buf, buf);
    const double scale = 1.0 / static_cast<double>(x.size());
    for (auto& v : x) v *= scale;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace ffdn::fft
