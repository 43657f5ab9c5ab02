#include "wavio.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ffdn {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                 static_cast<char>(v >> 24)};
    os.write(b, 4);
}

void put_u16(std::ostream& os, std::uint16_t v) {
    char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
    os.write(b, 2);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

}  // namespace

void write_wav(const std::string& path, const std::vector<double>& samples, double sample_rate) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    const std::uint32_t rate = static_cast<std::uint32_t>(sample_rate);
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 4);

    os.write("RIFF", 4);
    put_u32(os, 36 + data_bytes);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    put_u32(os, 16);
    put_u16(os, 3);  // IEEE float
    put_u16(os, 1);  // mono
    put_u32(os, rate);
    put_u32(os, rate * 4);
    put_u16(os, 4);
    put_u16(os, 32);
    os.write("data", 4);
    put_u32(os, data_bytes);
    for (double s : samples) {
        const float f = static_cast<float>(s);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(os, bits);
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<double> read_wav(const std::string& path, double* sample_rate) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char tag[5] = {0};
    is.read(tag, 4);
    if (std::strncmp(tag, "RIFF", 4) != 0) throw std::runtime_error("not a RIFF file: " + path);
    get_u32(is);
    is.read(tag, 4);
    if (std::strncmp(tag, "WAVE", 4) != 0) throw std::runtime_error("not a WAVE file: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::vector<double> samples;
    while (is.read(tag, 4)) {
        const std::uint32_t chunk = get_u32(is);
        if (std::strncmp(tag, "fmt ", 4) == 0) {
            format = get_u16(is);
            channels = get_u16(is);
            rate = get_u32(is);
            get_u32(is);
            get_u16(is);
            bits = get_u16(is);
            is.ignore(chunk > 16 ? chunk - 16 : 0);
        } else if (std::strncmp(tag, "data", 4) == 0) {
            if (format != 3 || bits != 32)
                throw std::runtime_error("only 32-bit float WAV supported: " + path);
            const std::uint32_t frames = chunk / (4 * channels);
            samples.resize(frames);
            for (std::uint32_t k = 0; k < frames; ++k) {
                float f = 0.0f;
                for (int c = 0; c < channels; ++c) {
                    const std::uint32_t raw = get_u32(is);
                    if (c == 0) std::memcpy(&f, &raw, 4);
                }
                samples[k] = f;
            }
            break;
        } else {
            is.ignore(chunk + (chunk & 1));
        }
    }
    if (sample_rate) *sample_rate = rate;
    return samples;
}

void write_ir_csv(const std::string& path, const std::vector<double>& samples) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "n,amplitude\n";
    for (std::size_t k = 0; k < samples.size(); ++k) os << k << ',' << samples[k] << '\n';
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace ffdn
