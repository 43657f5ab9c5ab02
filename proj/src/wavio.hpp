#pragma once

#include <string>
#include <vector>

namespace ffdn {

// Mono 32-bit float WAV.
void write_wav(const std::string& path, const std::vector<double>& samples, double sample_rate);
std::vector<double> read_wav(const std::string& path, double* sample_rate);

void write_ir_csv(const std::string& path, const std::vector<double>& samples);

}  // namespace ffdn
