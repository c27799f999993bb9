#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cinegen::io {

/// Uncompressed 16-bit PCM audio, interleaved channels.
struct WavData {
  int sample_rate = 22050;
  int channels = 1;
  std::vector<int16_t> samples;

  double duration_seconds() const {
    return channels > 0 && sample_rate > 0
               ? static_cast<double>(samples.size()) / channels / sample_rate
               : 0.0;
  }
};

void write_wav(const std::string& path, const WavData& wav);
WavData read_wav(const std::string& path);

}  // namespace cinegen::io
