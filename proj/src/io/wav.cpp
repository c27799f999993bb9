#include "cinegen/io/wav.hpp"

#include <cstring>
#include <fstream>

#include "cinegen/core/error.hpp"

namespace cinegen::io {

namespace {

void put_u32(std::ofstream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

void put_u16(std::ofstream& out, uint16_t v) {
  out.write(reinterpret_cast<const char*>(&v), 2);
}

uint32_t get_u32(std::ifstream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

uint16_t get_u16(std::ifstream& in) {
  uint16_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 2);
  return v;
}

}  // namespace

void write_wav(const std::string& path, const WavData& wav) {
  check_as<IoError>(wav.channels >= 1 && wav.sample_rate >= 1,
                    "write_wav: malformed header fields");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check_as<IoError>(out.good(), "write_wav: cannot open " + path);

  const uint32_t data_bytes =
      static_cast<uint32_t>(wav.samples.size() * sizeof(int16_t));
  const uint16_t block_align = static_cast<uint16_t>(wav.channels * 2);

  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, static_cast<uint16_t>(wav.channels));
  put_u32(out, static_cast<uint32_t>(wav.sample_rate));
  put_u32(out, static_cast<uint32_t>(wav.sample_rate) * block_align);
  put_u16(out, block_align);
  put_u16(out, 16);  // bits per sample
  out.write("data", 4);
  put_u32(out, data_bytes);
  out.write(reinterpret_cast<const char*>(wav.samples.data()), data_bytes);
  check_as<IoError>(out.good(), "write_wav: write failed for " + path);
}

WavData read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check_as<IoError>(in.good(), "read_wav: cannot open " + path);
  char tag[5] = {0};
  in.read(tag, 4);
  check_as<IoError>(std::strncmp(tag, "RIFF", 4) == 0, "read_wav: not RIFF: " + path);
  get_u32(in);
  in.read(tag, 4);
  check_as<IoError>(std::strncmp(tag, "WAVE", 4) == 0, "read_wav: not WAVE: " + path);

  WavData wav;
  bool got_fmt = false;
  while (in.read(tag, 4)) {
    const uint32_t size = get_u32(in);
    if (std::strncmp(tag, "fmt ", 4) == 0) {
      const uint16_t format = get_u16(in);
      check_as<IoError>(format == 1, "read_wav: only PCM supported: " + path);
      wav.channels = get_u16(in);
      wav.sample_rate = static_cast<int>(get_u32(in));
      get_u32(in);  // byte rate
      get_u16(in);  // block align
      const uint16_t bits = get_u16(in);
      check_as<IoError>(bits == 16, "read_wav: only 16-bit PCM supported: " + path);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      got_fmt = true;
    } else if (std::strncmp(tag, "data", 4) == 0) {
      check_as<IoError>(got_fmt, "read_wav: data chunk before fmt: " + path);
      wav.samples.resize(size / sizeof(int16_t));
      in.read(reinterpret_cast<char*>(wav.samples.data()), size);
      check_as<IoError>(in.good(), "read_wav: truncated data: " + path);
      return wav;
    } else {
      in.seekg(size, std::ios::cur);
    }
  }
  throw IoError("read_wav: no data chunk in " + path);
}

}  // namespace cinegen::io
