#include "physdoa/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "physdoa/common.hpp"

namespace physdoa {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

namespace {

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated WAV file");
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

Audio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) throw IoError(path.string() + ": not a RIFF file");
  read_le<std::uint32_t>(in);
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) throw IoError(path.string() + ": not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (true) {
    in.read(tag, 4);
    if (!in) throw IoError(path.string() + ": no data chunk");
    const auto size = read_le<std::uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      rate = read_le<std::uint32_t>(in);
      read_le<std::uint32_t>(in);
      read_le<std::uint16_t>(in);
      bits = read_le<std::uint16_t>(in);
      std::uint32_t consumed = 16;
      if (format == 0xFFFE && size >= 26) {
        // WAVE_FORMAT_EXTENSIBLE: the real format code leads the subformat GUID.
        read_le<std::uint16_t>(in);
        read_le<std::uint16_t>(in);
        read_le<std::uint32_t>(in);
        format = read_le<std::uint16_t>(in);
        consumed = 26;
      }
      if (size > consumed) in.seekg(size - consumed + (size & 1u), std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt || channels == 0) throw IoError(path.string() + ": data before fmt");
      const std::size_t bytes_per = bits / 8;
      const std::size_t frames = size / (bytes_per * channels);
      std::vector<char> raw(frames * bytes_per * channels);
      in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
      if (!in) throw IoError(path.string() + ": truncated data chunk");
      Audio a;
      a.sample_rate = rate;
      a.samples.resize(channels, static_cast<Eigen::Index>(frames));
      const char* p = raw.data();
      for (std::size_t n = 0; n < frames; ++n) {
        for (std::size_t c = 0; c < channels; ++c, p += bytes_per) {
          double v = 0.0;
          if (bits == 16) {
            std::int16_t s;
            std::memcpy(&s, p, 2);
            v = s / 32768.0;
          } else if (bits == 24) {
            std::int32_t s = (static_cast<unsigned char>(p[0]) | (static_cast<unsigned char>(p[1]) << 8) |
                              (static_cast<signed char>(p[2]) << 16));
            v = s / 8388608.0;
          } else if (bits == 32 && format == 3) {
            float f;
            std::memcpy(&f, p, 4);
            v = f;
          } else if (bits == 32) {
            std::int32_t s;
            std::memcpy(&s, p, 4);
            v = s / 2147483648.0;
          } else {
            throw IoError(path.string() + ": unsupported bit depth " + std::to_string(bits));
          }
          a.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(n)) = v;
        }
      }
      return a;
    } else {
      in.seekg(size + (size & 1u), std::ios::cur);
    }
  }
}

void write_wav(const std::filesystem::path& path, const Audio& audio, WavFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const auto channels = static_cast<std::uint16_t>(audio.samples.rows());
  const auto frames = static_cast<std::uint32_t>(audio.samples.cols());
  const std::uint16_t bits = format == WavFormat::Pcm16 ? 16 : 32;
  const std::uint32_t data_bytes = frames * channels * (bits / 8);
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));

  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, format == WavFormat::Pcm16 ? 1 : 3);
  write_le<std::uint16_t>(out, channels);
  write_le<std::uint32_t>(out, rate);
  write_le<std::uint32_t>(out, rate * channels * (bits / 8));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  write_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);
  for (std::uint32_t n = 0; n < frames; ++n) {
    for (std::uint16_t c = 0; c < channels; ++c) {
      const double v = audio.samples(c, n);
      if (format == WavFormat::Pcm16) {
        const double s = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
        write_le<std::int16_t>(out, static_cast<std::int16_t>(s));
      } else {
        write_le<float>(out, static_cast<float>(v));
      }
    }
  }
}

}  // namespace physdoa
