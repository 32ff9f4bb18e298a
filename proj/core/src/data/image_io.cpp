#include "fewshot/data/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fewshot/common/error.hpp"

namespace fewshot {
namespace {

bool has_png_signature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

RawImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot decode image " + path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode image " + path.string() + ": " + msg);
  }
  RawImage out;
  out.shape = {color ? 3u : 1u, image.height, image.width};
  const std::size_t c = out.shape.channels;
  const std::size_t plane = out.shape.height * out.shape.width;
  out.pixels.resize(c * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      out.pixels[ch * plane + i] = static_cast<float>(buffer[i * c + ch]) / 255.0f;
    }
  }
  return out;
}

// Reads the next header token, skipping whitespace and '#' comments.
bool next_token(std::istream& in, std::string& token) {
  token.clear();
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (!std::isspace(ch)) break;
  }
  if (ch == EOF) return false;
  do {
    token.push_back(static_cast<char>(ch));
  } while ((ch = in.get()) != EOF && !std::isspace(ch));
  return true;
}

RawImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::string magic, tw, th, tmax;
  auto fail = [&](const std::string& why) {
    return IoError("cannot decode image " + path.string() + ": " + why);
  };
  if (!next_token(in, magic) || magic.size() != 2 || magic[0] != 'P') throw fail("unknown format");
  const char kind = magic[1];
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6') throw fail("unsupported PNM type");
  if (!next_token(in, tw) || !next_token(in, th) || !next_token(in, tmax)) {
    throw fail("truncated header");
  }
  std::size_t width = 0, height = 0;
  unsigned maxval = 0;
  try {
    width = std::stoul(tw);
    height = std::stoul(th);
    maxval = static_cast<unsigned>(std::stoul(tmax));
  } catch (const std::exception&) {
    throw fail("bad header");
  }
  if (width == 0 || height == 0 || maxval == 0 || maxval > 65535) throw fail("bad header values");
  const std::size_t channels = (kind == '3' || kind == '6') ? 3 : 1;
  const std::size_t plane = width * height;
  const std::size_t count = plane * channels;
  std::vector<unsigned> raw(count);
  if (kind == '5' || kind == '6') {
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> data(count * bytes);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (static_cast<std::size_t>(in.gcount()) != data.size()) throw fail("truncated pixel data");
    for (std::size_t i = 0; i < count; ++i) {
      raw[i] = bytes == 2 ? (data[2 * i] << 8) | data[2 * i + 1] : data[i];
    }
  } else {
    std::string tok;
    for (std::size_t i = 0; i < count; ++i) {
      if (!next_token(in, tok)) throw fail("truncated pixel data");
      try {
        raw[i] = static_cast<unsigned>(std::stoul(tok));
      } catch (const std::exception&) {
        throw fail("bad pixel value");
      }
    }
  }
  RawImage out;
  out.shape = {channels, height, width};
  out.pixels.resize(count);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t ch = 0; ch < channels; ++ch) {
      out.pixels[ch * plane + i] =
          static_cast<float>(std::min(raw[i * channels + ch], maxval)) / static_cast<float>(maxval);
    }
  }
  return out;
}

}  // namespace

RawImage read_image(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("cannot open image " + path.string());
  if (has_png_signature(path)) return read_png(path);
  return read_pnm(path);
}

void write_png(const std::filesystem::path& path, const ImageShape& shape,
               const std::vector<float>& pixels) {
  if (shape.channels != 1 && shape.channels != 3) {
    throw ConfigError("write_png supports 1 or 3 channels, got " + std::to_string(shape.channels));
  }
  const std::size_t plane = shape.height * shape.width;
  std::vector<png_byte> buffer(plane * shape.channels);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t ch = 0; ch < shape.channels; ++ch) {
      const float v = std::clamp(pixels[ch * plane + i], 0.0f, 1.0f);
      buffer[i * shape.channels + ch] = static_cast<png_byte>(std::lround(v * 255.0f));
    }
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(shape.width);
  image.height = static_cast<png_uint_32>(shape.height);
  image.format = shape.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot write image " + path.string() + ": " + image.message);
  }
}

std::vector<float> resize_image(const RawImage& image, const ImageShape& target) {
  const auto& src = image.shape;
  const std::size_t src_plane = src.height * src.width;
  std::vector<float> out(target.pixel_count());
  const double sy = static_cast<double>(src.height) / static_cast<double>(target.height);
  const double sx = static_cast<double>(src.width) / static_cast<double>(target.width);
  auto sample = [&](std::size_t ch, double fy, double fx) {
    const double y = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
    const double x = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
    const auto y0 = static_cast<std::size_t>(y);
    const auto x0 = static_cast<std::size_t>(x);
    const std::size_t y1 = std::min(y0 + 1, src.height - 1);
    const std::size_t x1 = std::min(x0 + 1, src.width - 1);
    const double wy = y - static_cast<double>(y0);
    const double wx = x - static_cast<double>(x0);
    const float* p = image.pixels.data() + ch * src_plane;
    return (1 - wy) * ((1 - wx) * p[y0 * src.width + x0] + wx * p[y0 * src.width + x1]) +
           wy * ((1 - wx) * p[y1 * src.width + x0] + wx * p[y1 * src.width + x1]);
  };
  for (std::size_t c = 0; c < target.channels; ++c) {
    for (std::size_t y = 0; y < target.height; ++y) {
      const double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
      for (std::size_t x = 0; x < target.width; ++x) {
        const double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
        double v = 0.0;
        if (src.channels == target.channels) {
          v = sample(c, fy, fx);
        } else if (src.channels == 1) {
          v = sample(0, fy, fx);
        } else {
          for (std::size_t sc = 0; sc < src.channels; ++sc) v += sample(sc, fy, fx);
          v /= static_cast<double>(src.channels);
        }
        out[(c * target.height + y) * target.width + x] = static_cast<float>(v);
      }
    }
  }
  return out;
}

}  // namespace fewshot
