#include "glint/image.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "glint/error.hpp"

namespace glint {

namespace {

std::uint8_t quantize(double linear) {
  const double s = linear_to_srgb(std::clamp(linear, 0.0, 1.0));
  return static_cast<std::uint8_t>(std::lround(s * 255.0));
}

std::string lower_extension(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

// Next whitespace-delimited token in a netpbm-style header, skipping comments.
std::string header_token(std::istream& in) {
  std::string tok;
  for (int c; (c = in.get()) != EOF;) {
    if (c == '#') {
      in.ignore(1 << 20, '\n');
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(char(c));
  }
  return tok;
}

int header_int(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = header_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used == tok.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw LoadError("malformed image header in " + path.string());
}

float swap_bytes(float f) { return std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(f))); }

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

double linear_to_srgb(double v) {
  if (v <= 0.0031308) return 12.92 * v;
  return 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

double srgb_to_linear(double v) {
  if (v <= 0.04045) return v / 12.92;
  return std::pow((v + 0.055) / 1.055, 2.4);
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 3 && img.channels != 1) throw UsageError("PPM output needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<std::uint8_t> row(std::size_t(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) row[3 * x + c] = quantize(img.at(x, y, img.channels == 3 ? c : 0));
    out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
  }
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  if (header_token(in) != "P6") throw LoadError("not a binary PPM: " + path.string());
  const int w = header_int(in, path), h = header_int(in, path), maxval = header_int(in, path);
  if (maxval != 255) throw LoadError("only 8-bit PPM is supported: " + path.string());
  Image img(w, h, 3);
  std::vector<std::uint8_t> bytes(img.data.size());
  in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
  if (in.gcount() != std::streamsize(bytes.size())) throw LoadError("truncated PPM: " + path.string());
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = srgb_to_linear(bytes[i] / 255.0);
  return img;
}

void write_pfm(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 3 && img.channels != 1) throw UsageError("PFM output needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << (img.channels == 3 ? "PF" : "Pf") << '\n' << img.width << ' ' << img.height << "\n-1.0\n";
  std::vector<float> row(std::size_t(img.width) * img.channels);
  // Rows are stored bottom to top.
  for (int y = img.height - 1; y >= 0; --y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) row[std::size_t(x) * img.channels + c] = float(img.at(x, y, c));
    if constexpr (std::endian::native == std::endian::big) {
      for (float& f : row) f = swap_bytes(f);
    }
    out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
  }
}

Image read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  const std::string magic = header_token(in);
  int channels;
  if (magic == "PF")
    channels = 3;
  else if (magic == "Pf")
    channels = 1;
  else
    throw LoadError("not a PFM file: " + path.string());
  const int w = header_int(in, path), h = header_int(in, path);
  const std::string scale_tok = header_token(in);
  double scale;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw LoadError("malformed PFM scale in " + path.string());
  }
  const bool little = scale < 0;
  Image img(w, h, channels);
  std::vector<float> row(std::size_t(w) * channels);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
    if (in.gcount() != std::streamsize(row.size() * sizeof(float)))
      throw LoadError("truncated PFM: " + path.string());
    for (std::size_t i = 0; i < row.size(); ++i) {
      float f = row[i];
      if (little != (std::endian::native == std::endian::little))
        f = swap_bytes(f);
      img.data[(std::size_t(y) * w) * channels + i] = f;
    }
  }
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 3 && img.channels != 1) throw UsageError("PNG output needs 1 or 3 channels");
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw LoadError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw LoadError("libpng initialization failed");
  }
  std::vector<std::uint8_t> rows(img.data.size() / img.channels * 3);
  for (std::size_t p = 0; p < img.pixel_count(); ++p)
    for (int c = 0; c < 3; ++c) rows[3 * p + c] = quantize(img.data[p * img.channels + (img.channels == 3 ? c : 0)]);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw LoadError("PNG encoding failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) png_write_row(png, rows.data() + std::size_t(y) * img.width * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw LoadError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw LoadError("libpng initialization failed");
  }
  Image img;
  std::vector<std::uint8_t> bytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError("PNG decoding failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int w = int(png_get_image_width(png, info)), h = int(png_get_image_height(png, info));
  bytes.resize(std::size_t(w) * h * 3);
  for (int y = 0; y < h; ++y) png_read_row(png, bytes.data() + std::size_t(y) * w * 3, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  img = Image(w, h, 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = srgb_to_linear(bytes[i] / 255.0);
  return img;
}

Image read_image(const std::filesystem::path& path) {
  const std::string e = lower_extension(path);
  if (e == ".ppm") return read_ppm(path);
  if (e == ".png") return read_png(path);
  if (e == ".pfm") return read_pfm(path);
  throw LoadError("unsupported image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const Image& img) {
  const std::string e = lower_extension(path);
  if (e == ".ppm") return write_ppm(path, img);
  if (e == ".png") return write_png(path, img);
  if (e == ".pfm") return write_pfm(path, img);
  throw UsageError("unsupported image format: " + path.string());
}

}  // namespace glint
