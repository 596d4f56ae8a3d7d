#include "dreampipe/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace dreampipe {
namespace {

std::uint32_t read_u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

png_uint_32 png_format_for(int channels) {
  switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 2: return PNG_FORMAT_GA;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
    default: fail(ErrorKind::InvalidArgument, "PNG supports 1-4 channels");
  }
}

}  // namespace

Image8 decode_png(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0, ErrorKind::Format,
          "not a PNG stream");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    fail(ErrorKind::Format, std::string("PNG: ") + img.message);
  // The simplified reader reports 16-bit sources as linear.
  if (img.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&img);
    fail(ErrorKind::Format, "unsupported PNG bit depth 16 (only 8-bit is supported)");
  }
  int channels = (img.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
  if (img.format & PNG_FORMAT_FLAG_ALPHA) ++channels;
  img.format = png_format_for(channels);
  Image8 image(static_cast<int>(img.width), static_cast<int>(img.height), channels);
  if (!png_image_finish_read(&img, nullptr, image.data().data(), 0, nullptr))
    fail(ErrorKind::Format, std::string("PNG: ") + img.message);
  return image;
}

std::vector<std::uint8_t> encode_png(const Image8& image) {
  require(!image.empty(), ErrorKind::InvalidArgument, "cannot encode an empty image");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = png_format_for(image.channels());
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.data().data(), 0, nullptr))
    fail(ErrorKind::Format, std::string("PNG: ") + img.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.data().data(), 0, nullptr))
    fail(ErrorKind::Format, std::string("PNG: ") + img.message);
  out.resize(size);
  return out;
}

Image8 load_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

void save_png(const std::filesystem::path& path, const Image8& image) {
  write_file(path, encode_png(image));
}

ImageF decode_pfm(std::span<const std::uint8_t> bytes) {
  // Header: three whitespace-separated ASCII tokens after the magic, then a
  // single whitespace byte before the raster.
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) ++pos;
    require(pos < bytes.size(), ErrorKind::Format, "corrupt PFM header");
    return std::string(reinterpret_cast<const char*>(bytes.data()) + start, pos - start);
  };
  const std::string magic = next_token();
  require(magic == "Pf" || magic == "PF", ErrorKind::Format, "corrupt PFM header (bad magic)");
  const int channels = magic == "PF" ? 3 : 1;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(next_token());
    height = std::stoi(next_token());
    scale = std::stod(next_token());
  } catch (const std::logic_error&) {
    fail(ErrorKind::Format, "corrupt PFM header");
  }
  require(width > 0 && height > 0 && scale != 0.0, ErrorKind::Format, "corrupt PFM header");
  ++pos;  // single separator byte
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  require(bytes.size() >= pos + count * 4, ErrorKind::Format, "truncated PFM raster");

  const bool little = scale < 0.0;
  ImageF image(width, height, channels);
  const std::uint8_t* src = bytes.data() + pos;
  for (int fy = 0; fy < height; ++fy) {
    const int y = height - 1 - fy;
    auto row = image.row(y);
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::uint8_t b[4];
      std::memcpy(b, src, 4);
      src += 4;
      if (!little) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
      row[i] = std::bit_cast<float>(read_u32_le(b));
    }
  }
  return image;
}

std::vector<std::uint8_t> encode_pfm(const ImageF& image) {
  require(image.channels() == 1 || image.channels() == 3, ErrorKind::InvalidArgument,
          "PFM supports 1 or 3 channels");
  std::ostringstream header;
  header << (image.channels() == 3 ? "PF" : "Pf") << '\n'
         << image.width() << ' ' << image.height() << '\n'
         << "-1.0\n";
  const std::string h = header.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  out.reserve(out.size() + image.data().size() * 4);
  for (int fy = 0; fy < image.height(); ++fy) {
    const auto row = image.row(image.height() - 1 - fy);
    for (float v : row) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
    }
  }
  return out;
}

ImageF load_pfm(const std::filesystem::path& path) { return decode_pfm(read_file(path)); }

void save_pfm(const std::filesystem::path& path, const ImageF& image) {
  write_file(path, encode_pfm(image));
}

MaskImage load_mask(const std::filesystem::path& path, MaskSpace space) {
  const std::string ext = path.extension().string();
  if (ext == ".pfm") {
    ImageF img = load_pfm(path);
    require(img.channels() == 1, ErrorKind::Format, "mask PFM must have one channel");
    MaskImage mask;
    mask.values = std::move(img);
    mask.space = space;
    for (float& v : mask.values.data()) v = std::clamp(v, 0.0f, 1.0f);
    return mask;
  }
  Image8 img = load_png(path);
  Image8 gray(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) gray(x, y) = img(x, y, 0);
  return mask_from_8bit(gray, space);
}

void save_mask_png(const std::filesystem::path& path, const MaskImage& mask) {
  save_png(path, mask_to_8bit(mask));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace dreampipe
