#include "dreampipe/mesh_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <spdlog/spdlog.h>

#include "dreampipe/image_io.hpp"

namespace dreampipe {
namespace {

struct Corner {
  long v = 0;
  long vt = 0;
  long vn = 0;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view tok, const std::string& where) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  require(ec == std::errc() && ptr == tok.data() + tok.size(), ErrorKind::Format,
          where + ": bad number '" + std::string(tok) + "'");
  return value;
}

long parse_index(std::string_view tok, const std::string& where) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  require(ec == std::errc() && ptr == tok.data() + tok.size() && value != 0, ErrorKind::Format,
          where + ": bad index '" + std::string(tok) + "'");
  return value;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

Corner parse_corner(std::string_view tok, const std::string& where) {
  Corner c;
  const std::size_t s1 = tok.find('/');
  c.v = parse_index(tok.substr(0, s1), where);
  if (s1 == std::string_view::npos) return c;
  const std::string_view rest = tok.substr(s1 + 1);
  const std::size_t s2 = rest.find('/');
  const std::string_view vt = rest.substr(0, s2);
  if (!vt.empty()) c.vt = parse_index(vt, where);
  if (s2 != std::string_view::npos && s2 + 1 < rest.size())
    c.vn = parse_index(rest.substr(s2 + 1), where);
  return c;
}

std::uint32_t resolve(long idx, std::size_t count, const std::string& where) {
  const long resolved = idx > 0 ? idx - 1 : static_cast<long>(count) + idx;
  require(resolved >= 0 && static_cast<std::size_t>(resolved) < count, ErrorKind::Format,
          where + ": index out of range");
  return static_cast<std::uint32_t>(resolved);
}

// material name -> map_Kd path
std::map<std::string, std::filesystem::path> read_mtl(const std::filesystem::path& path) {
  std::map<std::string, std::filesystem::path> maps;
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open material library " + path.string());
  std::string line;
  std::string current;
  while (std::getline(in, line)) {
    const std::string_view l = trim(line);
    if (l.rfind("newmtl", 0) == 0) {
      current = std::string(trim(l.substr(6)));
    } else if (l.rfind("map_Kd", 0) == 0) {
      // The file name is the last token; options before it are ignored.
      const auto toks = split_ws(l.substr(6));
      require(!toks.empty(), ErrorKind::Format, path.string() + ": empty map_Kd");
      maps[current] = path.parent_path() / std::string(toks.back());
    }
  }
  return maps;
}

Image8 to_rgb(const Image8& img) {
  if (img.channels() == 3) return img;
  Image8 rgb(img.width(), img.height(), 3);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c)
        rgb(x, y, c) = img.channels() >= 3 ? img(x, y, c) : img(x, y, 0);
  return rgb;
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

TexturedMesh load_mesh(const std::filesystem::path& path, const MeshLoadOptions& options) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open mesh " + path.string());

  TexturedMesh mesh;
  std::vector<std::array<Corner, 3>> faces;
  std::vector<std::string> mtllibs;
  std::vector<std::string> used_materials;
  std::string current_material;
  std::string line;
  std::size_t line_no = 0;
  bool all_have_normals = true;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    std::string_view l = trim(line);
    if (l.empty() || l[0] == '#') continue;
    const auto toks = split_ws(l);
    const std::string_view key = toks[0];
    if (key == "v") {
      require(toks.size() >= 4, ErrorKind::Format, where + ": vertex needs 3 coordinates");
      mesh.positions.emplace_back(parse_double(toks[1], where), parse_double(toks[2], where),
                                  parse_double(toks[3], where));
    } else if (key == "vt") {
      require(toks.size() >= 3, ErrorKind::Format, where + ": vt needs 2 coordinates");
      mesh.uvs.emplace_back(parse_double(toks[1], where), parse_double(toks[2], where));
    } else if (key == "vn") {
      require(toks.size() >= 4, ErrorKind::Format, where + ": vn needs 3 coordinates");
      mesh.normals.emplace_back(parse_double(toks[1], where), parse_double(toks[2], where),
                                parse_double(toks[3], where));
    } else if (key == "f") {
      require(toks.size() >= 4, ErrorKind::Format, where + ": face needs at least 3 corners");
      std::vector<Corner> corners;
      for (std::size_t i = 1; i < toks.size(); ++i) corners.push_back(parse_corner(toks[i], where));
      for (const Corner& c : corners) {
        require(c.vt != 0, ErrorKind::Format, where + ": triangle is missing texture coordinates");
        if (c.vn == 0) all_have_normals = false;
      }
      for (std::size_t i = 1; i + 1 < corners.size(); ++i)
        faces.push_back({corners[0], corners[i], corners[i + 1]});
      if (std::find(used_materials.begin(), used_materials.end(), current_material) ==
          used_materials.end())
        used_materials.push_back(current_material);
    } else if (key == "mtllib") {
      require(toks.size() >= 2, ErrorKind::Format, where + ": mtllib without file");
      mtllibs.emplace_back(trim(l.substr(6)));
    } else if (key == "usemtl") {
      current_material = toks.size() >= 2 ? std::string(toks[1]) : std::string();
    }
  }
  require(!faces.empty(), ErrorKind::Format, path.string() + ": no faces");

  for (const auto& face : faces) {
    IndexTriple p{};
    IndexTriple t{};
    IndexTriple n{};
    for (int k = 0; k < 3; ++k) {
      p[k] = resolve(face[k].v, mesh.positions.size(), path.string());
      t[k] = resolve(face[k].vt, mesh.uvs.size(), path.string());
      if (all_have_normals) n[k] = resolve(face[k].vn, mesh.normals.size(), path.string());
    }
    mesh.position_indices.push_back(p);
    mesh.uv_indices.push_back(t);
    mesh.normal_indices.push_back(n);
  }
  if (all_have_normals) {
    for (Vec3& nrm : mesh.normals) {
      const double len = nrm.norm();
      require(len > 0.0, ErrorKind::Format, path.string() + ": zero-length vn");
      // Already-unit normals are kept verbatim so save/load stays bit-exact.
      if (std::abs(len - 1.0) > 1e-12) nrm /= len;
    }
  } else {
    compute_vertex_normals(mesh);
  }

  std::map<std::string, std::filesystem::path> maps;
  for (const std::string& lib : mtllibs) maps.merge(read_mtl(path.parent_path() / lib));
  std::vector<std::filesystem::path> textures;
  for (const std::string& m : used_materials) {
    const auto it = maps.find(m);
    if (it == maps.end()) continue;
    if (std::find(textures.begin(), textures.end(), it->second) == textures.end())
      textures.push_back(it->second);
  }
  require(textures.size() <= 1, ErrorKind::Format,
          path.string() + ": multiple texture atlases are not supported");
  if (textures.empty()) {
    mesh.texture = Image8(options.default_atlas_size, options.default_atlas_size, 3, 128);
  } else {
    mesh.texture = to_rgb(load_png(textures.front()));
  }
  mesh.validate();
  return mesh;
}

void save_mesh_with_texture(const TexturedMesh& mesh, const Image8& texture,
                            const MaskImage* alpha_mask, const std::filesystem::path& obj_path) {
  require(texture.channels() == 3, ErrorKind::InvalidArgument, "texture must be RGB");
  require(texture.width() == mesh.atlas_width() && texture.height() == mesh.atlas_height(),
          ErrorKind::InvalidArgument, "texture dimensions do not match the mesh atlas");
  if (alpha_mask) {
    require(alpha_mask->width() == texture.width() && alpha_mask->height() == texture.height(),
            ErrorKind::InvalidArgument, "alpha mask dimensions do not match the texture");
  }
  const std::string stem = obj_path.stem().string();
  const std::filesystem::path dir = obj_path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);

  if (alpha_mask) {
    Image8 rgba(texture.width(), texture.height(), 4);
    for (int y = 0; y < texture.height(); ++y)
      for (int x = 0; x < texture.width(); ++x) {
        for (int c = 0; c < 3; ++c) rgba(x, y, c) = texture(x, y, c);
        const float a = std::clamp((*alpha_mask)(x, y), 0.0f, 1.0f);
        rgba(x, y, 3) = static_cast<std::uint8_t>(std::lround(a * 255.0f));
      }
    save_png(dir / (stem + ".png"), rgba);
  } else {
    save_png(dir / (stem + ".png"), texture);
  }

  std::string mtl = "newmtl atlas\nKd 1 1 1\nmap_Kd " + stem + ".png\n";
  if (alpha_mask) mtl += "map_d " + stem + ".png\n";
  write_file(dir / (stem + ".mtl"),
             std::span(reinterpret_cast<const std::uint8_t*>(mtl.data()), mtl.size()));

  std::string obj;
  obj.reserve(64 * (mesh.positions.size() + mesh.uvs.size() + mesh.normals.size()) +
              48 * mesh.triangle_count());
  obj += "mtllib " + stem + ".mtl\n";
  auto emit3 = [&obj](const char* tag, const Vec3& v) {
    obj += tag;
    for (int k = 0; k < 3; ++k) {
      obj += ' ';
      append_number(obj, v[k]);
    }
    obj += '\n';
  };
  for (const Vec3& p : mesh.positions) emit3("v", p);
  for (const Vec2& t : mesh.uvs) {
    obj += "vt ";
    append_number(obj, t.x());
    obj += ' ';
    append_number(obj, t.y());
    obj += '\n';
  }
  for (const Vec3& n : mesh.normals) emit3("vn", n);
  obj += "usemtl atlas\n";
  for (std::size_t i = 0; i < mesh.triangle_count(); ++i) {
    obj += 'f';
    for (int k = 0; k < 3; ++k) {
      obj += ' ';
      obj += std::to_string(mesh.position_indices[i][k] + 1);
      obj += '/';
      obj += std::to_string(mesh.uv_indices[i][k] + 1);
      obj += '/';
      obj += std::to_string(mesh.normal_indices[i][k] + 1);
    }
    obj += '\n';
  }
  write_file(obj_path, std::span(reinterpret_cast<const std::uint8_t*>(obj.data()), obj.size()));
}

MaskImage window_alpha_mask(int width, int height, std::span<const UvRect> windows) {
  MaskImage mask(width, height, MaskSpace::Uv, 1.0f);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const Vec2 uv = texel_center_uv(x, y, width, height);
      for (const UvRect& r : windows) {
        if (uv.x() >= r.u0 && uv.x() < r.u1 && uv.y() >= r.v0 && uv.y() < r.v1) {
          mask(x, y) = 0.0f;
          break;
        }
      }
    }
  return mask;
}

}  // namespace dreampipe
