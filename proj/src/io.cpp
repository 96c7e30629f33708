#include "odfreg/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "odfreg/errors.hpp"

namespace odf {

// --- config ----------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse_string(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw usage_error("config line " + std::to_string(lineno) +
                        " is not key = value: '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw usage_error("config line " + std::to_string(lineno) +
                        " has an empty key");
    if (c.kv_.count(key))
      throw usage_error("duplicate config key '" + key + "'");
    c.kv_[key] = value;
  }
  return c;
}

Config Config::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

void Config::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

std::string Config::get_string(const std::string& key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end())
    throw usage_error("missing required config key '" + key + "'");
  return it->second;
}

std::string Config::get_string(const std::string& key,
                               const std::string& def) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? def : it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw usage_error("config key '" + key + "' is not a number: '" + v + "'");
  }
}

double Config::get_double(const std::string& key, double def) const {
  return has(key) ? get_double(key) : def;
}

int Config::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(d);
  } catch (const std::exception&) {
    throw usage_error("config key '" + key + "' is not an integer: '" + v +
                      "'");
  }
}

int Config::get_int(const std::string& key, int def) const {
  return has(key) ? get_int(key) : def;
}

// --- binary containers ------------------------------------------------------

namespace {

constexpr std::uint32_t container_version = 1;

// Append-only serializer accumulating the whole file in memory so the CRC
// and the atomic rename cover everything.
struct Writer {
  std::vector<char> buf;

  void bytes(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    buf.insert(buf.end(), c, c + n);
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void i32(std::int32_t v) { bytes(&v, 4); }
  void f64(double v) { bytes(&v, 8); }
  void f64_block(const double* p, std::size_t n) { bytes(p, 8 * n); }
  void i32_block(const int* p, std::size_t n) {
    static_assert(sizeof(int) == 4);
    bytes(p, 4 * n);
  }

  void finish(const std::filesystem::path& path) {
    const auto crc =
        static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(
                                                 buf.data()),
                                         static_cast<uInt>(buf.size())));
    u32(crc);
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw data_error("cannot write " + tmp.string());
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      if (!out) throw data_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }
};

struct Reader {
  std::vector<char> buf;
  std::size_t pos = 0;
  bool swap = false;
  std::string name;

  explicit Reader(const std::filesystem::path& path, const char* magic) {
    name = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("corrupt header: cannot open " + name);
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    in.seekg(0);
    buf.resize(static_cast<std::size_t>(size));
    in.read(buf.data(), size);
    if (!in) throw data_error("corrupt header: short read on " + name);

    if (buf.size() < 13 || std::memcmp(buf.data(), magic, 4) != 0)
      throw data_error("corrupt header: " + name + " is not a " +
                       std::string(magic) + " file");
    pos = 4;
    const std::uint32_t ver_raw = peek_u32(pos);
    pos += 4;
    const std::uint8_t flag = static_cast<std::uint8_t>(buf[pos]);
    pos += 1;
    const bool file_little = flag == 1;
    const bool host_little = std::endian::native == std::endian::little;
    swap = file_little != host_little;
    const std::uint32_t ver = swap ? bswap32(ver_raw) : ver_raw;
    if (ver != container_version)
      throw data_error("version mismatch: " + name + " has version " +
                       std::to_string(ver) + ", expected " +
                       std::to_string(container_version));

    // CRC over everything before the trailing checksum, raw file bytes.
    const std::size_t body = buf.size() - 4;
    std::uint32_t stored;
    std::memcpy(&stored, buf.data() + body, 4);
    if (swap) stored = bswap32(stored);
    const auto computed = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
              static_cast<uInt>(body)));
    if (stored != computed)
      throw data_error("checksum failure: " + name + " is damaged");
    buf.resize(body);
  }

  static std::uint32_t bswap32(std::uint32_t v) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) |
           (v >> 24);
  }
  static std::uint64_t bswap64(std::uint64_t v) {
    return (static_cast<std::uint64_t>(bswap32(static_cast<std::uint32_t>(v)))
            << 32) |
           bswap32(static_cast<std::uint32_t>(v >> 32));
  }

  std::uint32_t peek_u32(std::size_t at) const {
    std::uint32_t v;
    std::memcpy(&v, buf.data() + at, 4);
    return v;
  }

  void need(std::size_t n) {
    if (pos + n > buf.size())
      throw data_error("corrupt header: " + name + " is truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = peek_u32(pos);
    pos += 4;
    return swap ? bswap32(v) : v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    if (swap) v = bswap64(v);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  void f64_block(double* out, std::size_t n) {
    need(8 * n);
    std::memcpy(out, buf.data() + pos, 8 * n);
    pos += 8 * n;
    if (swap) {
      auto* u = reinterpret_cast<std::uint64_t*>(out);
      for (std::size_t i = 0; i < n; ++i) u[i] = bswap64(u[i]);
    }
  }
  void i32_block(int* out, std::size_t n) {
    need(4 * n);
    std::memcpy(out, buf.data() + pos, 4 * n);
    pos += 4 * n;
    if (swap) {
      auto* u = reinterpret_cast<std::uint32_t*>(out);
      for (std::size_t i = 0; i < n; ++i) u[i] = bswap32(u[i]);
    }
  }
  void done() const {
    if (pos != buf.size())
      throw data_error("corrupt header: " + name + " has trailing bytes");
  }
};

void write_magic_and_grid(Writer& w, const char* magic,
                          const GridGeometry& g) {
  w.bytes(magic, 4);
  w.u32(container_version);
  w.u8(std::endian::native == std::endian::little ? 1 : 0);
  for (int a = 0; a < 3; ++a) w.i32(g.dims[a]);
  for (int a = 0; a < 3; ++a) w.f64(g.voxel_size[a]);
}

GridGeometry read_grid(Reader& r) {
  GridGeometry g;
  for (int a = 0; a < 3; ++a) {
    g.dims[a] = r.i32();
    if (g.dims[a] <= 0)
      throw data_error("corrupt header: nonpositive dimension in " + r.name);
  }
  for (int a = 0; a < 3; ++a) {
    g.voxel_size[a] = r.f64();
    if (!(g.voxel_size[a] > 0.0))
      throw data_error("corrupt header: nonpositive voxel size in " + r.name);
  }
  return g;
}

}  // namespace

void save_field(const ODFField& f, const std::filesystem::path& path) {
  validate_field(f);
  Writer w;
  write_magic_and_grid(w, "ODFF", f.grid);
  const int nd = f.sampling->size();
  w.i32(nd);
  w.i32(f.sampling->sh_order());
  w.f64_block(f.sampling->directions().data(), 3 * std::size_t(nd));
  w.f64_block(f.sampling->weights().data(), std::size_t(nd));
  // values are direction-fastest within each voxel: exactly column-major
  w.f64_block(f.values.data(), f.values.size());
  w.finish(path);
}

ODFField load_field(const std::filesystem::path& path) {
  Reader r(path, "ODFF");
  ODFField f;
  f.grid = read_grid(r);
  const int nd = r.i32();
  const int order = r.i32();
  if (nd <= 0 || order < 0)
    throw data_error("corrupt header: bad sampling shape in " + r.name);
  Eigen::Matrix3Xd dirs(3, nd);
  Eigen::VectorXd weights(nd);
  r.f64_block(dirs.data(), 3 * std::size_t(nd));
  r.f64_block(weights.data(), std::size_t(nd));
  f.sampling = SphereSampling::from_samples(std::move(dirs),
                                            std::move(weights), order);
  f.values.resize(nd, f.grid.nvox());
  r.f64_block(f.values.data(), f.values.size());
  r.done();
  validate_field(f);
  return f;
}

void save_deformation(const DeformationBundle& d,
                      const std::filesystem::path& path) {
  const int n = d.grid.nvox();
  if (d.phi.rows() != n || d.phi_inv.rows() != n ||
      static_cast<int>(d.jac.size()) != n)
    throw usage_error("deformation bundle arrays do not match its grid");
  Writer w;
  write_magic_and_grid(w, "ODFD", d.grid);
  w.f64_block(d.phi.data(), d.phi.size());
  w.f64_block(d.phi_inv.data(), d.phi_inv.size());
  for (const auto& j : d.jac) w.f64_block(j.data(), 9);
  w.finish(path);
}

DeformationBundle load_deformation(const std::filesystem::path& path) {
  Reader r(path, "ODFD");
  DeformationBundle d;
  d.grid = read_grid(r);
  const int n = d.grid.nvox();
  d.phi.resize(n, 3);
  d.phi_inv.resize(n, 3);
  d.jac.resize(n);
  r.f64_block(d.phi.data(), d.phi.size());
  r.f64_block(d.phi_inv.data(), d.phi_inv.size());
  for (auto& j : d.jac) r.f64_block(j.data(), 9);
  r.done();
  return d;
}

void save_momentum(const MomentumBundle& m,
                   const std::filesystem::path& path) {
  Writer w;
  write_magic_and_grid(w, "ODFM", m.grid);
  w.f64(m.sigma);
  w.i32(static_cast<int>(m.support.size()));
  w.i32(static_cast<int>(m.alpha.size()));
  w.i32_block(m.support.data(), m.support.size());
  for (const auto& a : m.alpha) {
    if (a.rows() != static_cast<Eigen::Index>(m.support.size()))
      throw usage_error("momentum slice does not match support size");
    w.f64_block(a.data(), a.size());
  }
  w.finish(path);
}

MomentumBundle load_momentum(const std::filesystem::path& path) {
  Reader r(path, "ODFM");
  MomentumBundle m;
  m.grid = read_grid(r);
  m.sigma = r.f64();
  const int ns = r.i32();
  const int nt = r.i32();
  if (ns < 0 || nt <= 0)
    throw data_error("corrupt header: bad momentum shape in " + r.name);
  m.support.resize(ns);
  r.i32_block(m.support.data(), m.support.size());
  m.alpha.assign(nt, Eigen::MatrixX3d(ns, 3));
  for (auto& a : m.alpha) r.f64_block(a.data(), a.size());
  r.done();
  return m;
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw data_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace odf
