#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "odfreg/field.hpp"

namespace odf {

// Key=value configuration text: one pair per line, '#' comments, blank lines
// ignored. Duplicate keys are rejected. Typed getters throw usage_error
// naming the missing or malformed key.
class Config {
 public:
  static Config parse_file(const std::filesystem::path& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double def) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int def) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

// ODFF volume container: header (magic, version, endianness flag, dims,
// voxel size, direction table, weights), float64 values voxel-major with
// directions fastest, trailing CRC32 of everything before it. Writers emit
// native byte order; readers swap foreign-endian files. save is atomic
// (temp file + rename). load failures raise data_error whose message starts
// with "corrupt header", "version mismatch" or "checksum failure".
void save_field(const ODFField& f, const std::filesystem::path& path);
ODFField load_field(const std::filesystem::path& path);

// Endpoint of a registration: forward map, its inverse, per-voxel index-space
// Jacobians. Same container conventions with magic "ODFD".
struct DeformationBundle {
  GridGeometry grid;
  Eigen::MatrixX3d phi;
  Eigen::MatrixX3d phi_inv;
  std::vector<Eigen::Matrix3d> jac;
};
void save_deformation(const DeformationBundle& d,
                      const std::filesystem::path& path);
DeformationBundle load_deformation(const std::filesystem::path& path);

// Momentum vectors on the foreground support, all timesteps. Magic "ODFM".
struct MomentumBundle {
  GridGeometry grid;
  double sigma = 0.0;          // kernel width, voxel units
  std::vector<int> support;    // linear voxel indices carrying momentum
  std::vector<Eigen::MatrixX3d> alpha;  // one n_support x 3 slice per step
};
void save_momentum(const MomentumBundle& m, const std::filesystem::path& path);
MomentumBundle load_momentum(const std::filesystem::path& path);

// Atomic text write shared by manifests, reports and traces.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& text);

}  // namespace odf
