#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>

#include "asab/point_cloud.hpp"
#include "asab/shading.hpp"

namespace asab {

enum class CloudFormat { PlyAscii, PcdAscii };

/// Parse failure with the 1-based line it was detected on (0 if not line specific).
class CloudParseError : public std::runtime_error {
 public:
  CloudParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Picks the format from the extension (.ply / .pcd). Throws CloudParseError otherwise.
CloudFormat format_from_path(const std::filesystem::path& path);

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_cloud(const std::filesystem::path& path);
PointCloud parse_cloud(std::istream& in, CloudFormat format, const std::string& frame_id = "map");

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud, CloudFormat format);
void write_cloud(std::ostream& out, const PointCloud& cloud, CloudFormat format);

/// PLY of the kept points only, colored by the shading result.
void write_shaded_ply(std::ostream& out, const PointCloud& cloud,
                      std::span<const ShadedPoint> shaded);

}  // namespace asab
