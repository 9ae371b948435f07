#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "nmc/mesh.hpp"

namespace nmc {

enum class MeshFormat { Obj, PlyAscii, PlyBinaryLE };

struct LoadOptions {
  /// Fan-triangulate polygons instead of rejecting them.
  bool triangulate = false;
};

/// Messages about discarded attributes (UVs, normals, colors) and similar.
struct LoadResult {
  Mesh mesh;
  std::vector<std::string> warnings;
};

/// Format is picked from the extension (.obj / .ply); PLY flavor comes from its header.
LoadResult load_mesh_with_warnings(const std::filesystem::path& path, const LoadOptions& options = {});
Mesh load_mesh(const std::filesystem::path& path, const LoadOptions& options = {});

LoadResult read_obj(std::istream& in, const LoadOptions& options = {});
LoadResult read_ply(std::istream& in, const LoadOptions& options = {});

void write_obj(std::ostream& out, const Mesh& mesh);
/// Binary PLY stores positions as doubles, so load(save(m)) is bit-exact.
void write_ply(std::ostream& out, const Mesh& mesh, bool binary = true);

void save_mesh(const std::filesystem::path& path, const Mesh& mesh, MeshFormat format = MeshFormat::PlyBinaryLE);
/// .obj -> OBJ, anything else -> binary PLY.
MeshFormat format_for_path(const std::filesystem::path& path);

}  // namespace nmc
