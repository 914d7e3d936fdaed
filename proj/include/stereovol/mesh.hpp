#pragma once

#include <array>
#include <filesystem>
#include <string_view>
#include <vector>

namespace stereovol {

struct TriangleMesh {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<int, 3>> faces; // zero-based, counter-clockwise seen from outside
};

/// Parses `v` and `f` records of an OBJ file; polygons are fan-triangulated.
TriangleMesh parse_obj(std::string_view text);
TriangleMesh load_obj(const std::filesystem::path& path);

/// Throws OpenMesh unless every undirected edge is shared by exactly two faces
/// that traverse it in opposite directions.
void check_closed_oriented(const TriangleMesh& mesh);

/// Signed volume by the divergence theorem in the mesh's own units (cubed).
double signed_volume(const TriangleMesh& mesh);

/// Enclosed volume in mL, with mesh coordinates multiplied by `unit_scale_to_cm`.
double mesh_volume_ml(const TriangleMesh& mesh, double unit_scale_to_cm);

} // namespace stereovol
