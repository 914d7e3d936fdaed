#include "stereovol/mesh.hpp"

#include "stereovol/error.hpp"
#include "stereovol/io.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <string>

namespace stereovol {

namespace {

int parse_index(const std::string& token, std::size_t n_vertices)
{
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  try {
    idx = std::stoi(head);
  } catch (const std::exception&) {
    throw Error(ErrorCode::Parse, "bad face index '" + token + "'");
  }
  const long resolved = idx > 0 ? idx - 1L : static_cast<long>(n_vertices) + idx;
  if (idx == 0 || resolved < 0 || resolved >= static_cast<long>(n_vertices)) {
    throw Error(ErrorCode::Parse, "face index '" + token + "' out of range");
  }
  return static_cast<int>(resolved);
}

} // namespace

TriangleMesh parse_obj(std::string_view text)
{
  TriangleMesh mesh;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) {
      continue;
    }
    if (tag == "v") {
      std::array<double, 3> v{};
      if (!(ls >> v[0] >> v[1] >> v[2])) {
        throw Error(ErrorCode::Parse, "bad vertex record '" + line + "'");
      }
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) {
        poly.push_back(parse_index(tok, mesh.vertices.size()));
      }
      if (poly.size() < 3) {
        throw Error(ErrorCode::Parse, "face with fewer than 3 vertices");
      }
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
      }
    }
  }
  return mesh;
}

TriangleMesh load_obj(const std::filesystem::path& path)
{
  return parse_obj(read_text_file(path));
}

void check_closed_oriented(const TriangleMesh& mesh)
{
  if (mesh.faces.empty() || mesh.vertices.empty()) {
    throw Error(ErrorCode::EmptyMesh, "mesh has no faces");
  }
  // Directed edge -> use count. A closed, consistently oriented mesh uses each
  // directed edge once and its reverse once.
  std::map<std::pair<int, int>, int> directed;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = f[k];
      const int b = f[(k + 1) % 3];
      if (a < 0 || b < 0 || a >= static_cast<int>(mesh.vertices.size()) || b >= static_cast<int>(mesh.vertices.size())) {
        throw Error(ErrorCode::OpenMesh, "face references a missing vertex");
      }
      if (a == b) {
        throw Error(ErrorCode::OpenMesh, "degenerate face with repeated vertex");
      }
      ++directed[{a, b}];
    }
  }
  for (const auto& [edge, count] : directed) {
    if (count != 1) {
      throw Error(ErrorCode::OpenMesh, "edge " + std::to_string(edge.first) + "-" + std::to_string(edge.second) +
                                           " traversed " + std::to_string(count) + " times in one direction");
    }
    if (!directed.count({edge.second, edge.first})) {
      throw Error(ErrorCode::OpenMesh,
                  "boundary edge " + std::to_string(edge.first) + "-" + std::to_string(edge.second));
    }
  }
}

double signed_volume(const TriangleMesh& mesh)
{
  if (mesh.faces.empty()) {
    throw Error(ErrorCode::EmptyMesh, "mesh has no faces");
  }
  // Tetrahedra are taken against the vertex centroid to keep the terms small.
  std::array<double, 3> c{0.0, 0.0, 0.0};
  for (const auto& v : mesh.vertices) {
    for (int k = 0; k < 3; ++k) c[k] += v[k];
  }
  for (int k = 0; k < 3; ++k) c[k] /= static_cast<double>(mesh.vertices.size());

  double sum = 0.0;
  double comp = 0.0;
  for (const auto& f : mesh.faces) {
    std::array<std::array<double, 3>, 3> p{};
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 3; ++k) p[i][k] = mesh.vertices[f[i]][k] - c[k];
    }
    const double cx = p[1][1] * p[2][2] - p[1][2] * p[2][1];
    const double cy = p[1][2] * p[2][0] - p[1][0] * p[2][2];
    const double cz = p[1][0] * p[2][1] - p[1][1] * p[2][0];
    const double term = (p[0][0] * cx + p[0][1] * cy + p[0][2] * cz) / 6.0;
    // Neumaier summation
    const double t = sum + term;
    comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return sum + comp;
}

double mesh_volume_ml(const TriangleMesh& mesh, double unit_scale_to_cm)
{
  if (!(unit_scale_to_cm > 0.0) || !std::isfinite(unit_scale_to_cm)) {
    throw Error(ErrorCode::InvalidConfig, "unit_scale_to_cm must be positive");
  }
  check_closed_oriented(mesh);
  const double scale3 = unit_scale_to_cm * unit_scale_to_cm * unit_scale_to_cm;
  return std::abs(signed_volume(mesh)) * scale3;
}

} // namespace stereovol
