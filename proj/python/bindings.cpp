#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dynsdf/checkpoint.hpp"
#include "dynsdf/mesher.hpp"
#include "dynsdf/pipeline.hpp"

namespace py = pybind11;
using namespace dynsdf;

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<std::uint32_t, Eigen::Dynamic, 3, Eigen::RowMajor>;

std::vector<Vec3> to_vec(const Eigen::Ref<const Points>& m) {
  std::vector<Vec3> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = m.row(i).transpose();
  return out;
}

Points to_array(const std::vector<Vec3>& v) {
  Points m(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  return m;
}

py::tuple mesh_to_tuple(const Mesh& mesh) {
  Faces f(static_cast<Eigen::Index>(mesh.triangles.size()), 3);
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    for (int c = 0; c < 3; ++c) f(static_cast<Eigen::Index>(i), c) = mesh.triangles[i][c];
  }
  return py::make_tuple(to_array(mesh.vertices), f);
}

Mesh tuple_to_mesh(const Eigen::Ref<const Points>& vertices, const Eigen::Ref<const Faces>& faces) {
  Mesh mesh;
  mesh.vertices = to_vec(vertices);
  mesh.triangles.resize(static_cast<std::size_t>(faces.rows()));
  for (Eigen::Index i = 0; i < faces.rows(); ++i) {
    for (int c = 0; c < 3; ++c) mesh.triangles[i][c] = faces(i, c);
  }
  return mesh;
}

RigidTransform pose_from(const Eigen::Matrix<double, 3, 4>& m) {
  return {m.leftCols<3>(), m.col(3)};
}

Eigen::Matrix<double, 3, 4> pose_to(const RigidTransform& p) {
  Eigen::Matrix<double, 3, 4> m;
  m << p.R, p.T;
  return m;
}

}  // namespace

PYBIND11_MODULE(_dynsdf, m) {
  m.doc() = "Dynamic-aware neural SDF mapping from lidar scans";

  py::register_exception<Error>(m, "Error");
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  py::class_<Box3D>(m, "Box3D")
      .def(py::init([](int frame_id, int track_id, const Vec3& center, double h, double w, double l) {
             return Box3D{frame_id, track_id, center, h, w, l};
           }),
           py::arg("frame_id"), py::arg("track_id"), py::arg("center"), py::arg("h"), py::arg("w"), py::arg("l"))
      .def_readwrite("frame_id", &Box3D::frame_id)
      .def_readwrite("track_id", &Box3D::track_id)
      .def_readwrite("center", &Box3D::center)
      .def_readwrite("h", &Box3D::h)
      .def_readwrite("w", &Box3D::w)
      .def_readwrite("l", &Box3D::l);

  py::class_<DynamicMask>(m, "DynamicMask")
      .def_readonly("track_id", &DynamicMask::track_id)
      .def_readonly("created_frame", &DynamicMask::created_frame)
      .def_readonly("p_l", &DynamicMask::p_l)
      .def_readonly("p_r", &DynamicMask::p_r)
      .def_readonly("center", &DynamicMask::center)
      .def_readonly("height", &DynamicMask::height)
      .def("area", &DynamicMask::area);

  m.def(
      "box_to_mask", [](const Box3D& box, const Eigen::Matrix<double, 3, 4>& pose) { return box_to_mask(box, pose_from(pose)); },
      py::arg("box"), py::arg("pose"), "World-XY mask of a sensor-frame box under a 3x4 pose.");

  m.def(
      "infill_ground",
      [](const DynamicMask& mask, const Eigen::Ref<const Points>& ground, double r, std::size_t n, std::uint64_t seed) {
        const auto res = infill_ground(mask, to_vec(ground), r, n, seed);
        return py::make_tuple(to_array(res.points), res.mean_height, res.support);
      },
      py::arg("mask"), py::arg("ground"), py::arg("r") = 0.3, py::arg("n") = 100, py::arg("seed") = 1,
      "Returns (points, mean_height, support).");

  m.def(
      "fourier_encode",
      [](const Eigen::Ref<const Points>& p, int k, double sigma2, std::uint64_t seed) {
        const FourierEncoder enc(k, sigma2, seed);
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(p.rows(), enc.output_dim());
        for (Eigen::Index i = 0; i < p.rows(); ++i) enc.encode_into(p.row(i).transpose(), out.row(i).data());
        return out;
      },
      py::arg("points"), py::arg("k") = 32, py::arg("sigma2") = 50.0, py::arg("seed") = 1);

  m.def(
      "accuracy", [](const Eigen::Ref<const Points>& a, const Eigen::Ref<const Points>& b) { return accuracy(to_vec(a), to_vec(b)); },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "completion", [](const Eigen::Ref<const Points>& a, const Eigen::Ref<const Points>& b) { return completion(to_vec(a), to_vec(b)); },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "chamfer_l1", [](const Eigen::Ref<const Points>& a, const Eigen::Ref<const Points>& b) { return chamfer_l1(to_vec(a), to_vec(b)); },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "f_score",
      [](const Eigen::Ref<const Points>& a, const Eigen::Ref<const Points>& b, double tau) {
        return f_score(to_vec(a), to_vec(b), tau);
      },
      py::arg("pred"), py::arg("gt"), py::arg("tau"));
  m.def(
      "ate_rmse",
      [](const std::vector<Eigen::Matrix<double, 3, 4>>& est, const std::vector<Eigen::Matrix<double, 3, 4>>& gt) {
        std::vector<RigidTransform> a, b;
        for (const auto& p : est) a.push_back(pose_from(p));
        for (const auto& p : gt) b.push_back(pose_from(p));
        return ate_rmse(a, b);
      },
      py::arg("est"), py::arg("gt"));

  m.def(
      "marching_cubes",
      [](const Eigen::Ref<const Eigen::VectorXd>& values, int nx, int ny, int nz, const Vec3& origin,
         double resolution, double iso) {
        if (values.size() != static_cast<Eigen::Index>(nx) * ny * nz) throw ValidationError("grid size mismatch");
        SdfGrid g;
        g.min = origin;
        g.resolution = resolution;
        g.nx = nx;
        g.ny = ny;
        g.nz = nz;
        g.values.assign(values.data(), values.data() + values.size());
        g.covered.assign(g.values.size(), 1);
        return mesh_to_tuple(marching_cubes(g, iso));
      },
      py::arg("values"), py::arg("nx"), py::arg("ny"), py::arg("nz"), py::arg("origin"), py::arg("resolution"),
      py::arg("iso") = 0.0, "Values are x-fastest. Returns (vertices, faces).");

  m.def("read_scan_bin", [](const std::filesystem::path& p) { return to_array(read_scan_bin(p)); });
  m.def("write_scan_bin", [](const std::filesystem::path& p, const Eigen::Ref<const Points>& pts) {
    write_scan_bin(p, to_vec(pts));
  });
  m.def("read_ply", [](const std::filesystem::path& p) { return mesh_to_tuple(read_mesh_ply(p)); });
  m.def(
      "write_ply",
      [](const std::filesystem::path& p, const Eigen::Ref<const Points>& v, const Eigen::Ref<const Faces>& f) {
        write_mesh_ply(tuple_to_mesh(v, f), p);
      },
      py::arg("path"), py::arg("vertices"), py::arg("faces"));

  m.def(
      "synth",
      [](const std::string& scene, int frames, std::uint64_t seed) {
        if (scene != "static" && scene != "dynamic") throw ValidationError("scene must be 'static' or 'dynamic'");
        const auto spec = scene == "static" ? default_static_spec(frames) : default_dynamic_spec(frames);
        const auto s = synth_generate(spec, seed);
        py::list scans, poses;
        for (const auto& scan : s.scans) scans.append(to_array(scan.points));
        for (const auto& p : s.poses) poses.append(pose_to(p));
        py::dict out;
        out["scans"] = scans;
        out["poses"] = poses;
        out["tracks"] = s.tracks;
        out["gt_points"] = to_array(s.gt_points);
        return out;
      },
      py::arg("scene") = "static", py::arg("frames") = 20, py::arg("seed") = 1,
      "Synthetic dataset: dict with scans (sensor frame), poses, tracks, gt_points.");

  m.def(
      "run_map",
      [](const std::vector<Points>& scans, const std::vector<Eigen::Matrix<double, 3, 4>>& poses,
         const std::vector<Box3D>& tracks, int iterations, bool masking, bool use_fourier, std::uint64_t seed,
         const std::optional<std::filesystem::path>& checkpoint) {
        if (scans.size() != poses.size()) throw ValidationError("need one pose per scan");
        std::vector<Scan> in(scans.size());
        for (std::size_t i = 0; i < scans.size(); ++i) {
          in[i].frame_id = static_cast<int>(i);
          in[i].points = to_vec(scans[i]);
          in[i].pose = pose_from(poses[i]);
        }
        PipelineConfig c;
        c.trainer.iterations = iterations;
        c.masking = masking;
        c.field.use_fourier = use_fourier;
        c.seed = seed;
        c.field.seed = seed;
        MapResult r = [&] {
          py::gil_scoped_release release;
          return run_map(in, tracks, c);
        }();
        if (checkpoint) save_checkpoint(r.field, *checkpoint);
        return mesh_to_tuple(r.mesh);
      },
      py::arg("scans"), py::arg("poses"), py::arg("tracks") = std::vector<Box3D>{}, py::arg("iterations") = 10,
      py::arg("masking") = true, py::arg("use_fourier") = true, py::arg("seed") = 1,
      py::arg("checkpoint") = std::nullopt, "Maps the scans and returns the extracted mesh (vertices, faces).");

  m.def(
      "query_sdf",
      [](const std::filesystem::path& checkpoint, const Eigen::Ref<const Points>& pts) {
        const auto field = load_checkpoint(checkpoint);
        const auto v = field.evaluate(to_vec(pts), std::numeric_limits<double>::quiet_NaN());
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
      },
      py::arg("checkpoint"), py::arg("points"), "SDF values from a saved field; NaN where unallocated.");
}
