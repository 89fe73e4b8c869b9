// Python bindings for the engine: parsing, ray queries, prefabs and batch runs.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "vsens/config.hpp"
#include "vsens/error.hpp"
#include "vsens/geometry.hpp"
#include "vsens/mocap.hpp"
#include "vsens/sensors.hpp"
#include "vsens/simulation.hpp"

namespace py = pybind11;
using namespace vsens;

namespace {

py::tuple vec(const Vec3& v) { return py::make_tuple(v.x, v.y, v.z); }

py::tuple pose_tuple(const Pose& p) {
    const auto& q = p.orientation;
    return py::make_tuple(vec(p.position), py::make_tuple(q.w(), q.x(), q.y(), q.z()));
}

Vec3 to_vec(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

SessionConfig parse_config(const std::string& text, const std::string& base_dir) {
    return config_from_json(nlohmann::json::parse(text), base_dir);
}

py::dict series_dict(const SensorSeries& s) {
    py::dict d;
    d["kind"] = std::string(sensors::to_string(s.kind));
    d["channels"] = s.channels;
    d["sample_rate"] = s.sample_rate;
    d["group_delay_steps"] = s.group_delay_steps;
    d["times"] = s.times;
    d["values"] = s.values;
    return d;
}

}  // namespace

PYBIND11_MODULE(_vsens, m) {
    m.doc() = "Virtual sensor simulation engine";
    m.attr("ENGINE_VERSION") = kEngineVersion;

    // Engine errors surface as VsensError(code, message, line).
    static py::exception<Error> error(m, "VsensError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error)(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            exc.attr("line") = e.line();
            PyErr_SetObject(error.ptr(), exc.ptr());
        }
    });

    py::class_<mocap::Motion>(m, "Motion")
        .def_property_readonly("joint_names",
                               [](const mocap::Motion& mo) {
                                   std::vector<std::string> names;
                                   for (const auto& j : mo.skeleton.joints) names.push_back(j.name);
                                   return names;
                               })
        .def_property_readonly("frame_count", [](const mocap::Motion& mo) { return mo.clip.frame_count(); })
        .def_property_readonly("frame_time", [](const mocap::Motion& mo) { return mo.clip.frame_time; })
        .def_property_readonly("duration", [](const mocap::Motion& mo) { return mo.clip.duration(); })
        .def(
            "sample_pose",
            [](const mocap::Motion& mo, double t) {
                const auto poses = mocap::sample_pose(mo.skeleton, mo.clip, t);
                py::dict out;
                for (std::size_t i = 0; i < poses.world.size(); ++i)
                    out[py::str(mo.skeleton.joints[i].name)] = pose_tuple(poses.world[i]);
                return out;
            },
            py::arg("t"), "World pose of every joint at time t as ((x, y, z), (w, x, y, z)).");

    m.def("parse_bvh", &mocap::parse_bvh, py::arg("text"), py::arg("unit_scale") = 1.0);

    py::class_<geometry::TriangleMesh>(m, "TriangleMesh")
        .def_readonly("name", &geometry::TriangleMesh::name)
        .def_property_readonly("vertex_count", [](const geometry::TriangleMesh& me) { return me.vertices.size(); })
        .def_property_readonly("triangle_count", [](const geometry::TriangleMesh& me) { return me.triangles.size(); })
        .def_readonly("triangles", &geometry::TriangleMesh::triangles);

    m.def("parse_obj", &geometry::parse_obj, py::arg("text"), py::arg("name") = "");

    py::class_<geometry::AccelIndex>(m, "AccelIndex")
        .def(py::init<geometry::TriangleMesh>(), py::arg("mesh"))
        .def_property_readonly("node_count", [](const geometry::AccelIndex& a) { return a.nodes().size(); })
        .def(
            "nearest",
            [](const geometry::AccelIndex& a, std::array<double, 3> origin, std::array<double, 3> direction,
               double max_range) -> py::object {
                const auto hit = a.nearest({to_vec(origin), normalized(to_vec(direction))}, max_range);
                if (!hit) return py::none();
                return py::make_tuple(hit->distance, hit->triangle);
            },
            py::arg("origin"), py::arg("direction"), py::arg("max_range") = 1e300,
            "(distance, triangle id) of the nearest hit, or None.");

    m.def(
        "expand_prefab",
        [](const std::string& id, int rows, int cols, double spacing) {
            sensors::MatrixPrefabSpec spec;
            spec.id = id;
            spec.rows = rows;
            spec.cols = cols;
            spec.spacing = spacing;
            std::vector<py::tuple> out;
            for (const auto& e : sensors::expand_prefab(spec)) out.push_back(py::make_tuple(e.id, vec(e.grid_offset)));
            return out;
        },
        py::arg("id"), py::arg("rows"), py::arg("cols"), py::arg("spacing") = 0.05,
        "(element id, grid offset) pairs in row-major order.");

    py::class_<Recording>(m, "Recording")
        .def_property_readonly("sensor_ids",
                               [](const Recording& r) {
                                   std::vector<std::string> ids;
                                   for (const auto& [id, s] : r.series) ids.push_back(id);
                                   return ids;
                               })
        .def("series", [](const Recording& r, const std::string& id) {
            const auto it = r.series.find(id);
            if (it == r.series.end()) throw Error(ErrorCode::UnknownSensor, "unknown sensor '" + id + "'");
            return series_dict(it->second);
        })
        .def_property_readonly("metadata_json", [](const Recording& r) { return r.metadata.dump(); })
        .def("export_csv", [](const Recording& r, const std::string& id) { return export_csv(r, id); })
        .def("export_meta", [](const Recording& r, const std::string& id) { return export_meta(r, id); })
        .def("write", [](const Recording& r, const std::filesystem::path& dir) { return write_recording(r, dir); });

    py::class_<Session>(m, "Session")
        .def_static(
            "from_json", [](const std::string& text, const std::string& base_dir) {
                return Session::create(parse_config(text, base_dir));
            },
            py::arg("text"), py::arg("base_dir") = "")
        .def_property_readonly("tick_count", &Session::tick_count)
        .def_property_readonly("next_tick", &Session::next_tick)
        .def_property_readonly("duration", &Session::duration)
        .def_property_readonly("finished", &Session::finished)
        .def_property_readonly("sensor_ids",
                               [](const Session& s) {
                                   std::vector<std::string> ids;
                                   for (const auto& i : s.sensors()) ids.push_back(i.id());
                                   return ids;
                               })
        .def("step",
             [](Session& s) {
                 const TickReport r = s.step();
                 py::list samples;
                 for (const auto& smp : r.samples) samples.append(py::make_tuple(smp.sensor_id, smp.time, smp.values));
                 return py::make_tuple(r.tick, r.time, samples);
             })
        .def("seek", &Session::seek, py::arg("tick"))
        .def_property_readonly("recording", [](const Session& s) { return s.recording(); });

    m.def(
        "run_json", [](const std::string& text, const std::string& base_dir) { return run(parse_config(text, base_dir)); },
        py::arg("text"), py::arg("base_dir") = "");
    m.def("run_file", [](const std::filesystem::path& path) { return run(load_config(path)); }, py::arg("path"));
}
