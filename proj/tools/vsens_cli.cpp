// vsens: batch simulation, file inspection and the interactive server.
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <pthread.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "vsens/config.hpp"
#include "vsens/error.hpp"
#include "vsens/format.hpp"
#include "vsens/geometry.hpp"
#include "vsens/mocap.hpp"
#include "vsens/service.hpp"
#include "vsens/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitInvalid = 2;

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("vsens");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("VSENS_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to "off"; keep the default then
        if (level != spdlog::level::off || std::string_view(env) == "off") spdlog::set_level(level);
    }
}

int report(const vsens::Error& e, const std::string& context = {}) {
    const std::string prefix = context.empty() ? "" : context + ": ";
    if (const auto* v = dynamic_cast<const vsens::ValidationError*>(&e)) {
        std::cerr << "error: " << prefix << v->issues().size() << " validation error(s)\n";
        for (const auto& i : v->issues()) {
            std::cerr << "  " << vsens::to_string(i.code) << " at " << (i.path.empty() ? "<root>" : i.path)
                      << ": " << i.message << "\n";
        }
        return kExitInvalid;
    }
    std::cerr << "error: " << prefix << e.what() << "\n";  // what() already carries the line
    switch (e.code()) {
        case vsens::ErrorCode::FileNotFound:
        case vsens::ErrorCode::Io: return kExitIo;
        default: return kExitInvalid;
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw vsens::Error(vsens::ErrorCode::FileNotFound, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct SimulateArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    bool json = false;
};

int simulate(const SimulateArgs& args) {
    vsens::SessionConfig config;
    try {
        config = vsens::load_config(args.config);
    } catch (const vsens::Error& e) {
        return report(e, args.config);
    }
    if (args.seed) config.seed = *args.seed;

    const auto start = std::chrono::steady_clock::now();
    vsens::Recording recording;
    std::int64_t ticks = 0;
    try {
        vsens::Session session = vsens::Session::create(std::move(config));
        ticks = session.tick_count();
        while (!session.finished()) session.step();
        recording = session.recording();
    } catch (const vsens::Error& e) {
        return report(e, args.config);
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::vector<std::string> files;
    try {
        fs::create_directories(args.out);
        files = vsens::write_recording(recording, args.out);
    } catch (const vsens::Error& e) {
        return report(e, args.out);
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }

    if (args.json) {
        json summary{{"sensors", recording.series.size()},
                     {"ticks", ticks},
                     {"wall_seconds", wall},
                     {"out", args.out},
                     {"files", files}};
        std::cout << summary.dump() << std::endl;
    }
    if (!args.quiet) {
        std::cerr << "simulated " << recording.series.size() << " sensor(s), " << ticks << " ticks in "
                  << vsens::format_shortest(wall) << " s; wrote " << files.size() << " files to "
                  << args.out << "\n";
    }
    return 0;
}

json describe_bvh(const vsens::mocap::Motion& motion) {
    const auto& sk = motion.skeleton;
    json joints = json::array();
    std::size_t real = 0;
    std::size_t end_sites = 0;
    for (const auto& j : sk.joints) {
        json channels = json::array();
        for (auto c : j.channels) channels.push_back(vsens::mocap::channel_name(c));
        joints.push_back({{"name", j.name},
                          {"parent", j.parent ? json(sk.joints[*j.parent].name) : json(nullptr)},
                          {"end_site", j.is_end_site},
                          {"offset", {j.offset.x, j.offset.y, j.offset.z}},
                          {"channels", std::move(channels)}});
        (j.is_end_site ? end_sites : real)++;
    }
    return {{"kind", "bvh"},
            {"joints", real},
            {"end_sites", end_sites},
            {"channels", sk.channel_count()},
            {"frames", motion.clip.frame_count()},
            {"frame_time", motion.clip.frame_time},
            {"duration", motion.clip.duration()},
            {"tree", std::move(joints)},
            {"warnings", sk.warnings}};
}

json describe_obj(const vsens::geometry::TriangleMesh& mesh) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    vsens::Vec3 lo{inf, inf, inf};
    vsens::Vec3 hi{-inf, -inf, -inf};
    for (const auto& v : mesh.vertices) {
        lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
        hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
    }
    json box = mesh.vertices.empty() ? json(nullptr)
                                     : json{{"min", {lo.x, lo.y, lo.z}}, {"max", {hi.x, hi.y, hi.z}}};
    return {{"kind", "obj"},
            {"vertices", mesh.vertices.size()},
            {"triangles", mesh.triangles.size()},
            {"dropped_degenerate", mesh.dropped_degenerate},
            {"bounds", std::move(box)}};
}

void print_bvh(const json& d) {
    std::cerr << d["joints"].get<std::size_t>() << " joints (" << d["end_sites"].get<std::size_t>()
              << " end sites), " << d["channels"].get<std::size_t>() << " channels\n";
    std::map<std::string, int> depth;
    for (const auto& j : d["tree"]) {
        const int level = j["parent"].is_null() ? 0 : depth[j["parent"].get<std::string>()] + 1;
        depth[j["name"].get<std::string>()] = level;
        std::cerr << std::string(2 * level, ' ') << j["name"].get<std::string>();
        if (!j["channels"].empty()) {
            std::cerr << " [";
            for (std::size_t i = 0; i < j["channels"].size(); ++i)
                std::cerr << (i ? " " : "") << j["channels"][i].get<std::string>();
            std::cerr << "]";
        }
        std::cerr << "\n";
    }
    std::cerr << d["frames"].get<std::size_t>() << " frames, frame time "
              << vsens::format_shortest(d["frame_time"].get<double>()) << " s, duration "
              << vsens::format_shortest(d["duration"].get<double>()) << " s\n";
    for (const auto& w : d["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
}

void print_obj(const json& d) {
    std::cerr << d["vertices"].get<std::size_t>() << " vertices, " << d["triangles"].get<std::size_t>()
              << " triangles";
    if (d["dropped_degenerate"].get<std::size_t>() > 0)
        std::cerr << " (" << d["dropped_degenerate"].get<std::size_t>() << " degenerate dropped)";
    std::cerr << "\n";
    if (!d["bounds"].is_null()) std::cerr << "bounds " << d["bounds"]["min"] << " .. " << d["bounds"]["max"] << "\n";
}

int inspect(const std::string& path, bool as_json) {
    std::string ext = fs::path(path).extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext != ".bvh" && ext != ".obj") {
        std::cerr << "error: " << path << ": expected a .bvh or .obj file\n";
        return kExitInvalid;
    }
    try {
        const std::string text = read_text(path);
        const json d = ext == ".bvh" ? describe_bvh(vsens::mocap::parse_bvh(text))
                                     : describe_obj(vsens::geometry::parse_obj(text, fs::path(path).stem().string()));
        if (as_json) {
            std::cout << d.dump() << std::endl;
        } else {
            ext == ".bvh" ? print_bvh(d) : print_obj(d);
        }
    } catch (const vsens::Error& e) {
        return report(e, path);
    }
    return 0;
}

int serve(const std::string& host, unsigned short port, const std::string& data_root) {
    // Block the signals before any thread starts so only sigwait sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    vsens::service::ServerOptions options;
    options.host = host;
    options.port = port;
    options.data_root = data_root;
    std::unique_ptr<vsens::service::Server> server;
    try {
        server = std::make_unique<vsens::service::Server>(options);
    } catch (const vsens::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    server->start();
    std::cout << "listening on http://" << host << ":" << server->port() << std::endl;
    spdlog::info("serving files under {}", fs::absolute(data_root).string());

    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {} received, shutting down", sig);
    server->stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"Virtual sensor simulation over motion capture and scene meshes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(vsens::kEngineVersion));

    SimulateArgs sim;
    std::uint64_t seed = 0;
    auto* simulate_cmd = app.add_subcommand("simulate", "Run a session config to the end and write CSVs");
    simulate_cmd->add_option("--config", sim.config, "Session config (JSON)")->required();
    simulate_cmd->add_option("--out", sim.out, "Output directory")->required();
    auto* seed_opt = simulate_cmd->add_option("--seed", seed, "Override the config's global seed");
    simulate_cmd->add_flag("--quiet", sim.quiet, "No summary on stderr");
    simulate_cmd->add_flag("--json", sim.json, "Print a JSON summary on stdout");

    std::string inspect_path;
    bool inspect_json = false;
    auto* inspect_cmd = app.add_subcommand("inspect", "Describe a .bvh or .obj file");
    inspect_cmd->add_option("path", inspect_path, "File to inspect")->required();
    inspect_cmd->add_flag("--json", inspect_json, "Machine-readable output on stdout");

    std::string host = "127.0.0.1";
    unsigned short port = 8080;
    std::string data_root = ".";
    auto* serve_cmd = app.add_subcommand("serve", "Host the HTTP and stream API");
    serve_cmd->add_option("--port", port, "Listen port (0 picks one)");
    serve_cmd->add_option("--host", host, "Listen address");
    serve_cmd->add_option("--data-root", data_root, "Directory that relative config paths resolve against");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInvalid;
    }

    if (*simulate_cmd) {
        if (*seed_opt) sim.seed = seed;
        return simulate(sim);
    }
    if (*inspect_cmd) return inspect(inspect_path, inspect_json);
    return serve(host, port, data_root);
}
