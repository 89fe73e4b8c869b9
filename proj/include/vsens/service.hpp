#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "vsens/geometry.hpp"

namespace vsens::service {

inline constexpr int kMessageSchema = 1;
/// Upper bound on triangles shipped to clients in scene_state.
inline constexpr std::size_t kSceneTriangleBudget = 20000;

enum class PlaybackState { Editing, Playing, Paused, Finished };
std::string_view to_string(PlaybackState state);

/// Keeps `budget` evenly spaced triangles (all of them when the mesh is
/// already small enough) and drops vertices no kept triangle references.
geometry::TriangleMesh decimate(const geometry::TriangleMesh& mesh, std::size_t budget);

struct ServerOptions {
    std::string host = "127.0.0.1";
    unsigned short port = 0;  // 0 lets the OS pick
    /// Relative clip and scene paths in posted configs resolve against this.
    std::filesystem::path data_root = ".";
    int io_threads = 4;
};

/// HTTP API plus the per-session message stream, all on one listening port.
class Server {
public:
    /// Binds and listens. Throws Error(Io) when the address is unavailable.
    explicit Server(ServerOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    const std::string& host() const;
    unsigned short port() const;

    /// Launches the I/O threads and returns.
    void start();
    /// Stops accepting, halts playback, closes streams with "going away" and
    /// lets in-flight responses (exports included) finish. Idempotent.
    void stop();

    struct Impl;  // opaque; shared with connection handlers

private:
    std::shared_ptr<Impl> impl_;
};

}  // namespace vsens::service
