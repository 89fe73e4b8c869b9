#include "vsens/service.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "vsens/config.hpp"
#include "vsens/error.hpp"
#include "vsens/simulation.hpp"
#include "vsens/zip.hpp"

namespace vsens::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string_view to_string(PlaybackState state) {
    switch (state) {
        case PlaybackState::Editing: return "editing";
        case PlaybackState::Playing: return "playing";
        case PlaybackState::Paused: return "paused";
        case PlaybackState::Finished: return "finished";
    }
    return "unknown";
}

geometry::TriangleMesh decimate(const geometry::TriangleMesh& mesh, std::size_t budget) {
    geometry::TriangleMesh out;
    out.name = mesh.name;
    const std::size_t n = mesh.triangles.size();
    const std::size_t keep = std::min(n, budget);
    std::vector<std::int64_t> remap(mesh.vertices.size(), -1);
    out.triangles.reserve(keep);
    for (std::size_t j = 0; j < keep; ++j) {
        const auto& tri = mesh.triangles[keep == n ? j : j * n / keep];
        std::array<std::uint32_t, 3> mapped{};
        for (int k = 0; k < 3; ++k) {
            auto& slot = remap[tri[k]];
            if (slot < 0) {
                slot = static_cast<std::int64_t>(out.vertices.size());
                out.vertices.push_back(mesh.vertices[tri[k]]);
            }
            mapped[k] = static_cast<std::uint32_t>(slot);
        }
        out.triangles.push_back(mapped);
    }
    return out;
}

namespace {

constexpr auto kMaxLag = std::chrono::milliseconds(250);
constexpr std::size_t kMaxQueuedMessages = 20000;
constexpr auto kSessionDeleted = static_cast<websocket::close_code>(4004);

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

json pose_json(const Pose& p) {
    const auto& q = p.orientation;
    return json::array({p.position.x, p.position.y, p.position.z, q.w(), q.x(), q.y(), q.z()});
}

json error_body(const Error& e) {
    json err{{"code", to_string(e.code())}, {"message", e.what()}};
    if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
        json issues = json::array();
        for (const auto& i : v->issues())
            issues.push_back({{"code", to_string(i.code)}, {"path", i.path}, {"message", i.message}});
        err["issues"] = std::move(issues);
    }
    return err;
}

http::status status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownSession:
        case ErrorCode::UnknownSensor: return http::status::not_found;
        case ErrorCode::InvalidState:
        case ErrorCode::EmptyRecording: return http::status::conflict;
        case ErrorCode::InvalidArgument: return http::status::bad_request;
        case ErrorCode::Io: return http::status::internal_server_error;
        default: return http::status::unprocessable_entity;
    }
}

std::string new_session_id() {
    static std::atomic<std::uint64_t> counter{0};
    static const std::uint64_t salt = std::random_device{}() * 0x9E3779B97F4A7C15ULL;
    char buf[24];
    std::snprintf(buf, sizeof buf, "s%llx",
                  static_cast<unsigned long long>((salt ^ (++counter * 0xBF58476D1CE4E5B9ULL)) >> 16));
    return buf;
}

json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("request body is not JSON: ") + e.what());
    }
}

template <class T>
T require_parsed(std::optional<T> value, std::vector<Issue>& issues) {
    if (!issues.empty() || !value) throw ValidationError(std::move(issues));
    return std::move(*value);
}

class Subscriber;

/// A session plus its playback clock and stream subscribers. Every public
/// method takes the session mutex, so HTTP requests, stream commands and the
/// pacer are serialized per session.
class Hosted : public std::enable_shared_from_this<Hosted> {
public:
    Hosted(std::string id, Session session, net::io_context& ioc)
        : id_(std::move(id)),
          session_(std::move(session)),
          strand_(net::make_strand(ioc)),
          timer_(strand_) {}

    const std::string& id() const { return id_; }

    json handle() {
        std::lock_guard lock(mutex_);
        return handle_locked();
    }

    json describe() {
        std::lock_guard lock(mutex_);
        json j = handle_locked();
        j["config"] = to_json(session_.config());
        j["sensors"] = sensors_locked();
        return j;
    }

    json add_sensor(const json& body) {
        std::lock_guard lock(mutex_);
        require_editable();
        std::vector<Issue> issues;
        SensorDef def = require_parsed(sensor_from_json(body, "sensor", issues), issues);
        session_.add_sensor(def);
        after_edit();
        return {{"id", def.id}, {"sensors", sensors_locked()}};
    }

    json move_sensor(const std::string& sensor_id, const json& body) {
        std::lock_guard lock(mutex_);
        require_editable();
        std::vector<Issue> issues;
        const json& att = body.contains("attachment") ? body.at("attachment") : body;
        auto attachment = require_parsed(attachment_from_json(att, "attachment", issues), issues);
        session_.move_sensor(sensor_id, std::move(attachment));
        after_edit();
        return {{"id", sensor_id}, {"sensors", sensors_locked()}};
    }

    json remove_sensor(const std::string& sensor_id) {
        std::lock_guard lock(mutex_);
        require_editable();
        session_.remove_sensor(sensor_id);
        after_edit();
        return {{"id", sensor_id}, {"sensors", sensors_locked()}};
    }

    json add_prefab(const json& body) {
        std::lock_guard lock(mutex_);
        require_editable();
        std::vector<Issue> issues;
        auto prefab = require_parsed(prefab_from_json(body, "prefab", issues), issues);
        const auto ids = session_.add_prefab(prefab);
        after_edit();
        return {{"ids", ids}, {"sensors", sensors_locked()}};
    }

    json transport(const json& body);

    std::string export_zip() {
        std::lock_guard lock(mutex_);
        const Recording& rec = session_.recording();
        const bool any = std::any_of(rec.series.begin(), rec.series.end(),
                                     [](const auto& kv) { return !kv.second.times.empty(); });
        if (!any) throw Error(ErrorCode::EmptyRecording, "session '" + id_ + "' has no recorded samples");
        ZipWriter zip;
        for (const auto& [sensor_id, series] : rec.series) {
            zip.add(sensor_id + ".csv", export_csv(rec, sensor_id));
            zip.add(sensor_id + ".meta.json", export_meta(rec, sensor_id));
        }
        return zip.finish();
    }

    /// Queues hello and scene_state, then registers for broadcasts. Both
    /// happen under the lock so no tick can slip in ahead of them.
    bool subscribe(const std::shared_ptr<Subscriber>& sub);
    void unsubscribe(const Subscriber* sub);
    /// Runs a command received on the stream; returns the ack or error text.
    std::string stream_command(const std::string& text);
    /// Halts playback and closes every stream with the given code.
    void shutdown(websocket::close_code code, std::string reason);

private:
    json envelope(std::string_view type) const {
        return {{"type", type}, {"session_id", id_}};
    }

    json handle_locked() const {
        return {{"schema", kMessageSchema},
                {"session_id", id_},
                {"state", to_string(state_)},
                {"playback_position", position_},
                {"playback_speed", speed_},
                {"duration", session_.duration()},
                {"simulation_rate", session_.rate()},
                {"next_tick", session_.next_tick()},
                {"tick_count", session_.tick_count()},
                {"sensor_count", session_.sensors().size()}};
    }

    json sensors_locked() const {
        json list = json::array();
        for (const auto& def : session_.sensor_defs()) {
            json j = to_json(def);
            j["kind"] = sensors::to_string(sensors::kind_of(def.spec));
            j["channels"] = sensors::channel_names(def.spec);
            if (auto pose = session_.last_sensor_pose(def.id)) j["world_pose"] = pose_json(*pose);
            list.push_back(std::move(j));
        }
        return list;
    }

    json scene_state_locked() const {
        std::size_t total = 0;
        for (const auto& m : session_.meshes()) total += m.mesh().triangles.size();
        json meshes = json::array();
        for (const auto& m : session_.meshes()) {
            const auto& src = m.mesh();
            const std::size_t budget =
                total <= kSceneTriangleBudget ? src.triangles.size()
                                              : src.triangles.size() * kSceneTriangleBudget / total;
            const auto shown = decimate(src, budget);
            json verts = json::array();
            for (const auto& v : shown.vertices) {
                verts.push_back(v.x);
                verts.push_back(v.y);
                verts.push_back(v.z);
            }
            json tris = json::array();
            for (const auto& t : shown.triangles)
                for (auto idx : t) tris.push_back(idx);
            meshes.push_back({{"name", src.name},
                              {"vertices", std::move(verts)},
                              {"triangles", std::move(tris)},
                              {"source_triangles", src.triangles.size()}});
        }
        json joints = json::array();
        if (const auto* motion = session_.motion()) {
            for (const auto& j : motion->skeleton.joints) {
                joints.push_back({{"name", j.name},
                                  {"parent", j.parent ? json(*j.parent) : json(nullptr)},
                                  {"end_site", j.is_end_site}});
            }
        }
        json bones = json::array();
        for (const auto& b : session_.config().body.bones)
            bones.push_back({{"name", b.name},
                           {"parent", b.parent_joint},
                           {"child", b.child_joint},
                           {"radius", b.radius ? json(*b.radius) : json(nullptr)}});
        json msg = envelope("scene_state");
        msg["payload"] = {{"handle", handle_locked()},
                          {"meshes", std::move(meshes)},
                          {"skeleton", {{"joints", std::move(joints)}}},
                          {"body", std::move(bones)},
                          {"sensors", sensors_locked()}};
        return msg;
    }

    void require_editable() const {
        if (state_ == PlaybackState::Playing || state_ == PlaybackState::Finished) {
            throw Error(ErrorCode::InvalidState, "session '" + id_ + "' is " +
                                                     std::string(to_string(state_)) +
                                                     "; pause (or seek) before editing");
        }
    }

    void after_edit() { broadcast(scene_state_locked().dump()); }

    void broadcast(std::string text);

    Clock::time_point due(std::int64_t tick) const {
        const double seconds = static_cast<double>(tick - anchor_tick_) / (session_.rate() * speed_);
        return anchor_time_ + std::chrono::duration_cast<Clock::duration>(
                                  std::chrono::duration<double>(seconds));
    }

    void reanchor() {
        anchor_time_ = Clock::now();
        anchor_tick_ = session_.next_tick();
    }

    /// Invalidates any pending wake-up and, when playing, schedules a new one.
    void restart_pacer() {
        const std::uint64_t gen = ++generation_;
        auto self = shared_from_this();
        if (state_ == PlaybackState::Playing) {
            net::post(strand_, [self, gen] { self->on_timer(gen); });
        } else {
            net::post(strand_, [self] { self->timer_.cancel(); });
        }
    }

    // Runs on strand_.
    void on_timer(std::uint64_t gen) {
        std::lock_guard lock(mutex_);
        if (gen != generation_ || state_ != PlaybackState::Playing) return;
        auto now = Clock::now();
        if (!session_.finished() && now - due(session_.next_tick()) > kMaxLag) {
            // Fell behind (slow client host, debugger); drop the backlog
            // instead of bursting.
            reanchor();
        }
        try {
            while (!session_.finished() && due(session_.next_tick()) <= now) step_locked();
        } catch (const Error& e) {
            spdlog::error("session {}: {}", id_, e.what());
            state_ = PlaybackState::Paused;
            json msg = envelope("error");
            msg["payload"] = error_body(e);
            broadcast(msg.dump());
            return;
        }
        if (session_.finished()) {
            state_ = PlaybackState::Finished;
            json msg = envelope("ack");
            msg["payload"] = {{"event", "finished"}, {"handle", handle_locked()}};
            broadcast(msg.dump());
            return;
        }
        auto self = shared_from_this();
        timer_.expires_at(due(session_.next_tick()));
        timer_.async_wait([self, gen](beast::error_code ec) {
            if (!ec) self->on_timer(gen);
        });
    }

    void step_locked() {
        const TickReport report = session_.step();
        position_ = report.time;

        json pose = envelope("pose_update");
        pose["tick"] = report.tick;
        pose["time"] = report.time;
        pose["epoch"] = epoch_;
        json joints = json::array();
        if (const auto& poses = session_.last_poses()) {
            for (const auto& p : poses->world) joints.push_back(pose_json(p));
        }
        json capsules = json::array();
        for (const auto& c : session_.last_capsules()) {
            capsules.push_back({{"name", c.name},
                                {"p0", vec_json(c.capsule.p0)},
                                {"p1", vec_json(c.capsule.p1)},
                                {"radius", c.capsule.radius}});
        }
        json sensor_poses = json::object();
        for (const auto& s : session_.sensors()) {
            if (auto p = session_.last_sensor_pose(s.id())) sensor_poses[s.id()] = pose_json(*p);
        }
        pose["payload"] = {{"joints", std::move(joints)},
                           {"capsules", std::move(capsules)},
                           {"sensors", std::move(sensor_poses)}};
        broadcast(pose.dump());

        json batch = envelope("sample_batch");
        batch["tick"] = report.tick;
        batch["time"] = report.time;
        batch["epoch"] = epoch_;
        json samples = json::array();
        for (const auto& s : report.samples) {
            samples.push_back({{"sensor_id", s.sensor_id},
                               {"kind", sensors::to_string(s.kind)},
                               {"time", s.time},
                               {"values", s.values}});
        }
        batch["payload"] = {{"samples", std::move(samples)}};
        broadcast(batch.dump());
    }

    const std::string id_;
    std::mutex mutex_;
    Session session_;
    PlaybackState state_ = PlaybackState::Editing;
    double speed_ = 1.0;
    double position_ = 0.0;
    std::uint64_t epoch_ = 0;  // bumped by every seek; ticks increase within an epoch
    std::uint64_t generation_ = 0;
    bool closed_ = false;
    Clock::time_point anchor_time_;
    std::int64_t anchor_tick_ = 0;
    std::vector<std::weak_ptr<Subscriber>> subscribers_;
    net::strand<net::io_context::executor_type> strand_;
    net::steady_timer timer_;
};

/// One stream client. Writes are queued and drained on the socket's strand.
class Subscriber : public std::enable_shared_from_this<Subscriber> {
public:
    Subscriber(tcp::socket&& socket, std::shared_ptr<Hosted> hosted)
        : ws_(std::move(socket)), hosted_(std::move(hosted)) {}

    void run(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.set_option(websocket::stream_base::decorator([](websocket::response_type& res) {
            res.set(http::field::server, std::string("vsens/") + kEngineVersion);
        }));
        ws_.async_accept(req, beast::bind_front_handler(&Subscriber::on_accept, shared_from_this()));
    }

    void send(std::shared_ptr<const std::string> text) {
        net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)] {
            if (self->closing_ || self->close_pending_) return;
            if (self->queue_.size() >= kMaxQueuedMessages) {
                spdlog::warn("stream client too slow; dropping connection");
                self->queue_.clear();
                self->close_reason_ = websocket::close_reason(websocket::close_code::policy_error,
                                                              "send queue overflow");
                self->do_close();
                return;
            }
            self->queue_.push_back(text);
            if (self->queue_.size() == 1) self->do_write();
        });
    }

    void close(websocket::close_code code, std::string reason) {
        net::post(ws_.get_executor(), [self = shared_from_this(), code, reason = std::move(reason)] {
            if (self->closing_ || self->close_pending_) return;
            self->close_pending_ = true;
            self->close_reason_ = websocket::close_reason(code, reason);
            if (self->queue_.empty()) self->do_close();
        });
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec) return;
        if (!hosted_->subscribe(shared_from_this())) {
            close(kSessionDeleted, "session deleted");
            return;
        }
        do_read();
    }

    void do_read() {
        ws_.async_read(buffer_, beast::bind_front_handler(&Subscriber::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            hosted_->unsubscribe(this);
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        send(std::make_shared<const std::string>(hosted_->stream_command(text)));
        do_read();
    }

    void do_write() {
        ws_.text(true);
        ws_.async_write(net::buffer(*queue_.front()),
                        beast::bind_front_handler(&Subscriber::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        if (ec) {
            queue_.clear();
            return;
        }
        queue_.pop_front();
        if (!queue_.empty()) {
            do_write();
        } else if (close_pending_) {
            do_close();
        }
    }

    void do_close() {
        if (closing_) return;
        closing_ = true;
        ws_.async_close(close_reason_, [self = shared_from_this()](beast::error_code) {});
    }

    websocket::stream<beast::tcp_stream> ws_;
    std::shared_ptr<Hosted> hosted_;
    beast::flat_buffer buffer_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    bool close_pending_ = false;
    bool closing_ = false;
    websocket::close_reason close_reason_;
};

json Hosted::transport(const json& body) {
    if (!body.is_object() || !body.contains("command") || !body["command"].is_string())
        throw Error(ErrorCode::InvalidArgument, "transport needs a string 'command'");
    const std::string cmd = body["command"];
    std::lock_guard lock(mutex_);
    if (closed_) throw Error(ErrorCode::UnknownSession, "session '" + id_ + "' was deleted");
    if (cmd == "play") {
        if (state_ == PlaybackState::Finished)
            throw Error(ErrorCode::InvalidState, "session finished; seek before playing");
        if (state_ != PlaybackState::Playing) {
            state_ = PlaybackState::Playing;
            reanchor();
            restart_pacer();
        }
    } else if (cmd == "pause") {
        if (state_ != PlaybackState::Finished) state_ = PlaybackState::Paused;
        restart_pacer();
    } else if (cmd == "seek") {
        const json* t = body.contains("t") ? &body["t"] : nullptr;
        if (!t || !t->is_number()) throw Error(ErrorCode::InvalidArgument, "seek needs a numeric 't'");
        const double seconds = t->get<double>();
        if (!(seconds >= 0.0) || seconds > session_.duration() + 1e-9) {
            throw Error(ErrorCode::SeekOutOfRange, "seek time " + std::to_string(seconds) +
                                                       " outside [0, " +
                                                       std::to_string(session_.duration()) + "]");
        }
        const auto tick = std::min<std::int64_t>(std::llround(seconds * session_.rate()),
                                                 session_.tick_count() - 1);
        session_.seek(tick);
        position_ = session_.tick_time(tick);
        ++epoch_;
        if (state_ == PlaybackState::Finished) state_ = PlaybackState::Paused;
        if (state_ == PlaybackState::Playing) reanchor();
        restart_pacer();
    } else if (cmd == "speed") {
        const json* v = body.contains("value") ? &body["value"] : nullptr;
        if (!v || !v->is_number() || !(v->get<double>() > 0.0) || !std::isfinite(v->get<double>()))
            throw Error(ErrorCode::InvalidArgument, "speed needs a positive numeric 'value'");
        speed_ = v->get<double>();
        if (state_ == PlaybackState::Playing) {
            reanchor();
            restart_pacer();
        }
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown transport command '" + cmd + "'");
    }
    return handle_locked();
}

bool Hosted::subscribe(const std::shared_ptr<Subscriber>& sub) {
    std::lock_guard lock(mutex_);
    if (closed_) return false;
    json hello = envelope("hello");
    hello["schema"] = kMessageSchema;
    hello["engine_version"] = kEngineVersion;
    sub->send(std::make_shared<const std::string>(hello.dump()));
    sub->send(std::make_shared<const std::string>(scene_state_locked().dump()));
    subscribers_.push_back(sub);
    return true;
}

void Hosted::unsubscribe(const Subscriber* sub) {
    std::lock_guard lock(mutex_);
    std::erase_if(subscribers_, [sub](const auto& w) {
        auto s = w.lock();
        return !s || s.get() == sub;
    });
}

void Hosted::broadcast(std::string text) {
    auto shared = std::make_shared<const std::string>(std::move(text));
    std::erase_if(subscribers_, [](const auto& w) { return w.expired(); });
    for (const auto& w : subscribers_) {
        if (auto s = w.lock()) s->send(shared);
    }
}

std::string Hosted::stream_command(const std::string& text) {
    json request;
    try {
        request = json::parse(text);
    } catch (const json::parse_error&) {
        json msg = envelope("error");
        msg["payload"] = {{"code", "InvalidArgument"}, {"message", "message is not JSON"}};
        return msg.dump();
    }
    const std::string type = request.value("type", "");
    try {
        json result;
        if (type == "transport") {
            result = transport(request);
        } else if (type == "add_sensor") {
            result = add_sensor(request.value("sensor", json::object()));
        } else if (type == "move_sensor") {
            result = move_sensor(request.value("id", ""), request);
        } else if (type == "remove_sensor") {
            result = remove_sensor(request.value("id", ""));
        } else if (type == "add_prefab") {
            result = add_prefab(request.value("prefab", json::object()));
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown command type '" + type + "'");
        }
        json msg = envelope("ack");
        msg["payload"] = {{"request", type}, {"result", std::move(result)}};
        return msg.dump();
    } catch (const Error& e) {
        json msg = envelope("error");
        msg["payload"] = error_body(e);
        msg["payload"]["request"] = type;
        return msg.dump();
    }
}

void Hosted::shutdown(websocket::close_code code, std::string reason) {
    std::lock_guard lock(mutex_);
    closed_ = true;
    if (state_ == PlaybackState::Playing) state_ = PlaybackState::Paused;
    restart_pacer();
    for (const auto& w : subscribers_) {
        if (auto s = w.lock()) s->close(code, reason);
    }
    subscribers_.clear();
}

}  // namespace

class HttpConnection;

struct Server::Impl : std::enable_shared_from_this<Server::Impl> {
    explicit Impl(ServerOptions opts) : options(std::move(opts)), acceptor(ioc) {}

    ServerOptions options;
    net::io_context ioc;
    tcp::acceptor acceptor;
    std::optional<net::executor_work_guard<net::io_context::executor_type>> work;
    std::vector<std::thread> threads;
    std::atomic<bool> stopping{false};

    std::mutex mutex;
    std::map<std::string, std::shared_ptr<Hosted>> sessions;
    std::vector<std::weak_ptr<HttpConnection>> connections;

    void do_accept();
    http::response<http::string_body> handle(const http::request<http::string_body>& req);
    std::shared_ptr<Hosted> find(const std::string& id) {
        std::lock_guard lock(mutex);
        auto it = sessions.find(id);
        if (it == sessions.end()) throw Error(ErrorCode::UnknownSession, "unknown session '" + id + "'");
        return it->second;
    }
};

namespace {

std::vector<std::string> split_path(std::string_view target) {
    target = target.substr(0, target.find('?'));
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos < target.size()) {
        const std::size_t next = target.find('/', pos);
        const std::size_t end = next == std::string_view::npos ? target.size() : next;
        if (end > pos) parts.emplace_back(target.substr(pos, end - pos));
        pos = end + 1;
    }
    return parts;
}

http::response<http::string_body> json_response(const http::request<http::string_body>& req,
                                                http::status status, const json& body) {
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::content_type, "application/json");
    res.body() = body.dump() + "\n";
    return res;
}

}  // namespace

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
public:
    HttpConnection(tcp::socket&& socket, std::shared_ptr<Server::Impl> server)
        : stream_(std::move(socket)), server_(std::move(server)) {}

    void run() {
        net::dispatch(stream_.get_executor(),
                      beast::bind_front_handler(&HttpConnection::do_read, shared_from_this()));
    }

    /// Closes the socket if it is waiting for a request; a response in
    /// flight finishes first and then closes on its own.
    void close_if_idle() {
        net::post(stream_.get_executor(), [self = shared_from_this()] {
            if (self->reading_) {
                beast::error_code ec;
                self->stream_.socket().shutdown(tcp::socket::shutdown_both, ec);
                self->stream_.socket().close(ec);
            }
        });
    }

private:
    void do_read() {
        if (server_->stopping) {
            close();
            return;
        }
        parser_.emplace();
        parser_->body_limit(64 * 1024 * 1024);
        stream_.expires_after(std::chrono::seconds(120));
        reading_ = true;
        http::async_read(stream_, buffer_, *parser_,
                         beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        reading_ = false;
        if (ec) {
            close();
            return;
        }
        http::request<http::string_body> req = parser_->release();
        if (websocket::is_upgrade(req)) {
            const auto parts = split_path(std::string_view(req.target().data(), req.target().size()));
            if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "stream") {
                try {
                    auto hosted = server_->find(parts[1]);
                    stream_.expires_never();
                    std::make_shared<Subscriber>(stream_.release_socket(), std::move(hosted))
                        ->run(std::move(req));
                    return;
                } catch (const Error& e) {
                    write(json_response(req, status_for(e.code()), {{"error", error_body(e)}}));
                    return;
                }
            }
            write(json_response(req, http::status::not_found,
                                {{"error", {{"code", "NotFound"}, {"message", "no stream here"}}}}));
            return;
        }
        write(server_->handle(req));
    }

    void write(http::response<http::string_body> res) {
        res.set(http::field::server, std::string("vsens/") + kEngineVersion);
        res.set(http::field::access_control_allow_origin, "*");
        res.prepare_payload();
        auto sp = std::make_shared<http::response<http::string_body>>(std::move(res));
        http::async_write(stream_, *sp,
                          [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
                              if (ec || sp->need_eof()) {
                                  self->close();
                                  return;
                              }
                              self->do_read();
                          });
    }

    void close() {
        beast::error_code ec;
        stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        stream_.socket().close(ec);
    }

    beast::tcp_stream stream_;
    std::shared_ptr<Server::Impl> server_;
    beast::flat_buffer buffer_;
    std::optional<http::request_parser<http::string_body>> parser_;
    bool reading_ = false;
};

void Server::Impl::do_accept() {
    acceptor.async_accept(net::make_strand(ioc), [self = shared_from_this()](beast::error_code ec,
                                                                             tcp::socket socket) {
        if (ec) {
            if (!self->stopping) spdlog::warn("accept failed: {}", ec.message());
        } else if (!self->stopping) {
            auto conn = std::make_shared<HttpConnection>(std::move(socket), self);
            {
                std::lock_guard lock(self->mutex);
                std::erase_if(self->connections, [](const auto& w) { return w.expired(); });
                self->connections.push_back(conn);
            }
            conn->run();
        }
        if (!self->stopping && self->acceptor.is_open()) self->do_accept();
    });
}

http::response<http::string_body> Server::Impl::handle(const http::request<http::string_body>& req) {
    const auto parts = split_path(std::string_view(req.target().data(), req.target().size()));
    const auto method = req.method();
    spdlog::debug("{} {}", std::string(req.method_string()), std::string(req.target()));
    try {
        if (method == http::verb::options) {
            http::response<http::string_body> res{http::status::no_content, req.version()};
            res.set(http::field::access_control_allow_methods, "GET, POST, PATCH, DELETE, OPTIONS");
            res.set(http::field::access_control_allow_headers, "Content-Type");
            return res;
        }
        if (parts.empty() || parts[0] != "sessions") {
            return json_response(req, http::status::not_found,
                                 {{"error", {{"code", "NotFound"}, {"message", "no such route"}}}});
        }
        if (parts.size() == 1) {
            if (method == http::verb::get) {
                std::vector<std::shared_ptr<Hosted>> all;
                {
                    std::lock_guard lock(mutex);
                    for (const auto& [id, h] : sessions) all.push_back(h);
                }
                json list = json::array();
                for (const auto& h : all) list.push_back(h->handle());
                return json_response(req, http::status::ok, list);
            }
            if (method == http::verb::post) {
                SessionConfig cfg = config_from_json(parse_body(req.body()), options.data_root);
                auto hosted = std::make_shared<Hosted>(new_session_id(), Session::create(std::move(cfg)), ioc);
                {
                    std::lock_guard lock(mutex);
                    sessions.emplace(hosted->id(), hosted);
                }
                spdlog::info("session {} created", hosted->id());
                return json_response(req, http::status::created, hosted->describe());
            }
        } else {
            auto hosted = find(parts[1]);
            if (parts.size() == 2) {
                if (method == http::verb::get) return json_response(req, http::status::ok, hosted->describe());
                if (method == http::verb::delete_) {
                    {
                        std::lock_guard lock(mutex);
                        sessions.erase(parts[1]);
                    }
                    hosted->shutdown(kSessionDeleted, "session deleted");
                    spdlog::info("session {} deleted", parts[1]);
                    return json_response(req, http::status::ok, json{{"deleted", parts[1]}});
                }
            } else if (parts[2] == "sensors" && parts.size() == 3 && method == http::verb::post) {
                return json_response(req, http::status::created, hosted->add_sensor(parse_body(req.body())));
            } else if (parts[2] == "sensors" && parts.size() == 4) {
                if (method == http::verb::patch)
                    return json_response(req, http::status::ok,
                                         hosted->move_sensor(parts[3], parse_body(req.body())));
                if (method == http::verb::delete_)
                    return json_response(req, http::status::ok, hosted->remove_sensor(parts[3]));
            } else if (parts[2] == "prefabs" && parts.size() == 3 && method == http::verb::post) {
                return json_response(req, http::status::created, hosted->add_prefab(parse_body(req.body())));
            } else if (parts[2] == "transport" && parts.size() == 3 && method == http::verb::post) {
                return json_response(req, http::status::ok, hosted->transport(parse_body(req.body())));
            } else if (parts[2] == "export" && parts.size() == 3 && method == http::verb::get) {
                http::response<http::string_body> res{http::status::ok, req.version()};
                res.set(http::field::content_type, "application/zip");
                res.set(http::field::content_disposition,
                        "attachment; filename=\"" + parts[1] + ".zip\"");
                res.body() = hosted->export_zip();
                return res;
            }
        }
        return json_response(req, http::status::method_not_allowed,
                             {{"error", {{"code", "MethodNotAllowed"},
                                         {"message", std::string(req.method_string()) + " " +
                                                         std::string(req.target())}}}});
    } catch (const Error& e) {
        return json_response(req, status_for(e.code()), {{"error", error_body(e)}});
    } catch (const json::exception& e) {
        return json_response(req, http::status::bad_request,
                             {{"error", {{"code", "InvalidArgument"}, {"message", e.what()}}}});
    }
}

Server::Server(ServerOptions options) : impl_(std::make_shared<Impl>(std::move(options))) {
    beast::error_code ec;
    const auto address = net::ip::make_address(impl_->options.host, ec);
    if (ec) throw Error(ErrorCode::Io, "bad listen address '" + impl_->options.host + "'");
    const tcp::endpoint endpoint{address, impl_->options.port};
    auto& acc = impl_->acceptor;
    acc.open(endpoint.protocol(), ec);
    if (!ec) acc.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acc.bind(endpoint, ec);
    if (!ec) acc.listen(net::socket_base::max_listen_connections, ec);
    if (ec) {
        throw Error(ErrorCode::Io, "cannot listen on " + impl_->options.host + ":" +
                                       std::to_string(impl_->options.port) + ": " + ec.message());
    }
}

Server::~Server() { stop(); }

const std::string& Server::host() const { return impl_->options.host; }

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::start() {
    if (!impl_->threads.empty()) return;
    impl_->work.emplace(impl_->ioc.get_executor());
    impl_->do_accept();
    const int n = std::max(1, impl_->options.io_threads);
    for (int i = 0; i < n; ++i) impl_->threads.emplace_back([impl = impl_] { impl->ioc.run(); });
}

void Server::stop() {
    auto& impl = *impl_;
    if (impl.stopping.exchange(true)) return;
    net::post(impl.acceptor.get_executor(), [self = impl_] {
        beast::error_code ec;
        self->acceptor.close(ec);
    });
    std::vector<std::shared_ptr<Hosted>> sessions;
    std::vector<std::shared_ptr<HttpConnection>> conns;
    {
        std::lock_guard lock(impl.mutex);
        for (const auto& [id, h] : impl.sessions) sessions.push_back(h);
        for (const auto& w : impl.connections)
            if (auto c = w.lock()) conns.push_back(c);
    }
    for (const auto& h : sessions) h->shutdown(websocket::close_code::going_away, "server shutting down");
    for (const auto& c : conns) c->close_if_idle();
    impl.work.reset();

    // Let in-flight work drain, but do not hang forever on a stuck peer.
    const auto deadline = Clock::now() + std::chrono::seconds(5);
    while (!impl.threads.empty() && !impl.ioc.stopped() && Clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    impl.ioc.stop();
    for (auto& t : impl.threads) t.join();
    impl.threads.clear();
    {
        std::lock_guard lock(impl.mutex);
        impl.sessions.clear();
    }
}

}  // namespace vsens::service
