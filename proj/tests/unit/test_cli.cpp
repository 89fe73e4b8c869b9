// Runs the vsens binary as a subprocess.
#include <array>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <thread>

#include <sys/wait.h>
#include <unistd.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "support.hpp"

namespace fs = std::filesystem;
namespace net = boost::asio;
namespace http = boost::beast::http;
using nlohmann::json;
using vsens::test::data_path;
using vsens::test::read_file;
using vsens::test::temp_dir;

namespace {

struct Result {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Result run_cli(const std::string& args) {
    const fs::path dir = temp_dir("cli_io");
    const std::string cmd = quote(VSENS_CLI_PATH) + " " + args + " >" + quote((dir / "out").string()) +
                            " 2>" + quote((dir / "err").string());
    const int status = std::system(cmd.c_str());
    Result r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_file(dir / "out");
    r.err = read_file(dir / "err");
    return r;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) files[e.path().filename().string()] = read_file(e.path());
    return files;
}

/// `vsens serve` child with its stdout on a pipe.
class ServeProcess {
public:
    explicit ServeProcess(const std::vector<std::string>& args) {
        int fds[2];
        if (pipe(fds) != 0) throw std::runtime_error("pipe");
        pid_ = fork();
        if (pid_ == 0) {
            dup2(fds[1], STDOUT_FILENO);
            close(fds[0]);
            close(fds[1]);
            std::vector<char*> argv{const_cast<char*>(VSENS_CLI_PATH), const_cast<char*>("serve")};
            for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
            argv.push_back(nullptr);
            execv(VSENS_CLI_PATH, argv.data());
            _exit(127);
        }
        close(fds[1]);
        out_ = fdopen(fds[0], "r");
    }

    ~ServeProcess() {
        if (pid_ > 0 && !reaped_) {
            kill(pid_, SIGKILL);
            waitpid(pid_, nullptr, 0);
        }
        if (out_) fclose(out_);
    }

    std::string first_line() {
        std::array<char, 256> buf{};
        return fgets(buf.data(), buf.size(), out_) ? std::string(buf.data()) : std::string();
    }

    void interrupt() { kill(pid_, SIGINT); }

    int wait_exit() {
        int status = 0;
        waitpid(pid_, &status, 0);
        reaped_ = true;
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

private:
    pid_t pid_ = -1;
    FILE* out_ = nullptr;
    bool reaped_ = false;
};

std::string http_get(unsigned short port, const std::string& target) {
    net::io_context ioc;
    boost::beast::tcp_stream stream(ioc);
    stream.connect({net::ip::make_address("127.0.0.1"), port});
    http::request<http::empty_body> req{http::verb::get, target, 11};
    req.set(http::field::host, "127.0.0.1");
    http::write(stream, req);
    boost::beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(stream, buffer, res);
    return res.body();
}

}  // namespace

TEST(CliSimulate, WritesCsvAndMetaPerSensor) {
    const fs::path dir = temp_dir("cli_sim");
    json cfg = json::parse(read_file(data_path("reference/config.json")));
    cfg["clip"] = data_path("reference/walk.bvh").string();
    cfg["scene"] = {data_path("reference/room.obj").string()};
    cfg["sensors"] = json::array({cfg["sensors"][0], cfg["sensors"][1]});
    cfg["prefabs"] = json::array();
    std::ofstream(dir / "two.json") << cfg.dump(2);

    const Result r = run_cli("simulate --config " + quote((dir / "two.json").string()) + " --out " +
                             quote((dir / "out").string()) + " --json");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto files = tree(dir / "out");
    EXPECT_EQ(files.size(), 4u);
    EXPECT_TRUE(files.count("wall_cam.csv"));
    EXPECT_TRUE(files.count("wrist_imu.meta.json"));
    const json summary = json::parse(r.out);
    EXPECT_EQ(summary["sensors"], 2);
    EXPECT_EQ(summary["ticks"], 120);
    EXPECT_NE(r.err.find("2 sensor(s)"), std::string::npos);
}

TEST(CliSimulate, MissingConfigNamesPath) {
    const Result r = run_cli("simulate --config /no/such/config.json --out /tmp/unused");
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("/no/such/config.json"), std::string::npos);
}

TEST(CliSimulate, ValidationErrorsListed) {
    const fs::path dir = temp_dir("cli_bad");
    std::ofstream(dir / "bad.json") << R"({"simulation_rate": -1, "sensors": [{"id": "a", "type": "sonar"}]})";
    const Result r = run_cli("simulate --config " + quote((dir / "bad.json").string()) + " --out " +
                             quote((dir / "out").string()));
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("simulation_rate"), std::string::npos);
    EXPECT_NE(r.err.find("sensors[0].type"), std::string::npos);
}

TEST(CliSimulate, SameSeedSameTree) {
    const fs::path dir = temp_dir("cli_det");
    const std::string cfg = quote(data_path("reference/config.json").string());
    ASSERT_EQ(run_cli("simulate --quiet --seed 9 --config " + cfg + " --out " + quote((dir / "a").string())).exit_code, 0);
    ASSERT_EQ(run_cli("simulate --quiet --seed 9 --config " + cfg + " --out " + quote((dir / "b").string())).exit_code, 0);
    ASSERT_EQ(run_cli("simulate --quiet --seed 10 --config " + cfg + " --out " + quote((dir / "c").string())).exit_code, 0);
    EXPECT_EQ(tree(dir / "a"), tree(dir / "b"));
    EXPECT_NE(tree(dir / "a"), tree(dir / "c"));
}

TEST(CliSimulate, MatchesGoldenFiles) {
    const fs::path dir = temp_dir("cli_golden");
    ASSERT_EQ(run_cli("simulate --quiet --config " + quote(data_path("reference/config.json").string()) +
                      " --out " + quote(dir.string()))
                  .exit_code,
              0);
    EXPECT_EQ(tree(dir), tree(data_path("golden/reference")));
}

TEST(CliInspect, MinimalBvh) {
    const Result r = run_cli("inspect --json " + quote(data_path("bvh/minimal.bvh").string()));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const json d = json::parse(r.out);
    EXPECT_EQ(d["joints"], 2);
    EXPECT_EQ(d["frames"], 2);
    EXPECT_EQ(d["frame_time"], 0.033333);

    const Result human = run_cli("inspect " + quote(data_path("bvh/minimal.bvh").string()));
    EXPECT_EQ(human.out, "");
    EXPECT_NE(human.err.find("2 joints"), std::string::npos);
    EXPECT_NE(human.err.find("frame time 0.033333"), std::string::npos);
}

TEST(CliInspect, QuadObj) {
    const Result r = run_cli("inspect --json " + quote(data_path("obj/quad.obj").string()));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const json d = json::parse(r.out);
    EXPECT_EQ(d["vertices"], 4);
    EXPECT_EQ(d["triangles"], 2);
    EXPECT_EQ(d["bounds"]["min"], json::array({-0.5, -0.5, -2.0}));
}

TEST(CliInspect, CorruptFileReportsLine) {
    Result r = run_cli("inspect " + quote(data_path("bvh/malformed/bad_number.bvh").string()));
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("line 20"), std::string::npos);
    r = run_cli("inspect " + quote(data_path("obj/bad_record.obj").string()));
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("line 3"), std::string::npos);
}

TEST(CliUsage, UnknownFlagRejected) {
    const Result r = run_cli("simulate --config x --out y --frobnicate");
    EXPECT_NE(r.exit_code, 0);
    EXPECT_NE(r.err.find("frobnicate"), std::string::npos);
}

TEST(CliServe, ListsNoSessionsAndStopsOnInterrupt) {
    ServeProcess serve({"--port", "0"});
    const std::string line = serve.first_line();
    const auto colon = line.rfind(':');
    ASSERT_NE(colon, std::string::npos) << line;
    const auto port = static_cast<unsigned short>(std::stoi(line.substr(colon + 1)));
    EXPECT_EQ(json::parse(http_get(port, "/sessions")), json::array());
    serve.interrupt();
    EXPECT_EQ(serve.wait_exit(), 0);
}

TEST(CliServe, OccupiedPortExitsOne) {
    net::io_context ioc;
    net::ip::tcp::acceptor taken(ioc, {net::ip::make_address("127.0.0.1"), 0});
    ServeProcess serve({"--port", std::to_string(taken.local_endpoint().port())});
    EXPECT_EQ(serve.wait_exit(), 1);
}
